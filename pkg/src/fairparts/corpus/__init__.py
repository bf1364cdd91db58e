"""Bundled models: the smart-card protocol T=1 at two levels, a small
didactic refinement, and a scalable family for timing runs."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from ..core import (FairnessConstraint, FairTransitionSystem, Transition, TransitionSystem,
                    renumber)
from ..frontend import EventSystem, GluingMap, derive_mu, enumerate_system, parse_event_system
from ..frontend.explore import gluing_invariant
from ..logic import Expr
from ..pltl import parse_formula

TEG1 = "teg1.evs"
TEG1_REF = "teg1ref.evs"

# Conventional state numbering, by valuation.
ABSTRACT_ORDER = (
    ("reader", "in"), ("card", "in"), ("card", "out"), ("reader", "out"),
)
REFINED_ORDER = (
    ("reader", "in", "lb", "lb"), ("reader", "out", "lb", "lb"), ("card", "in", "lb", "bl"),
    ("reader", "in", "ackb", "bl"), ("card", "in", "ackb", "bl"), ("card", "in", "ackb", "lb"),
    ("card", "out", "ackb", "lb"), ("reader", "in", "bl", "lb"), ("card", "in", "bl", "ackb"),
    ("reader", "in", "bl", "ackb"), ("reader", "in", "lb", "ackb"), ("reader", "out", "lb", "ackb"),
    ("card", "in", "lb", "lb"), ("card", "out", "lb", "lb"),
)

# Short names of the refined fairness constraints, in declaration order.
REFINED_FAIRNESS = ("F1'", "F21", "F22")

PROPERTIES: Mapping[str, str] = {
    "P": "[](CardF2=bl -> <>(CardF2=lb && SenderF2=reader))",
    "P1": "[](CardF2=bl -> <>(CardF2=lb))",
    "P2": "[](ReaderF2=bl -> <>(ReaderF2=lb))",
    "P3": "[](CardF2=bl -> <>(ReaderF2=ackb))",
    "P4": "[](ReaderF2=bl -> <>(CardF2=ackb))",
    "P5": "[](CardF2=bl && ReaderF2=ackb -> <>(CardF2=ackb && ReaderF2=bl))",
    "P6": "[](SenderF2=card -> <>(SenderF2=reader))",
    "P'": "[](SenderF2=reader && ReaderF2=lb && Cstatus2=in -> <>(ReaderF2=lb && Cstatus2=out))",
}

# The six properties of the T=1 results table.
TABLE_PROPERTIES = ("P1", "P2", "P3", "P4", "P5", "P6")


def source(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def path(name: str):
    return resources.files(__package__).joinpath(name)


def _order_by(fts: FairTransitionSystem, order, prefix: str) -> FairTransitionSystem:
    index = fts.ts.state_of_label
    perm = [index[lab] for lab in order]
    return renumber(fts, perm, [f"{prefix}{i}" for i in range(len(perm))])


@dataclass(frozen=True)
class Teg1:
    abstract_es: EventSystem
    refined_es: EventSystem
    abstract: FairTransitionSystem
    refined: FairTransitionSystem
    invariant: Expr
    mu: GluingMap

    def constraint(self, short: str) -> int:
        return REFINED_FAIRNESS.index(short)

    def formula(self, name: str) -> Expr:
        return parse_formula(PROPERTIES[name])

    def state(self, name: str) -> int:
        return self.refined.ts.names.index(name)

    def transition(self, src: str, action: str, dst: str) -> Transition:
        t = Transition(self.state(src), action, self.state(dst))
        if t not in self.refined.ts.transition_set:
            raise KeyError(f"{src} -{action}-> {dst}")
        return t


@lru_cache(maxsize=1)
def teg1() -> Teg1:
    """The T=1 pair, states numbered s0..s3 and r0..r13 by valuation."""
    aes = parse_event_system(source(TEG1))
    res = parse_event_system(source(TEG1_REF), aes)
    fts1 = _order_by(enumerate_system(aes), ABSTRACT_ORDER, "s")
    fts2 = _order_by(enumerate_system(res, aes), REFINED_ORDER, "r")
    inv = gluing_invariant(res)
    return Teg1(aes, res, fts1, fts2, inv, derive_mu(fts1, fts2, inv))


def without_constraint(fts: FairTransitionSystem, index: int) -> FairTransitionSystem:
    return fts.with_fairness(f for i, f in enumerate(fts.fairness) if i != index)


# Transitions of the first block of the naive transition partition; the
# second block holds every other transition.
NAIVE_FIRST_BLOCK = (
    ("r0", "Rblocksends", "r2"), ("r2", "Cacksends", "r3"), ("r3", "Rblocksends", "r4"),
    ("r4", "Cacksends", "r3"), ("r0", "Eject", "r1"), ("r1", "Cinsert", "r0"),
    ("r10", "Eject", "r11"), ("r11", "Cinsert", "r0"), ("r10", "Rblocksends", "r2"),
)


def naive_assignment(pair: Teg1 | None = None) -> dict[Transition, str]:
    """Two-block partition of the refined transitions (blocks s1' and s2')."""
    pair = pair or teg1()
    first = {pair.transition(*t) for t in NAIVE_FIRST_BLOCK}
    return {t: ("s1'" if t in first else "s2'") for t in pair.refined.ts.transitions}


# -- didactic refinement --------------------------------------------------------------


@dataclass(frozen=True)
class Didactic:
    abstract: FairTransitionSystem
    refined: FairTransitionSystem
    mu: GluingMap


def didactic() -> Didactic:
    """Three abstract states refined by six, with a hidden loop broken by fairness."""
    t = Transition
    ts1 = TransitionSystem(("a",), {"a": (0, 1, 2)}, ((0,), (1,), (2,)), frozenset({0}),
                           (t(0, "a", 1), t(1, "c", 2), t(2, "d", 0)), frozenset(),
                           ("s0", "s1", "s2"))
    fts1 = FairTransitionSystem(ts1, (FairnessConstraint("c", "c", frozenset({t(1, "c", 2)})),))
    ts2 = TransitionSystem(("r",), {"r": tuple(range(6))}, tuple((i,) for i in range(6)),
                           frozenset({0}),
                           (t(0, "e", 1), t(1, "a", 3), t(3, "g", 2), t(2, "h", 3), t(3, "c", 5),
                            t(5, "f", 4), t(4, "d", 0)),
                           frozenset(), tuple(f"r{i}" for i in range(6)))
    fts2 = FairTransitionSystem(ts2, (FairnessConstraint("c", "c", frozenset({t(3, "c", 5)})),))
    return Didactic(fts1, fts2, GluingMap((0, 0, 1, 1, 2, 2), 3))


# -- scaled family --------------------------------------------------------------------


def chained(k: int) -> tuple[FairTransitionSystem, FairTransitionSystem, GluingMap]:
    """``k`` copies of the T=1 pair; inserting the card moves to the next copy."""
    base = teg1()

    def chain(fts: FairTransitionSystem, prefix: str) -> FairTransitionSystem:
        ts = fts.ts
        n = ts.n_states
        (init,) = ts.initial

        def move(tr: Transition, j: int) -> Transition:
            dst = tr.dst + j * n
            if tr.action == "Cinsert":
                dst = init + ((j + 1) % k) * n
            return Transition(tr.src + j * n, tr.action, dst)

        labels = tuple(lab + (j,) for j in range(k) for lab in ts.labels)
        trans = tuple(move(tr, j) for j in range(k) for tr in ts.transitions)
        names = tuple(f"{prefix}{i}.{j}" for j in range(k) for i in range(n))
        doms = dict(ts.domains)
        doms["Copy"] = tuple(range(k))
        new_ts = TransitionSystem(ts.variables + ("Copy",), doms, labels, frozenset({init}), trans,
                                  ts.actions, names)
        fairness = tuple(FairnessConstraint(f.name, f.action,
                                            frozenset(move(tr, j) for j in range(k) for tr in f.transitions))
                         for f in fts.fairness)
        return FairTransitionSystem(new_ts, fairness)

    fts1 = chain(base.abstract, "s")
    fts2 = chain(base.refined, "r")
    n1 = base.abstract.ts.n_states
    mu = GluingMap(tuple(base.mu[i] + j * n1 for j in range(k) for i in base.refined.ts.states), n1 * k)
    return fts1, fts2, mu


__all__ = [
    "ABSTRACT_ORDER", "Didactic", "NAIVE_FIRST_BLOCK", "PROPERTIES", "REFINED_FAIRNESS",
    "REFINED_ORDER", "TABLE_PROPERTIES", "Teg1", "chained", "didactic", "naive_assignment",
    "path", "source", "teg1", "without_constraint",
]
