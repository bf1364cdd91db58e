"""Explicit-state enumeration of event systems and gluing-map derivation."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

from ..core import (FairnessConstraint, FairTransitionSystem, Transition, TransitionSystem,
                    skip_complete)
from ..logic import (Atom, Expr, TrueE, Value, VarEq, conj, conjuncts, holds,
                     partial_eval, variables)
from .syntax import EventSystem


class EnumerationError(ValueError):
    pass


class GluingError(ValueError):
    def __init__(self, message: str, refined_state: int, abstract_states: tuple[int, ...] = ()):
        super().__init__(message)
        self.refined_state = refined_state
        self.abstract_states = abstract_states


class NonTotal(GluingError):
    pass


class NonFunctional(GluingError):
    pass


def domains_of(es: EventSystem, abstract: EventSystem | None = None) -> dict[str, tuple[Value, ...]]:
    """Finite domain of every own variable.

    A variable is typed by ``x : SET``, or by an equality ``x = y`` with a
    typed abstract variable ``y`` (as in ``Cstatus2 = Cstatus1``).
    """
    sets = {s.name: s.values for s in es.sets}
    if abstract is not None:
        for s in abstract.sets:
            sets.setdefault(s.name, s.values)
    abstract_domains = domains_of(abstract) if abstract is not None else {}
    out: dict[str, tuple[Value, ...]] = {}
    for var, set_name in es.typing.items():
        if set_name not in sets:
            raise EnumerationError(f"unknown set {set_name} for {var}")
        out[var] = sets[set_name]
    for prop in es.invariant_props:
        for c in conjuncts(prop):
            if isinstance(c, VarEq):
                for a, b in ((c.left, c.right), (c.right, c.left)):
                    if a in es.variables and a not in out and b in abstract_domains:
                        out[a] = abstract_domains[b]
    missing = [v for v in es.variables if v not in out]
    if missing:
        raise EnumerationError(f"variable {missing[0]} has no finite domain")
    return out


def gluing_invariant(es: EventSystem) -> Expr:
    """Conjuncts of the invariant that mention variables of another machine."""
    own = set(es.variables)
    return conj(p for p in es.invariant_props if variables(p) - own)


def own_invariant(es: EventSystem) -> Expr:
    own = set(es.variables)
    return conj(p for p in es.invariant_props if not variables(p) - own)


def enumerate_system(es: EventSystem, abstract: EventSystem | None = None,
                     state_prefix: str | None = None) -> FairTransitionSystem:
    """Reachable-state graph of an event system, Skip-completed.

    States are numbered in breadth-first discovery order from the initial
    state, trying events in declaration order.
    """
    doms = domains_of(es, abstract)
    order = es.variables
    assigned = {a.var for a in es.init}
    missing = [v for v in order if v not in assigned]
    if missing:
        raise EnumerationError(f"initialisation does not assign {missing[0]}")
    init_val: dict[str, Value] = {}
    for a in es.init:
        if a.source is not None:
            raise EnumerationError("initialisation must assign constants")
        init_val[a.var] = a.value
    inv = own_invariant(es)

    def check(val: Mapping[str, Value], where: str) -> tuple[Value, ...]:
        for v in order:
            if val[v] not in doms[v]:
                raise EnumerationError(f"{where} gives {v} the value {val[v]!r} outside its domain")
        if not holds(inv, val):
            raise EnumerationError(f"invariant violated in state {dict(val)} reached by {where}")
        return tuple(val[v] for v in order)

    labels: list[tuple[Value, ...]] = [check(init_val, "the initialisation")]
    index = {labels[0]: 0}
    transitions: list[Transition] = []
    fired: list[str] = []  # event of each transition, parallel to ``transitions``
    queue = deque([0])
    while queue:
        s = queue.popleft()
        val = dict(zip(order, labels[s]))
        for ev in es.events:
            if not holds(ev.guard, val):
                continue
            new = dict(val)
            for a in ev.actions:
                new[a.var] = val[a.source] if a.source is not None else a.value
            lab = check(new, f"event {ev.name}")
            t = index.get(lab)
            if t is None:
                t = len(labels)
                index[lab] = t
                labels.append(lab)
                queue.append(t)
            transitions.append(Transition(s, ev.name, t))
            fired.append(ev.name)
    prefix = state_prefix or ("r" if es.is_refinement else "s")
    ts = TransitionSystem(order, doms, tuple(labels), frozenset({0}), tuple(transitions),
                          frozenset(e.name for e in es.events),
                          tuple(f"{prefix}{i}" for i in range(len(labels))))
    ts = skip_complete(ts)
    fairness = []
    for d in es.fairness:
        members = frozenset(
            t for t in transitions
            if t.action == d.event and (d.condition is None or holds(d.condition, ts.valuation(t.src)))
        )
        fairness.append(FairnessConstraint(d.label(), d.event, members))
    return FairTransitionSystem(ts, tuple(fairness))


def eval_pair(q: Expr, abstract_valuation: Mapping[str, Value],
              refined_valuation: Mapping[str, Value]) -> bool:
    """Truth of a two-system proposition on a pair of states."""
    return holds(q, refined_valuation, abstract_valuation)


@dataclass(frozen=True)
class GluingMap:
    """Total function from refined states to abstract states."""

    mapping: tuple[int, ...]
    n_abstract: int

    def __getitem__(self, s2: int) -> int:
        return self.mapping[s2]

    @cached_property
    def classes(self) -> dict[int, frozenset[int]]:
        """EC(s1) for every abstract state with a nonempty preimage."""
        out: dict[int, set[int]] = {}
        for s2, s1 in enumerate(self.mapping):
            out.setdefault(s1, set()).add(s2)
        return {s1: frozenset(v) for s1, v in sorted(out.items())}

    def glued(self, s2: int, s1: int) -> bool:
        return self.mapping[s2] == s1


def _forced(residual: Expr) -> dict[str, Value] | None:
    """If a residual is a conjunction of atoms, the valuation it forces."""
    out: dict[str, Value] = {}
    for c in conjuncts(residual):
        if isinstance(c, TrueE):
            continue
        if not isinstance(c, Atom):
            return None
        if out.get(c.var, c.value) != c.value:
            return {}
        out[c.var] = c.value
    return out


def derive_mu(fts1: FairTransitionSystem, fts2: FairTransitionSystem, inv: Expr) -> GluingMap:
    """Glue every refined state to the unique abstract state satisfying ``inv`` with it.

    The invariant is partially evaluated on the refined valuation; residuals
    are cached, and residuals that pin down a full abstract valuation are
    resolved by lookup, so the usual cost is linear in the refined states.
    """
    ts1, ts2 = fts1.ts, fts2.ts
    cache: dict[Expr, tuple[int, ...]] = {}
    mapping = []
    for s2 in ts2.states:
        residual = partial_eval(inv, ts2.valuation(s2))
        hits = cache.get(residual)
        if hits is None:
            forced = _forced(residual)
            if forced is not None and set(forced) >= set(ts1.variables):
                key = tuple(forced[v] for v in ts1.variables)
                hit = ts1.state_of_label.get(key)
                hits = () if hit is None else (hit,)
            else:
                hits = tuple(s1 for s1 in ts1.states if holds(residual, ts1.valuation(s1)))
            cache[residual] = hits
        if not hits:
            raise NonTotal(f"refined state {ts2.name(s2)} is glued to no abstract state", s2)
        if len(hits) > 1:
            names = ", ".join(ts1.name(h) for h in hits)
            raise NonFunctional(f"refined state {ts2.name(s2)} is glued to several abstract states: "
                                f"{names}", s2, hits)
        mapping.append(hits[0])
    return GluingMap(tuple(mapping), ts1.n_states)


def identity_gluing(fts: FairTransitionSystem) -> GluingMap:
    return GluingMap(tuple(fts.ts.states), fts.ts.n_states)
