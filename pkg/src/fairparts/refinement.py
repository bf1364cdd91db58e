"""Fair refinement between two fair transition systems.

The relation is the greatest subset of the gluing function ``mu`` that
matches abstract steps exactly, lets hidden (tau) steps stutter, admits no
fair hidden divergence, and preserves the abstract fairness constraints.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from .core import (SKIP, TAU, FairTransitionSystem, Transition, fair_cycle, fair_sccs,
                   shortest_path, tau_project)
from .frontend.explore import GluingMap, derive_mu
from .logic import Expr


class RefinementRefused(RuntimeError):
    """Raised by drivers that need a verified refinement."""

    def __init__(self, message: str, verdict: RefinementVerdict | None = None):
        super().__init__(message)
        self.verdict = verdict


@dataclass(frozen=True)
class ClauseReport:
    clause: str
    passed: bool
    message: str = ""
    witness: tuple[Transition, ...] = ()
    cycle: tuple[Transition, ...] = ()


@dataclass(frozen=True)
class RefinementWitness:
    rho: frozenset[tuple[int, int]]
    sc2: frozenset[int]
    t1: Mapping[int, frozenset[Transition]]
    removed: Mapping[int, ClauseReport] = field(default_factory=dict)


@dataclass(frozen=True)
class RefinementVerdict:
    passed: bool
    witness: RefinementWitness
    mu: GluingMap
    clauses: tuple[ClauseReport, ...]

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(c.clause for c in self.clauses if not c.passed)

    def clause(self, name: str) -> ClauseReport:
        for c in self.clauses:
            if c.clause == name:
                return c
        raise KeyError(name)


def _mapping(fts1: FairTransitionSystem, fts2: FairTransitionSystem, gluing: GluingMap | Expr) -> GluingMap:
    if isinstance(gluing, GluingMap):
        if len(gluing.mapping) != fts2.ts.n_states or gluing.n_abstract != fts1.ts.n_states:
            raise ValueError("gluing map does not match the two systems")
        return gluing
    return derive_mu(fts1, fts2, gluing)


def compute_rho(fts1: FairTransitionSystem, fts2: FairTransitionSystem, mu: GluingMap) -> RefinementWitness:
    """Greatest relation inside ``mu`` closed under step matching and tau stuttering.

    Only refined states reachable from the initial states are related.
    Since ``mu`` is a function, the relation is a partial function too and
    the fixpoint is a single worklist pass over the refined transitions.
    """
    ts1, ts2 = fts1.ts, fts2.ts
    act1 = (ts1.actions - {SKIP}) & ts2.actions
    tts2 = tau_project(ts2, act1)
    abstract_steps = ts1.transition_set
    reachable = tts2.reachable()
    related = {s2 for s2 in reachable}
    preds: dict[int, list[Transition]] = {}
    for t in tts2.transitions:
        preds.setdefault(t.dst, []).append(t)

    def violation(t: Transition) -> ClauseReport | None:
        s1 = mu[t.src]
        if t.dst not in related:
            clause = "3" if t.action == TAU else "1"
            return ClauseReport(clause, False, f"{ts2.name(t.dst)} is no longer related", (t,))
        if t.action == TAU:
            if mu[t.dst] != s1:
                return ClauseReport("3", False, f"hidden step leaves the class of {ts1.name(s1)}", (t,))
            return None
        if Transition(s1, t.action, mu[t.dst]) not in abstract_steps:
            return ClauseReport("1", False, f"{ts1.name(s1)} has no {t.action} step to "
                                            f"{ts1.name(mu[t.dst])}", (t,))
        return None

    removed: dict[int, ClauseReport] = {}
    queue = deque(sorted(related))
    while queue:
        s2 = queue.popleft()
        if s2 not in related:
            continue
        for t in tts2.out[s2]:
            why = violation(t)
            if why is not None:
                related.discard(s2)
                removed[s2] = why
                queue.extend(p.src for p in preds.get(s2, ()) if p.src in related)
                break

    fair1 = fts1.fair_transitions
    fair_sources = {t.src for t in fair1}
    sc2 = frozenset(t.dst for t in ts2.transitions
                    if t.action in act1 and t.src in reachable and mu[t.dst] in fair_sources)
    by_source: dict[int, set[Transition]] = {}
    for t in fair1:
        by_source.setdefault(t.src, set()).add(t)
    t1 = {s2: frozenset(by_source[mu[s2]]) for s2 in sorted(sc2)}
    rho = frozenset((s2, mu[s2]) for s2 in related)
    return RefinementWitness(rho, sc2, t1, removed)


def check_tau_divergence(fts2: FairTransitionSystem, act1) -> ClauseReport:
    """No computation may end in an infinite run of hidden steps.

    A hidden cycle is harmless when the refined fairness constraints force
    leaving it; what remains is a fair strongly connected set of hidden
    steps, whose cycle is reported.
    """
    ts2 = fts2.ts
    tts2 = tau_project(ts2, frozenset(act1) & ts2.actions)
    reach = tts2.reachable()
    hidden = [t for t in ts2.transitions
              if t.src in reach and t.action not in act1 and t.action != SKIP]
    edges = [(t.src, t.dst, t) for t in hidden]
    comps = fair_sccs(edges, fts2.fairness)
    if not comps:
        return ClauseReport("2", True)
    comp = min(comps, key=min)
    anchor = min(comp)
    cycle = tuple(e[2] for e in fair_cycle(comp, edges, fts2.fairness, anchor))
    prefix = shortest_path(ts2.out, ts2.initial, lambda s: s == anchor) or []
    names = ", ".join(ts2.name(s) for s in sorted(comp))
    return ClauseReport("2", False, f"fair hidden cycle through {{{names}}}", tuple(prefix), cycle)


def check_fairness_preservation(fts1: FairTransitionSystem, fts2: FairTransitionSystem,
                                witness: RefinementWitness, mu: GluingMap) -> tuple[ClauseReport, ClauseReport]:
    """Abstract fairness preservation and its non-reduction counterpart.

    Preservation: a computation that visits a state of S_c2 infinitely often
    must take infinitely often a transition refining a transition of the
    abstract constraint concerned.  It fails exactly when such a state lies
    in a fair strongly connected set once the refining transitions are
    removed.  Non-reduction: some refining transition of every abstract
    fair transition in T1(s2) is reachable from s2.
    """
    ts1, ts2 = fts1.ts, fts2.ts
    related = {s2 for s2, _ in witness.rho}
    reach = ts2.reachable()
    live = [t for t in ts2.transitions if t.src in reach]
    c4 = ClauseReport("4", True)
    c5 = ClauseReport("5", True)

    def refines(t: Transition, abstract: frozenset[Transition]) -> bool:
        return (t.src in related and t.dst in related
                and Transition(mu[t.src], t.action, mu[t.dst]) in abstract)

    for i, f1 in enumerate(fts1.fairness):
        concerned = sorted(s2 for s2 in witness.sc2 if s2 in related and witness.t1[s2] & f1.transitions)
        if not concerned:
            continue
        edges = [(t.src, t.dst, t) for t in live if not refines(t, f1.transitions)]
        comps = fair_sccs(edges, fts2.fairness)
        for s2 in concerned:
            comp = next((c for c in comps if s2 in c), None)
            if comp is not None and c4.passed:
                cycle = tuple(e[2] for e in fair_cycle(comp, edges, fts2.fairness, s2))
                prefix = shortest_path(ts2.out, ts2.initial, lambda s, g=s2: s == g) or []
                c4 = ClauseReport("4", False, f"a computation visits {ts2.name(s2)} infinitely often "
                                              f"without refining {f1.name}", tuple(prefix), cycle)
    cls = mu.classes
    for s2 in sorted(witness.sc2):
        if s2 not in related:
            continue
        home = cls[mu[s2]]
        # Paths inside the class are tried first; the global search only
        # runs when they find nothing, which keeps passing checks linear.
        local = {s2}
        stack = [s2]
        while stack:
            for t in ts2.out[stack.pop()]:
                if t.dst in home and t.dst not in local:
                    local.add(t.dst)
                    stack.append(t.dst)
        from_s2 = None
        for t1 in sorted(witness.t1[s2]):
            refined = [t for s in local for t in ts2.out[s] if refines(t, frozenset([t1]))]
            if not refined:
                if from_s2 is None:
                    from_s2 = ts2.reachable([s2])
                refined = [t for t in live if t.src in from_s2 and refines(t, frozenset([t1]))]
            ok = bool(refined)
            if not ok and c5.passed:
                c5 = ClauseReport("5", False, f"no transition refining {ts1.name(t1.src)} -{t1.action}-> "
                                              f"{ts1.name(t1.dst)} is reachable from {ts2.name(s2)}")
    return c4, c5


def check_refinement(fts1: FairTransitionSystem, fts2: FairTransitionSystem,
                     gluing: GluingMap | Expr) -> RefinementVerdict:
    """Decide whether ``fts2`` refines ``fts1`` under a gluing invariant or map."""
    mu = _mapping(fts1, fts2, gluing)
    ts1, ts2 = fts1.ts, fts2.ts
    act1 = (ts1.actions - {SKIP}) & ts2.actions
    witness = compute_rho(fts1, fts2, mu)
    related = {s2 for s2, _ in witness.rho}

    bad_init = sorted(s for s in ts2.initial if s not in related or mu[s] not in ts1.initial)
    init = ClauseReport("initial", not bad_init,
                        "" if not bad_init else f"initial state {ts2.name(bad_init[0])} is not related "
                                                f"to an initial abstract state")
    reports = [init]
    for clause in ("1", "3"):
        culprits = sorted((s, r) for s, r in witness.removed.items() if r.clause == clause)
        if culprits:
            s2, r = culprits[0]
            reports.append(ClauseReport(clause, False, f"{ts2.name(s2)}: {r.message}", r.witness))
        else:
            reports.append(ClauseReport(clause, True))
    reports.append(check_tau_divergence(fts2, act1))
    reports.extend(check_fairness_preservation(fts1, fts2, witness, mu))
    reports.sort(key=lambda r: "0" if r.clause == "initial" else r.clause)
    return RefinementVerdict(all(r.passed for r in reports), witness, mu, tuple(reports))


def format_verdict(v: RefinementVerdict, fts1: FairTransitionSystem, fts2: FairTransitionSystem) -> str:
    ts1, ts2 = fts1.ts, fts2.ts
    lines = ["PASS" if v.passed else "FAIL"]
    for r in v.clauses:
        status = "ok" if r.passed else "violated"
        line = f"  clause {r.clause}: {status}"
        if r.message:
            line += f" ({r.message})"
        lines.append(line)
        if r.witness:
            lines.append("    path: " + " ".join(f"{ts2.name(t.src)} -{t.action}->" for t in r.witness)
                         + f" {ts2.name(r.witness[-1].dst)}")
        if r.cycle:
            lines.append("    cycle: " + " ".join(f"{ts2.name(t.src)} -{t.action}->" for t in r.cycle)
                         + f" {ts2.name(r.cycle[-1].dst)}")
    lines.append(f"  related pairs: {len(v.witness.rho)} of {ts2.n_states} refined states")
    lines.append("  S_c2: " + ", ".join(ts2.name(s) for s in sorted(v.witness.sc2)))
    for s2, ts in sorted(v.witness.t1.items()):
        tr = ", ".join(f"{ts1.name(t.src)} -{t.action}-> {ts1.name(t.dst)}" for t in sorted(ts))
        lines.append(f"  T1({ts2.name(s2)}) = {{{tr}}}")
    return "\n".join(lines)


__all__ = [
    "ClauseReport", "RefinementRefused", "RefinementVerdict", "RefinementWitness",
    "check_fairness_preservation", "check_refinement", "check_tau_divergence", "compute_rho",
    "format_verdict",
]
