"""Parts of a refined system: one per abstract state, or per block of an
arbitrary transition partition."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .core import (SKIP, FairnessConstraint, FairTransitionSystem, Transition, TransitionSystem,
                   dumps, restrict)
from .frontend.explore import GluingMap
from .refinement import RefinementRefused, RefinementVerdict, check_refinement

CLASS, FRONTIER, FAIR_CLOSURE, BLOCK = "EC", "Y", "FS", "block"


@dataclass(frozen=True)
class Part:
    """A sub-system of the refined system, numbered densely.

    ``origin[i]`` is the refined state behind part state ``i``;
    ``provenance[i]`` tells why it belongs to the part.
    """

    key: Hashable
    name: str
    ts: TransitionSystem
    origin: tuple[int, ...]
    provenance: tuple[str, ...]

    def local(self, s: int) -> int:
        return self.origin.index(s)

    def global_transition(self, t: Transition) -> Transition:
        return Transition(self.origin[t.src], t.action, self.origin[t.dst])

    def members(self, kind: str) -> frozenset[int]:
        """Refined states of one provenance kind."""
        return frozenset(g for g, p in zip(self.origin, self.provenance) if p == kind)

    @property
    def states(self) -> frozenset[int]:
        return frozenset(self.origin)

    @property
    def initial(self) -> frozenset[int]:
        return frozenset(self.origin[s] for s in self.ts.initial)

    @property
    def transitions(self) -> frozenset[Transition]:
        """The part's transitions in refined-state numbering."""
        return frozenset(self.global_transition(t) for t in self.ts.transitions)

    def fts(self, fairness: FairTransitionSystem, indices: Iterable[int] | None = None
            ) -> FairTransitionSystem:
        """The part with the refined constraints (or a subset) restricted to it."""
        index = {g: i for i, g in enumerate(self.origin)}
        own = self.ts.transition_set
        chosen = range(len(fairness.fairness)) if indices is None else indices
        constraints = []
        for i in chosen:
            f = fairness.fairness[i]
            moved = (Transition(index[t.src], t.action, index[t.dst]) for t in f.transitions
                     if t.src in index and t.dst in index)
            constraints.append(FairnessConstraint(f.name, f.action, frozenset(t for t in moved if t in own)))
        return FairTransitionSystem(self.ts, tuple(constraints))

    def dumps(self) -> str:
        prov = {self.ts.name(i): p for i, p in enumerate(self.provenance)}
        return dumps(self.ts, {"part": str(self.name), "provenance": prov})


def _build(key: Hashable, name: str, ts: TransitionSystem, provenance: Mapping[int, str],
           transitions: Iterable[Transition], initial: Iterable[int]) -> Part:
    trans = set(transitions)
    states = set(provenance)
    dead = sorted(s for s in states if not any(t.src == s for t in trans))
    trans |= {Transition(s, SKIP, s) for s in dead}
    sub, order = restrict(ts, states, sorted(trans), initial)
    return Part(key, name, sub, order, tuple(provenance[s] for s in order))


def refinement_parts(fts2: FairTransitionSystem, mu: GluingMap, fts1: FairTransitionSystem,
                     verified: RefinementVerdict | bool | None = None,
                     strict_initial: bool = False) -> list[Part]:
    """One part per abstract state whose class is nonempty.

    The part of ``s1`` holds the class EC(s1), the frontier Y of states
    entered by transitions leaving the class, and FS(Y), the states reached
    from Y by one or more fair transitions.  Its transitions are those
    leaving class states plus the fair transitions from Y and FS(Y) into
    FS(Y).  Part states without an outgoing part transition get a Skip
    loop.  Initial states are class states that are initial or entered from
    outside the class (only by abstract actions when ``strict_initial``).

    The refinement is checked first unless ``verified`` says it passed.
    """
    if verified is None or verified is False:
        verdict = check_refinement(fts1, fts2, mu)
        if not verdict.passed:
            raise RefinementRefused("the refinement does not hold: clauses "
                                    + ", ".join(verdict.failed), verdict)
    elif isinstance(verified, RefinementVerdict) and not verified.passed:
        raise RefinementRefused("the refinement does not hold", verified)
    ts2, ts1 = fts2.ts, fts1.ts
    abstract_actions = ts1.actions - {SKIP}
    reach = ts2.reachable()
    live = [t for t in ts2.transitions if t.src in reach and t.action != SKIP]
    fair = {t for t in fts2.fair_transitions if t.src in reach}
    fair_out: dict[int, list[Transition]] = {}
    for t in sorted(fair):
        fair_out.setdefault(t.src, []).append(t)
    parts = []
    for s1, members in mu.classes.items():
        ec = {s for s in members if s in reach}
        if not ec:
            continue
        inside = [t for t in live if t.src in ec]
        y = {t.dst for t in inside if t.dst not in ec}
        fs: set[int] = set()
        stack = [t.dst for s in y for t in fair_out.get(s, ())]
        while stack:
            s = stack.pop()
            if s not in fs:
                fs.add(s)
                stack.extend(t.dst for t in fair_out.get(s, ()))
        entering = {t.dst for t in live if t.src not in ec and t.dst in ec
                    and (not strict_initial or t.action in abstract_actions)}
        initial = {s for s in ec if s in ts2.initial or s in entering}
        provenance: dict[int, str] = {}
        for s in fs:
            provenance[s] = FAIR_CLOSURE
        for s in y:
            provenance[s] = FRONTIER
        for s in ec:
            provenance[s] = CLASS
        transitions = inside + [t for t in sorted(fair) if t.src in (y | fs) and t.dst in fs]
        # A Skip loop of the refined system on a class state is kept as is.
        transitions += [t for t in ts2.transitions if t.action == SKIP and t.src in ec]
        parts.append(_build(s1, ts1.name(s1), ts2, provenance, transitions, initial))
    return parts


def naive_parts(ts: TransitionSystem, assignment: Mapping[Transition, Hashable]) -> list[Part]:
    """One part per block of a transition partition, with no regard to refinement."""
    missing = [t for t in ts.transitions if t not in assignment]
    if missing:
        raise ValueError(f"transition {missing[0]} is assigned to no block")
    blocks: dict[Hashable, list[Transition]] = {}
    for t in ts.transitions:
        blocks.setdefault(assignment[t], []).append(t)
    parts = []
    for key in sorted(blocks, key=str):
        trans = blocks[key]
        states = {t.src for t in trans} | {t.dst for t in trans}
        entered = {t.dst for t in ts.transitions if assignment[t] != key and t.dst in states}
        initial = {s for s in states if s in ts.initial or s in entered}
        parts.append(_build(key, str(key), ts, {s: BLOCK for s in states}, trans, initial))
    return parts


__all__ = ["BLOCK", "CLASS", "FAIR_CLOSURE", "FRONTIER", "Part", "naive_parts", "refinement_parts"]
