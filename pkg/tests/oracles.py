"""Independent restatements used as test oracles."""
from __future__ import annotations

from fairparts.core import SKIP, Lasso, Step, Transition, is_computation
from fairparts.modelcheck import enumerate_lassos


def part_by_definition(fts2, mu, s1):
    """(states, initial, transitions) of the part of ``s1``, straight from the set definitions."""
    ts = fts2.ts
    reach = ts.reachable()
    ec = {s for s in reach if mu[s] == s1}
    y = {t.dst for t in ts.transitions if t.src in ec and t.dst not in ec and t.action != SKIP}
    fair = fts2.fair_transitions
    fs, frontier = set(), set(y)
    while frontier:
        step = {t.dst for t in fair if t.src in frontier} - fs
        fs |= step
        frontier = step
    states = ec | y | fs
    trans = {t for t in ts.transitions if t.src in ec}
    trans |= {t for t in fair if t.src in (y | fs) and t.dst in fs}
    trans |= {Transition(s, SKIP, s) for s in states if not any(t.src == s for t in trans)}
    initial = {s for s in ec if s in ts.initial
               or any(t.dst == s and t.src not in ec for t in ts.transitions if t.src in reach)}
    return states, initial, trans


class Decomposer:
    """Splits computations at abstract steps and rebuilds each fragment as
    the start of a computation of the part of its class."""

    def __init__(self, fts2, mu, parts, abstract_actions):
        self.fts2 = fts2
        self.mu = mu
        self.parts = {p.key: p for p in parts}
        self.part_fts = {p.key: p.fts(fts2) for p in parts}
        self.act1 = frozenset(abstract_actions) - {SKIP}
        self.cache: dict[tuple, bool] = {}
        self.fragments = 0
        self.extension_bound = 8

    def transitions(self, lasso: Lasso, copies: int):
        steps = list(lasso.prefix) + list(lasso.cycle) * copies
        states = [s for s, _ in steps] + [lasso.cycle[0].state]
        return [Transition(s, a, d) for (s, a), d in zip(steps, states[1:])]

    def check(self, lasso: Lasso) -> bool:
        p, c = len(lasso.prefix), len(lasso.cycle)
        trans = self.transitions(lasso, 2)
        cuts = [i for i, t in enumerate(trans) if t.action in self.act1]
        start = 0
        for cut in cuts:
            if start >= p + c:
                break
            if not self.finite(tuple(trans[start:cut + 1]), start == 0):
                return False
            start = cut + 1
        if not any(t.action in self.act1 for t in lasso.cycle):
            # The last fragment never leaves the class: it is a lasso of the part.
            tail = tuple(self.transitions(lasso, 1)[start:])
            if not self.infinite(tail, p, start):
                return False
        return True

    def finite(self, fragment: tuple[Transition, ...], at_start: bool) -> bool:
        key = (fragment, at_start)
        hit = self.cache.get(key)
        if hit is None:
            hit = self.cache[key] = self._finite(fragment, at_start)
            self.fragments += 1
        return hit

    def _finite(self, fragment, at_start):
        first = fragment[0].src
        part = self.parts[self.mu[first]]
        if first not in part.initial and not (at_start and first in self.fts2.ts.initial):
            return False
        if not set(fragment) <= part.transitions:
            return False
        # Extend inside the part, preferring fair moves and Skip loops, until
        # the whole lasso is a computation of the part.
        part_fts = self.part_fts[part.key]
        head = tuple(Step(part.local(t.src), t.action) for t in fragment)
        for tail in enumerate_lassos(part.ts, self.extension_bound, [part.local(fragment[-1].dst)]):
            lasso = Lasso(head + tail.prefix, tail.cycle)
            if is_computation(part_fts, lasso):
                return True
        return False

    def infinite(self, tail, p, start) -> bool:
        part = self.parts[self.mu[tail[0].src]]
        if not set(tail) <= part.transitions:
            return False
        local = [Transition(part.local(t.src), t.action, part.local(t.dst)) for t in tail]
        split = max(0, p - start)
        lasso = Lasso.from_transitions(local[:split], local[split:])
        return is_computation(self.part_fts[part.key], lasso)


__all__ = ["Decomposer", "part_by_definition"]
