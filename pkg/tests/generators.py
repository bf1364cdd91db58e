"""Random systems and formulas shared by the property suites."""
from __future__ import annotations

import random

from hypothesis import strategies as st

from fairparts.core import (FairnessConstraint, FairTransitionSystem, Lasso, Step, Transition,
                            TransitionSystem, validate_fairness)
from fairparts.logic import (Always, And, Atom, Eventually, Expr, Implies, Next, Not, Or, Release,
                             Until)

BOOL = (0, 1)


def random_ts(rng: random.Random, n: int | None = None, max_states: int = 5,
              actions: str = "ab", fanout: int = 2) -> TransitionSystem:
    """A total system over two 0/1 variables ``p`` and ``q``."""
    n = n or rng.randint(1, max_states)
    labels = tuple((rng.choice(BOOL), rng.choice(BOOL)) for _ in range(n))
    trans = set()
    for s in range(n):
        for _ in range(rng.randint(1, fanout)):
            trans.add(Transition(s, rng.choice(actions), rng.randrange(n)))
    return TransitionSystem(("p", "q"), {"p": BOOL, "q": BOOL}, labels, frozenset({0}),
                            tuple(sorted(trans)))


def random_formula(rng: random.Random, depth: int, variables: str = "pq") -> Expr:
    if depth == 0 or rng.random() < 0.25:
        return Atom(rng.choice(variables), rng.choice(BOOL))
    op = rng.choice(["not", "and", "or", "imp", "X", "F", "G", "U", "R"])
    if op == "not":
        return Not(random_formula(rng, depth - 1, variables))
    if op in ("X", "F", "G"):
        kind = {"X": Next, "F": Eventually, "G": Always}[op]
        return kind(random_formula(rng, depth - 1, variables))
    kind = {"and": And, "or": Or, "imp": Implies, "U": Until, "R": Release}[op]
    return kind(random_formula(rng, depth - 1, variables), random_formula(rng, depth - 1, variables))


def random_fts(rng: random.Random, max_states: int = 5, single: bool = False,
               distinct_labels: bool = False, tries: int = 200) -> FairTransitionSystem:
    """A system whose fairness constraints satisfy all well-formedness clauses.

    With ``single`` every constraint holds exactly one transition.
    """
    for _ in range(tries):
        n = rng.randint(2, max_states)
        if distinct_labels:
            labels = tuple((i,) for i in range(n))
            ts0 = TransitionSystem(("x",), {"x": tuple(range(n))}, labels, frozenset({0}), ())
        else:
            ts0 = random_ts(rng, n)
        trans = set()
        for s in range(n):
            for _ in range(rng.randint(1, 2)):
                trans.add(Transition(s, rng.choice("abc"), rng.randrange(n)))
        ts = TransitionSystem(ts0.variables, ts0.domains, ts0.labels, frozenset({0}), tuple(sorted(trans)))
        constraints = []
        for act in "abc":
            pool = sorted(t for t in trans if t.action == act)
            if not pool or rng.random() < 0.3:
                continue
            k = 1 if single else rng.randint(1, len(pool))
            constraints.append(FairnessConstraint(f"F{act}", act, frozenset(rng.sample(pool, k))))
        fts = FairTransitionSystem(ts, tuple(constraints))
        if constraints and not validate_fairness(fts):
            return fts
    raise RuntimeError("no well-formed system found")


def random_lasso(rng: random.Random, ts: TransitionSystem, max_prefix: int = 4,
                 max_cycle: int = 4) -> Lasso | None:
    """A random execution from an initial state, closed into a lasso when possible."""
    s = min(ts.initial)
    walk = [s]
    steps = []
    for _ in range(max_prefix + max_cycle):
        t = rng.choice(ts.out[s])
        steps.append(Step(t.src, t.action))
        s = t.dst
        walk.append(s)
    # Close at the last occurrence of the final state.
    last = walk[-1]
    for i in range(len(walk) - 2, -1, -1):
        if walk[i] == last:
            return Lasso(tuple(steps[:i]), tuple(steps[i:]))
    return None


def valuations(n_prefix: int, n_cycle: int):
    """Strategy: a word over ``p``/``q`` valuations as (prefix, cycle)."""
    val = st.fixed_dictionaries({"p": st.sampled_from(BOOL), "q": st.sampled_from(BOOL)})
    return st.tuples(st.lists(val, max_size=n_prefix), st.lists(val, min_size=1, max_size=n_cycle))


def formulas(depth: int = 3):
    """Strategy: formulas over ``p``/``q`` built from a random seed."""
    return st.integers(0, 2**32 - 1).map(lambda seed: random_formula(random.Random(seed), depth))


def systems(max_states: int = 5):
    return st.integers(0, 2**32 - 1).map(lambda seed: random_ts(random.Random(seed), max_states=max_states))
