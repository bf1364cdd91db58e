"""PLTL model checking: global, under fairness, and part by part.

The product of a system with the automaton of the negated property reads
the valuation of the source state of every system step.  Emptiness is
decided by a nested depth-first search; an SCC-based procedure serves as
a second, independent check.  Fairness is either folded into the formula
as an antecedent or handled on the product graph as a Streett-style
condition.  A brute-force lasso enumerator is the reference oracle.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

import networkx as nx

from .buchi import AbmodVerdict, BuchiAutomaton, TranslationBudgetExceeded, classify_formula, ltl_to_buchi
from .core import (FairTransitionSystem, Lasso, Step, Transition, TransitionSystem, fair_cycle,
                   fair_sccs, is_computation, validate_fairness)
from .frontend.explore import GluingMap, derive_mu
from .logic import Expr, Implies, Not, TrueE, holds, variables
from .partition import Part, naive_parts, refinement_parts
from .pltl import eval_word, fairness_formula, simplify_fairness_for_part
from .refinement import RefinementRefused, RefinementVerdict, check_refinement

FORMULA, ALGORITHMIC, AUTO = "formula", "algorithmic", "auto"
MODES = (FORMULA, ALGORITHMIC, AUTO)
DEFAULT_NODE_BUDGET = 4000
WORKERS_ENV = "FAIRPARTS_WORKERS"


class UnknownVariable(ValueError):
    pass


class OracleBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    holds: bool
    counterexample: Lasso | None = None
    stats: Mapping[str, object] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.holds


def check_atoms(ts: TransitionSystem, formula: Expr) -> None:
    unknown = sorted(variables(formula) - set(ts.variables))
    if unknown:
        raise UnknownVariable(f"the formula mentions undeclared variable {unknown[0]}")


# -- product ----------------------------------------------------------------------------

Node = tuple  # (system state, automaton state)


class Product:
    """On-the-fly synchronous product of a system and a Büchi automaton."""

    def __init__(self, ts: TransitionSystem, b: BuchiAutomaton):
        self.ts = ts
        self.b = b
        self._guard: dict[tuple[Expr, int], bool] = {}

    def enabled(self, guard: Expr, s: int) -> bool:
        if isinstance(guard, TrueE):
            return True
        key = (guard, s)
        hit = self._guard.get(key)
        if hit is None:
            hit = self._guard[key] = holds(guard, self.ts.valuation(s))
        return hit

    def initial(self) -> list[Node]:
        return [(s, self.b.initial) for s in sorted(self.ts.initial)]

    def successors(self, node: Node) -> Iterator[tuple[Node, Transition]]:
        s, q = node
        moves = [bt.dst for bt in self.b.out[q] if self.enabled(bt.guard, s)]
        if not moves:
            return
        for t in self.ts.out[s]:
            for q2 in moves:
                yield (t.dst, q2), t

    def accepting(self, node: Node) -> bool:
        return node[1] in self.b.accepting

    def explore(self) -> tuple[list[Node], list[tuple[Node, Node, Transition]]]:
        """Every reachable node and edge, in a deterministic order."""
        nodes = self.initial()
        seen = set(nodes)
        edges = []
        i = 0
        while i < len(nodes):
            u = nodes[i]
            for v, t in self.successors(u):
                edges.append((u, v, t))
                if v not in seen:
                    seen.add(v)
                    nodes.append(v)
            i += 1
        return nodes, edges


def _lasso_from(prefix: Sequence[tuple[Node, Transition]], cycle: Sequence[tuple[Node, Transition]]) -> Lasso:
    return Lasso(tuple(Step(n[0], t.action) for n, t in prefix),
                 tuple(Step(n[0], t.action) for n, t in cycle))


def nested_dfs(product: Product) -> tuple[Lasso | None, int]:
    """Search for an accepting cycle; returns a lasso (or None) and the nodes visited.

    The outer search runs in postorder; from each accepting node, the inner
    search looks for a way back to it, never re-entering nodes already
    flagged by earlier inner searches.
    """
    visited: set[Node] = set()
    flagged: set[Node] = set()

    def inner(seed: Node) -> list[tuple[Node, Transition]] | None:
        flagged.add(seed)
        stack = [(seed, iter(product.successors(seed)))]
        path: list[tuple[Node, Transition]] = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt, t in it:
                if nxt == seed:
                    return path + [(node, t)]
                if nxt not in flagged:
                    flagged.add(nxt)
                    path.append((node, t))
                    stack.append((nxt, iter(product.successors(nxt))))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                if path:
                    path.pop()
        return None

    for root in product.initial():
        if root in visited:
            continue
        visited.add(root)
        stack = [(root, iter(product.successors(root)))]
        trail: list[tuple[Node, Transition]] = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt, t in it:
                if nxt not in visited:
                    visited.add(nxt)
                    trail.append((node, t))
                    stack.append((nxt, iter(product.successors(nxt))))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if product.accepting(node):
                cycle = inner(node)
                if cycle is not None:
                    return _lasso_from(trail, cycle), len(visited)
            if trail:
                trail.pop()
    return None, len(visited)


def scc_emptiness(product: Product) -> tuple[bool, int]:
    """True when no reachable nontrivial SCC holds an accepting node."""
    nodes, edges = product.explore()
    g = nx.DiGraph()
    g.add_nodes_from(nodes)
    g.add_edges_from((u, v) for u, v, _ in edges)
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1:
            (v,) = comp
            if not g.has_edge(v, v):
                continue
        if any(product.accepting(n) for n in comp):
            return False, len(nodes)
    return True, len(nodes)


def _state_of(node: Node) -> int:
    return node[0]


def fair_accepting_lasso(product: Product, fairness: Sequence) -> tuple[Lasso | None, int]:
    """An accepting product lasso whose projection is a computation, if any."""
    nodes, edges = product.explore()
    comps = fair_sccs(edges, fairness, _state_of, nodes)
    for comp in sorted(comps, key=lambda c: min(c)):
        acc = sorted(n for n in comp if product.accepting(n))
        if not acc:
            continue
        anchor = acc[0]
        cyc = fair_cycle(comp, edges, fairness, anchor, _state_of)
        prefix = _path_to(product, anchor)
        return _lasso_from(prefix, [(u, t) for u, _, t in cyc]), len(nodes)
    return None, len(nodes)


def _path_to(product: Product, goal: Node) -> list[tuple[Node, Transition]]:
    parent: dict[Node, tuple[Node, Transition] | None] = {n: None for n in product.initial()}
    order = list(parent)
    i = 0
    while goal not in parent:
        u = order[i]
        i += 1
        for v, t in product.successors(u):
            if v not in parent:
                parent[v] = (u, t)
                order.append(v)
    path = []
    cur = goal
    while parent[cur] is not None:
        u, t = parent[cur]
        path.append((u, t))
        cur = u
    return path[::-1]


# -- verification entry points -----------------------------------------------------------


def _automaton(negated: Expr, budget: int | None) -> BuchiAutomaton:
    return ltl_to_buchi(negated, "intermediate", budget)


def verify_global(ts: TransitionSystem, formula: Expr, node_budget: int | None = None,
                  cross_check: bool = False) -> Verdict:
    """Does every execution from an initial state satisfy ``formula``?"""
    check_atoms(ts, formula)
    start = time.perf_counter()
    b = _automaton(Not(formula), node_budget)
    product = Product(ts, b)
    lasso, explored = nested_dfs(product)
    stats = {"automaton_states": b.n_states, "product_states": explored, "emptiness": "nested-dfs"}
    if cross_check:
        empty, size = scc_emptiness(product)
        if empty != (lasso is None):
            raise AssertionError("emptiness procedures disagree")
        stats["product_size"] = size
    stats["wall_time"] = time.perf_counter() - start
    return Verdict(lasso is None, lasso, stats)


def verify_algorithmic(fts: FairTransitionSystem, formula: Expr) -> Verdict:
    """Fairness as an acceptance condition on the product graph."""
    check_atoms(fts.ts, formula)
    start = time.perf_counter()
    b = _automaton(Not(formula), None)
    product = Product(fts.ts, b)
    lasso, size = fair_accepting_lasso(product, fts.fairness)
    stats = {"automaton_states": b.n_states, "product_states": size, "product_size": size,
             "fairness_mode": ALGORITHMIC, "wall_time": time.perf_counter() - start}
    return Verdict(lasso is None, lasso, stats)


def verify_under_fairness(fts: FairTransitionSystem, formula: Expr, mode: str = AUTO,
                          node_budget: int = DEFAULT_NODE_BUDGET,
                          fairness: Expr | None = None) -> Verdict:
    """Does every computation satisfy ``formula``?

    In formula mode the fairness formula (or the replacement passed as
    ``fairness``) becomes the antecedent of the property.  Auto mode tries
    that first and switches to the algorithmic treatment when the
    automaton outgrows ``node_budget``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown fairness mode {mode!r}")
    if mode == ALGORITHMIC:
        return verify_algorithmic(fts, formula)
    f = fairness_formula(fts) if fairness is None else fairness
    wrapped = formula if isinstance(f, TrueE) else Implies(f, formula)
    try:
        v = verify_global(fts.ts, wrapped, node_budget if mode == AUTO else None)
    except TranslationBudgetExceeded:
        v = verify_algorithmic(fts, formula)
        return Verdict(v.holds, v.counterexample, {**v.stats, "fallback": True})
    return Verdict(v.holds, v.counterexample, {**v.stats, "fairness_mode": FORMULA, "fallback": False})


# -- brute-force oracle ------------------------------------------------------------------------


def _primitive(cycle: Sequence[Step]) -> bool:
    n = len(cycle)
    for d in range(1, n):
        if n % d == 0 and all(cycle[i] == cycle[i % d] for i in range(n)):
            return False
    return True


def enumerate_lassos(ts: TransitionSystem, bound: int,
                     starts: Iterable[int] | None = None) -> Iterator[Lasso]:
    """Every lasso with ``|prefix| + |cycle| <= bound``, each path once.

    Walks from the start states are extended step by step; whenever the
    walk returns to a state it visited, the closed part is a candidate
    cycle.  A path is produced only in its canonical form: the cycle is
    not a power of a shorter cycle and the prefix cannot be shortened by
    rotating the cycle.
    """
    starts = sorted(ts.initial if starts is None else starts)
    steps: list[Step] = []
    states: list[int] = []

    def extend(s: int) -> Iterator[Lasso]:
        k = len(steps)
        for j in range(k):
            if states[j] != s:
                continue
            cycle = steps[j:]
            if j > 0 and steps[j - 1] == steps[-1]:
                continue
            if _primitive(cycle):
                yield Lasso(tuple(steps[:j]), tuple(cycle))
        if k == bound:
            return
        states.append(s)
        for t in ts.out[s]:
            steps.append(Step(s, t.action))
            yield from extend(t.dst)
            steps.pop()
        states.pop()

    for s in starts:
        yield from extend(s)


def oracle_check(system: TransitionSystem | FairTransitionSystem, formula: Expr, bound: int = 10,
                 fair: bool = True, max_lassos: int = 2_000_000) -> Verdict:
    """Evaluate ``formula`` on every (fair) lasso up to the bound."""
    fts = system if isinstance(system, FairTransitionSystem) else None
    ts = system.ts if fts is not None else system
    check_atoms(ts, formula)
    start = time.perf_counter()
    cache: dict[tuple, bool] = {}
    count = 0
    for lasso in enumerate_lassos(ts, bound):
        count += 1
        if count > max_lassos:
            raise OracleBudgetExceeded(f"more than {max_lassos} lassos within bound {bound}")
        if fair and fts is not None and not is_computation(fts, lasso):
            continue
        key = (tuple(ts.labels[s] for s, _ in lasso.prefix), tuple(ts.labels[s] for s, _ in lasso.cycle))
        ok = cache.get(key)
        if ok is None:
            ok = cache[key] = eval_word(formula, [ts.valuation(s) for s, _ in lasso.prefix],
                                        [ts.valuation(s) for s, _ in lasso.cycle])
        if not ok:
            return Verdict(False, lasso, {"lassos": count, "bound": bound,
                                          "wall_time": time.perf_counter() - start})
    return Verdict(True, None, {"lassos": count, "bound": bound, "wall_time": time.perf_counter() - start})


def replacement_fairness_ok(fts: FairTransitionSystem, replacement: Expr, bound: int = 10) -> bool:
    """Is a hand-simplified fairness formula true on exactly the computations?

    Checked on every lasso up to ``bound``.
    """
    for lasso in enumerate_lassos(fts.ts, bound):
        word = ([fts.ts.valuation(s) for s, _ in lasso.prefix], [fts.ts.valuation(s) for s, _ in lasso.cycle])
        if eval_word(replacement, *word) != is_computation(fts, lasso):
            return False
    return True


# -- verification by parts ---------------------------------------------------------------------

HOLDS, INCONCLUSIVE = "holds", "inconclusive"


@dataclass(frozen=True)
class PartResult:
    part: Part
    relevant: tuple[int, ...]
    verdict: Verdict

    @property
    def holds(self) -> bool:
        return self.verdict.holds


@dataclass(frozen=True)
class PartitionedReport:
    results: tuple[PartResult, ...]
    abmod: AbmodVerdict
    refinement: RefinementVerdict | None = None

    @property
    def aggregate(self) -> str:
        return HOLDS if all(r.holds for r in self.results) else INCONCLUSIVE

    @property
    def precondition_met(self) -> bool:
        return self.abmod.member

    @property
    def failing(self) -> tuple[str, ...]:
        return tuple(r.part.name for r in self.results if not r.holds)

    def result(self, name: str) -> PartResult:
        for r in self.results:
            if r.part.name == name:
                return r
        raise KeyError(name)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def verify_part(part: Part, fts2: FairTransitionSystem, formula: Expr, mode: str = AUTO,
                relevant: Sequence[int] | None = None, node_budget: int = DEFAULT_NODE_BUDGET) -> PartResult:
    """Check ``(relevant fairness) => formula`` on one part."""
    if relevant is None:
        relevant = simplify_fairness_for_part(part.ts, fts2)
    relevant = tuple(relevant)
    if mode == ALGORITHMIC:
        verdict = verify_algorithmic(part.fts(fts2, relevant), formula)
    else:
        f = fairness_formula(fts2, relevant)
        wrapped = formula if isinstance(f, TrueE) else Implies(f, formula)
        try:
            verdict = verify_global(part.ts, wrapped, node_budget if mode == AUTO else None)
        except TranslationBudgetExceeded:
            v = verify_algorithmic(part.fts(fts2, relevant), formula)
            verdict = Verdict(v.holds, v.counterexample, {**v.stats, "fallback": True})
    return PartResult(part, relevant, verdict)


def verify_by_parts(fts1: FairTransitionSystem, fts2: FairTransitionSystem, gluing: GluingMap | Expr,
                    formula: Expr, mode: str = AUTO, workers: int | None = None,
                    strict_initial: bool = False, node_budget: int = DEFAULT_NODE_BUDGET) -> PartitionedReport:
    """Verify ``f => formula`` on every refinement-based part.

    Refuses to run when the refinement or the refined fairness constraints
    are not well formed.  When the negated property's automaton is outside
    ABmod, the report still comes back but ``precondition_met`` is false
    and the aggregate is advisory only.
    """
    check_atoms(fts2.ts, formula)
    mu = gluing if isinstance(gluing, GluingMap) else derive_mu(fts1, fts2, gluing)
    refinement = check_refinement(fts1, fts2, mu)
    if not refinement.passed:
        raise RefinementRefused("the refinement does not hold: clauses " + ", ".join(refinement.failed),
                                refinement)
    broken = validate_fairness(fts2)
    if broken:
        raise RefinementRefused(f"refined fairness constraint is ill-formed: {broken[0].message}")
    abmod, _ = classify_formula(Not(formula), fts2.ts.domains)
    parts = refinement_parts(fts2, mu, fts1, refinement, strict_initial)
    jobs = [lambda p=p: verify_part(p, fts2, formula, mode, None, node_budget) for p in parts]
    results = _run(jobs, workers if workers is not None else default_workers())
    return PartitionedReport(tuple(results), abmod, refinement)


@dataclass(frozen=True)
class NaiveReport:
    global_verdict: Verdict
    results: tuple[PartResult, ...]

    @property
    def parts_hold(self) -> bool:
        return all(r.holds for r in self.results)

    @property
    def paradox(self) -> bool:
        """The property fails globally while every part satisfies it."""
        return not self.global_verdict.holds and self.parts_hold


def demonstrate_naive_unsoundness(fts2: FairTransitionSystem, assignment: Mapping[Transition, Hashable] | None,
                                  formula: Expr, fairness: Expr | None = None, mode: str = AUTO,
                                  workers: int | None = None,
                                  parts: Sequence[Part] | None = None) -> NaiveReport:
    """Check ``f => formula`` globally and on the blocks of a transition partition.

    ``parts`` replaces the blocks by ready-made parts (for instance the
    refinement-based ones), checked in exactly the same way.
    """
    global_verdict = verify_under_fairness(fts2, formula, mode)
    f = fairness_formula(fts2) if fairness is None else fairness
    wrapped = formula if isinstance(f, TrueE) else Implies(f, formula)
    if parts is None:
        if assignment is None:
            raise ValueError("either a transition assignment or parts are required")
        parts = naive_parts(fts2.ts, assignment)
    every = tuple(range(len(fts2.fairness)))
    jobs = [lambda p=p: PartResult(p, every, verify_global(p.ts, wrapped)) for p in parts]
    results = _run(jobs, workers if workers is not None else default_workers())
    return NaiveReport(global_verdict, tuple(results))


@dataclass(frozen=True)
class TableRow:
    name: str
    globally_true: bool
    by_parts: bool
    failing_parts: tuple[str, ...]


def property_table(fts1: FairTransitionSystem, fts2: FairTransitionSystem, gluing: GluingMap | Expr,
                   properties: Mapping[str, Expr], mode: str = AUTO,
                   workers: int | None = None) -> list[TableRow]:
    """Global and by-parts verdicts of several properties of one refinement."""
    rows = []
    for name, formula in properties.items():
        g = verify_under_fairness(fts2, formula, mode)
        report = verify_by_parts(fts1, fts2, gluing, formula, mode, workers)
        rows.append(TableRow(name, g.holds, report.aggregate == HOLDS, report.failing))
    return rows


def format_table(rows: Sequence[TableRow]) -> str:
    """Counts per column, then one line per property."""
    true = sum(r.globally_true for r in rows)
    parts = sum(r.by_parts for r in rows)
    lines = [f"{'Properties':<12}{'Globally true':>15}{'Globally false':>16}{'Verified by parts':>19}",
             f"{len(rows):<12}{true:>15}{len(rows) - true:>16}{parts:>19}", ""]
    for r in rows:
        failing = f" (fails on {', '.join(r.failing_parts)})" if r.failing_parts else ""
        lines.append(f"{r.name:<12}{'true' if r.globally_true else 'false':>15}"
                     f"{'' if r.globally_true else 'x':>16}{'yes' if r.by_parts else 'no':>19}{failing}")
    return "\n".join(lines)


__all__ = [
    "ALGORITHMIC", "AUTO", "DEFAULT_NODE_BUDGET", "FORMULA", "HOLDS", "INCONCLUSIVE", "MODES",
    "NaiveReport", "OracleBudgetExceeded", "PartResult", "PartitionedReport", "Product", "TableRow",
    "UnknownVariable", "Verdict", "WORKERS_ENV", "check_atoms", "default_workers",
    "demonstrate_naive_unsoundness", "enumerate_lassos", "fair_accepting_lasso", "format_table", "nested_dfs",
    "oracle_check", "property_table", "replacement_fairness_ok", "scc_emptiness", "verify_algorithmic",
    "verify_by_parts", "verify_global", "verify_part", "verify_under_fairness",
]
