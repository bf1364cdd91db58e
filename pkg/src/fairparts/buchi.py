"""Büchi automata over state propositions and the ABmod class.

Transitions carry guards; a run ``q0 -p0-> q1 -p1-> ...`` reads a state
sequence ``s0 s1 ...`` when ``s_i`` satisfies ``p_i``.  The translation
from PLTL is a tableau construction in the style of Gerth, Peled, Vardi
and Wolper, followed by degeneralization and a bisimulation quotient.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .core import Lasso, TransitionSystem
from .logic import (TRUE, And, Expr, FalseE, Or, Release, TrueE, Until, Next, Value,
                    conj, holds, implies_prop, is_propositional, is_satisfiable,
                    is_valid, to_text)
from .pltl import formula_text, nnf, rewrite_nnf


@lru_cache(maxsize=65536)
def _key(e: Expr) -> str:
    return to_text(e)


@dataclass(frozen=True)
class BuchiTransition:
    src: int
    guard: Expr
    dst: int


@dataclass(frozen=True)
class BuchiAutomaton:
    n_states: int
    initial: int
    transitions: tuple[BuchiTransition, ...]
    accepting: frozenset[int]
    names: tuple[str, ...] | None = None

    @cached_property
    def out(self) -> tuple[tuple[BuchiTransition, ...], ...]:
        buckets: list[list[BuchiTransition]] = [[] for _ in range(self.n_states)]
        for t in self.transitions:
            buckets[t.src].append(t)
        return tuple(tuple(b) for b in buckets)

    @property
    def states(self) -> range:
        return range(self.n_states)

    def name(self, q: int) -> str:
        return self.names[q] if self.names else f"q{q}"

    def relabel(self, perm: Sequence[int]) -> BuchiAutomaton:
        """Rename state ``q`` to ``perm[q]``."""
        inv = {perm[q]: q for q in self.states}
        trans = tuple(BuchiTransition(perm[t.src], t.guard, perm[t.dst]) for t in self.transitions)
        names = tuple(self.name(inv[q]) for q in range(self.n_states))
        return BuchiAutomaton(self.n_states, perm[self.initial], trans,
                              frozenset(perm[q] for q in self.accepting), names)

    def to_dot(self, title: str = "B") -> str:
        lines = [f'digraph "{title}" {{', "  rankdir=LR;", '  init [shape=point];']
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  {q} [label="{self.name(q)}", shape={shape}];')
        lines.append(f"  init -> {self.initial};")
        for t in sorted(self.transitions, key=lambda t: (t.src, t.dst, _key(t.guard))):
            guard = formula_text(t.guard).replace('"', '\\"')
            lines.append(f'  {t.src} -> {t.dst} [label="{guard}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# -- tableau ----------------------------------------------------------------------


@dataclass
class _Node:
    incoming: set[int]
    new: list[Expr]
    old: set[Expr]
    nxt: set[Expr]
    props: frozenset[Expr] = frozenset()


_INIT = -1


@lru_cache(maxsize=65536)
def _consistent(props: frozenset[Expr]) -> bool:
    props = frozenset(p for p in props if not isinstance(p, TrueE))
    if not props:
        return True
    return is_satisfiable(conj(sorted(props, key=_key)))


class TranslationBudgetExceeded(RuntimeError):
    """The tableau grew beyond the allowed number of nodes."""


_Expansion = tuple  # (literals, next obligations, pending untils)


def _expand(obligations: frozenset[Expr], untils: set[Expr]) -> list[_Expansion]:
    """All consistent ways to satisfy ``obligations`` at one position.

    Each way is a set of literals to hold now, the obligations passed to
    the next position, and the untils left pending (promised but whose
    right side is not yet satisfied).
    """
    out: dict[_Expansion, None] = {}
    stack = [_Node(set(), sorted(obligations, key=_key), set(), set())]
    while stack:
        node = stack.pop()
        if not node.new:
            pending = frozenset(g for g in node.old if isinstance(g, Until) and g.right not in node.old)
            out[(node.props, frozenset(node.nxt), pending)] = None
            continue
        f = node.new.pop()
        if f in node.old:
            stack.append(node)
            continue
        if is_propositional(f):
            if isinstance(f, FalseE):
                continue
            props = node.props | {f}
            if not _consistent(props):
                continue
            node.old.add(f)
            node.props = props
            stack.append(node)
            continue
        if isinstance(f, And):
            node.old.add(f)
            node.new.extend(g for g in (f.left, f.right) if g not in node.old)
            stack.append(node)
            continue
        if isinstance(f, Next):
            node.old.add(f)
            node.nxt.add(f.operand)
            stack.append(node)
            continue
        if isinstance(f, (Or, Until, Release)):
            if isinstance(f, Until):
                untils.add(f)
                first, first_next, second = [f.left], {f}, [f.right]
            elif isinstance(f, Release):
                first, first_next, second = [f.right], {f}, [f.left, f.right]
            else:
                first, first_next, second = [f.left], set(), [f.right]
            n1 = _Node(set(), node.new + [g for g in first if g not in node.old],
                       node.old | {f}, node.nxt | first_next, node.props)
            n2 = _Node(set(), node.new + [g for g in second if g not in node.old],
                       node.old | {f}, set(node.nxt), node.props)
            stack.append(n2)
            stack.append(n1)
            continue
        raise TypeError(f"unexpected operator in {to_text(f)}")
    return list(out)


def _guard(props: frozenset[Expr]) -> Expr:
    lits = sorted({p for p in props if not isinstance(p, TrueE)}, key=_key)
    return conj(lits) if lits else TRUE


def _disjoin(guards: Iterable[Expr]) -> Expr:
    gs = sorted(set(guards), key=_key)
    if any(isinstance(g, TrueE) for g in gs):
        return TRUE
    out = gs[0]
    for g in gs[1:]:
        out = Or(out, g)
    return out


def ltl_to_gba(formula: Expr, max_nodes: int | None = None) -> tuple[BuchiAutomaton, list[frozenset[int]]]:
    """Generalized automaton: state 0 is the initial pseudo-state.

    Every other state is a pair (obligations, pending untils) produced by a
    tableau expansion in the style of Gerth, Peled, Vardi and Wolper.  Its
    successors depend only on the obligations, so each obligation set is
    expanded once; the guard of an edge is the disjunction of the literal
    sets under which the expansion reaches the target.
    """
    untils: set[Expr] = set()
    index: dict[tuple[frozenset[Expr], frozenset[Expr]], int] = {}
    order: list[tuple[frozenset[Expr], frozenset[Expr]]] = []
    cache: dict[frozenset[Expr], list[_Expansion]] = {}
    trans: list[BuchiTransition] = []
    todo = [(0, frozenset([rewrite_nnf(nnf(formula))]))]
    while todo:
        src, obligations = todo.pop()
        exps = cache.get(obligations)
        if exps is None:
            exps = cache[obligations] = _expand(obligations, untils)
        guards: dict[int, list[Expr]] = {}
        for props, nxt, pending in exps:
            key = (nxt, pending)
            dst = index.get(key)
            if dst is None:
                if max_nodes is not None and len(order) >= max_nodes:
                    raise TranslationBudgetExceeded(f"more than {max_nodes} tableau nodes")
                dst = index[key] = len(order) + 1
                order.append(key)
                todo.append((dst, nxt))
            guards.setdefault(dst, []).append(_guard(props))
        for dst in sorted(guards):
            trans.append(BuchiTransition(src, _disjoin(guards[dst]), dst))
    ordered = sorted(untils, key=_key)
    sets = [frozenset(i + 1 for i, (_, pending) in enumerate(order) if u not in pending) for u in ordered]
    n = len(order) + 1
    names = ("init",) + tuple(f"n{m}" for m in range(len(order)))
    acc = frozenset(range(1, n)) if not sets else frozenset()
    return BuchiAutomaton(n, 0, tuple(trans), acc, names), sets


def degeneralize(gba: BuchiAutomaton, sets: list[frozenset[int]]) -> BuchiAutomaton:
    """Counter construction with jumps.

    The counter records how many acceptance sets, in order, the current
    round has visited; entering a state moves it past every consecutive set
    that state belongs to.  States whose counter is full are accepting, and
    the round restarts on the next step.
    """
    if not sets:
        return gba
    k = len(sets)

    def advance(q: int, c: int) -> int:
        while c < k and q in sets[c]:
            c += 1
        return c

    start = (gba.initial, 0)
    index: dict[tuple[int, int], int] = {start: 0}
    order = [start]
    trans = []
    i = 0
    while i < len(order):
        q, c = order[i]
        base = 0 if c == k else c
        for t in gba.out[q]:
            key = (t.dst, advance(t.dst, base))
            if key not in index:
                index[key] = len(order)
                order.append(key)
            trans.append(BuchiTransition(i, t.guard, index[key]))
        i += 1
    acc = frozenset(index[(q, c)] for (q, c) in order if c == k)
    names = tuple(f"{gba.name(q)}.{c}" for q, c in order)
    return BuchiAutomaton(len(order), 0, tuple(trans), acc, names)


def prune_generalized(gba: BuchiAutomaton, sets: list[frozenset[int]]
                      ) -> tuple[BuchiAutomaton, list[frozenset[int]]]:
    """Keep the states that can reach a cycle meeting every acceptance set."""
    g = nx.DiGraph()
    g.add_nodes_from(gba.states)
    g.add_edges_from((t.src, t.dst) for t in gba.transitions if not isinstance(t.guard, FalseE))
    reach = nx.descendants(g, gba.initial) | {gba.initial}
    sub = g.subgraph(reach)
    good: set[int] = set()
    for comp in nx.strongly_connected_components(sub):
        nontrivial = len(comp) > 1 or any(sub.has_edge(v, v) for v in comp)
        if nontrivial and all(comp & f for f in sets) and (sets or comp & gba.accepting):
            good |= comp
    live = _backward(sub, good)
    keep = sorted(live | {gba.initial})
    keep = [gba.initial] + [q for q in keep if q != gba.initial]
    idx = {q: i for i, q in enumerate(keep)}
    return _restrict(gba, keep, live), [frozenset(idx[q] for q in f if q in idx) for f in sets]


def _backward(g: nx.DiGraph, targets: set[int]) -> set[int]:
    seen = set(targets)
    stack = list(targets)
    while stack:
        v = stack.pop()
        for u in g.predecessors(v):
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def prune(b: BuchiAutomaton) -> BuchiAutomaton:
    """Drop unreachable states and states from which no accepting cycle is reachable."""
    g = nx.DiGraph()
    g.add_nodes_from(b.states)
    g.add_edges_from((t.src, t.dst) for t in b.transitions if not isinstance(t.guard, FalseE))
    reach = nx.descendants(g, b.initial) | {b.initial}
    sub = g.subgraph(reach)
    good: set[int] = set()
    for comp in nx.strongly_connected_components(sub):
        nontrivial = len(comp) > 1 or any(sub.has_edge(v, v) for v in comp)
        if nontrivial and comp & b.accepting:
            good |= comp
    live = _backward(sub, good)
    keep = sorted(live | {b.initial})
    return _restrict(b, keep, live)


def _restrict(b: BuchiAutomaton, keep: Sequence[int], live: set[int]) -> BuchiAutomaton:
    # The initial state always comes first.
    keep = [b.initial] + [q for q in keep if q != b.initial]
    idx = {q: i for i, q in enumerate(keep)}
    trans = tuple(BuchiTransition(idx[t.src], t.guard, idx[t.dst]) for t in b.transitions
                  if t.src in idx and t.dst in idx and t.src in live and t.dst in live
                  and not isinstance(t.guard, FalseE))
    return BuchiAutomaton(len(keep), 0, trans, frozenset(idx[q] for q in b.accepting if q in idx),
                          tuple(b.name(q) for q in keep))


def transient_states(b: BuchiAutomaton) -> frozenset[int]:
    """States lying on no cycle: their acceptance mark never matters."""
    g = nx.DiGraph()
    g.add_nodes_from(b.states)
    g.add_edges_from((t.src, t.dst) for t in b.transitions)
    cyclic: set[int] = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(v, v) for v in comp):
            cyclic |= comp
    return frozenset(set(b.states) - cyclic)


def mark_transients(b: BuchiAutomaton, policy: str = "intermediate") -> BuchiAutomaton:
    """Choose acceptance marks for transient states (language is unchanged).

    ``intermediate``: direct successors of the initial state are
    non-accepting, later transient states accepting.  ``accepting`` and
    ``rejecting`` mark all transient states uniformly.
    """
    trans = transient_states(b)
    first = {t.dst for t in b.out[b.initial]} - {b.initial}
    acc = set(b.accepting) - set(trans)
    for q in trans:
        if policy == "accepting" or (policy == "intermediate" and q not in first and q != b.initial):
            acc.add(q)
    return BuchiAutomaton(b.n_states, b.initial, b.transitions, frozenset(acc), b.names)


def bisimulation_quotient(b: BuchiAutomaton) -> BuchiAutomaton:
    """Merge states with equal acceptance and equal (guard, successor class) sets."""
    block = {q: int(q in b.accepting) for q in b.states}
    while True:
        sigs: dict[int, tuple] = {}
        for q in b.states:
            moves = frozenset((t.guard, block[t.dst]) for t in b.out[q])
            sigs[q] = (block[q], moves)
        ids: dict[tuple, int] = {}
        new = {}
        for q in sorted(b.states, key=lambda q: (q != b.initial, q)):
            new[q] = ids.setdefault(sigs[q], len(ids))
        if len(ids) == len(set(block.values())):
            block = new
            break
        block = new
    n = len(set(block.values()))
    trans = tuple(dict.fromkeys(BuchiTransition(block[t.src], t.guard, block[t.dst])
                                for t in b.transitions))
    rep: dict[int, int] = {}
    for q in sorted(b.states):
        rep.setdefault(block[q], q)
    names = tuple(b.name(rep[c]) for c in range(n))
    return BuchiAutomaton(n, block[b.initial], trans,
                          frozenset(block[q] for q in b.accepting), names)


@lru_cache(maxsize=512)
def ltl_to_buchi(formula: Expr, transient_policy: str = "intermediate",
                 max_nodes: int | None = None) -> BuchiAutomaton:
    """Plain Büchi automaton accepting exactly the words satisfying ``formula``."""
    gba, sets = prune_generalized(*ltl_to_gba(formula, max_nodes))
    b = prune(degeneralize(gba, sets))
    b = mark_transients(b, transient_policy)
    b = prune(bisimulation_quotient(b))
    return _renumber_bfs(b)


def _renumber_bfs(b: BuchiAutomaton) -> BuchiAutomaton:
    order = [b.initial]
    seen = {b.initial}
    i = 0
    while i < len(order):
        for t in sorted(b.out[order[i]], key=lambda t: (_key(t.guard), t.dst)):
            if t.dst not in seen:
                seen.add(t.dst)
                order.append(t.dst)
        i += 1
    order += [q for q in b.states if q not in seen]
    perm = [0] * b.n_states
    for new, old in enumerate(order):
        perm[old] = new
    relabelled = b.relabel(perm)
    return BuchiAutomaton(relabelled.n_states, relabelled.initial, relabelled.transitions,
                          relabelled.accepting, tuple(f"q{i}" for i in range(b.n_states)))


# -- acceptance of lassos -------------------------------------------------------------


def accepts_word(b: BuchiAutomaton, prefix: Sequence[Mapping[str, Value]],
                 cycle: Sequence[Mapping[str, Value]]) -> bool:
    """Is there an accepting run over ``prefix · cycle^ω``?"""
    vals = list(prefix) + list(cycle)
    n, p = len(vals), len(prefix)
    g = nx.DiGraph()
    start = (0, b.initial)
    g.add_node(start)
    todo = [start]
    seen = {start}
    while todo:
        i, q = todo.pop()
        j = i + 1 if i + 1 < n else p
        for t in b.out[q]:
            if holds(t.guard, vals[i]):
                nxt = (j, t.dst)
                g.add_edge((i, q), nxt)
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
    for comp in nx.strongly_connected_components(g):
        nontrivial = len(comp) > 1 or any(g.has_edge(v, v) for v in comp)
        if nontrivial and any(q in b.accepting for _, q in comp):
            return True
    return False


def accepts(b: BuchiAutomaton, lasso: Lasso, ts: TransitionSystem) -> bool:
    return accepts_word(b, [ts.valuation(s) for s, _ in lasso.prefix],
                        [ts.valuation(s) for s, _ in lasso.cycle])


# -- the ABmod class ---------------------------------------------------------------------


@dataclass(frozen=True)
class AbmodVerdict:
    member: bool
    clause: int | None = None
    witness: tuple[str, ...] = ()
    reason: str = ""
    hint: str = ""

    def __str__(self) -> str:
        if self.member:
            return "IN-ABmod"
        text = f"NOT-IN-ABmod (clause {self.clause}: {self.reason})"
        if self.witness:
            text += " witness: " + " ".join(self.witness)
        return text


def _successors_plus(b: BuchiAutomaton, start: Iterable[int]) -> dict[int, tuple[int, ...]]:
    """States reachable in one or more steps, each with a witness path."""
    paths: dict[int, tuple[int, ...]] = {}
    frontier = []
    for s in start:
        for t in b.out[s]:
            if t.dst not in paths:
                paths[t.dst] = (s, t.dst)
                frontier.append(t.dst)
    while frontier:
        q = frontier.pop()
        for t in b.out[q]:
            if t.dst not in paths:
                paths[t.dst] = paths[q] + (t.dst,)
                frontier.append(t.dst)
    return paths


def classify_abmod(b: BuchiAutomaton, domains: Mapping[str, Iterable[Value]] | None = None) -> AbmodVerdict:
    """Structural decision of ABmod membership.

    1. the initial state has a self-loop whose guard is valid;
    2. every state reachable (in one or more steps) from a non-initial
       successor of the initial state is accepting;
    3. every transition into an accepting state is followed by a transition
       whose guard is implied by the entering guard.
    """
    q0 = b.initial
    loops = [t for t in b.out[q0] if t.dst == q0 and is_valid(t.guard, domains)]
    if not loops:
        return AbmodVerdict(False, 1, (b.name(q0),), "no valid self-loop on the initial state")
    first = {t.dst for t in b.out[q0]} - {q0}
    later = _successors_plus(b, first)
    for q, path in sorted(later.items()):
        if q not in b.accepting:
            return AbmodVerdict(False, 2, tuple(b.name(x) for x in (q0,) + path),
                                f"non-accepting state {b.name(q)} reached after leaving the initial state")
    for t in b.transitions:
        if t.dst in b.accepting:
            if not any(implies_prop(t.guard, u.guard, domains) for u in b.out[t.dst]):
                return AbmodVerdict(False, 3, (b.name(t.src), b.name(t.dst)),
                                    f"guard {formula_text(t.guard)} into {b.name(t.dst)} implies no outgoing guard")
    return AbmodVerdict(True)


def clause2_by_runs(b: BuchiAutomaton) -> bool:
    """Direct check of the run condition, independent of the structural test.

    A run stays in the initial state for ``k > 0`` steps, then may visit one
    arbitrary state, and must be accepting from then on.  Configurations
    (state, phase) are explored exhaustively, which covers every run prefix
    of length up to ``2 * |states|``.
    """
    q0 = b.initial
    start = (q0, 0)  # phase 0: still in q0; 1: first state after leaving; 2: later
    seen = {start}
    stack = [start]
    while stack:
        q, phase = stack.pop()
        if phase == 2 and q not in b.accepting:
            return False
        for t in b.out[q]:
            if phase == 0:
                nxt = (q0, 0) if t.dst == q0 else (t.dst, 1)
            else:
                nxt = (t.dst, 2)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return True


def classify_formula(formula: Expr, domains: Mapping[str, Iterable[Value]] | None = None
                     ) -> tuple[AbmodVerdict, BuchiAutomaton]:
    """ABmod membership of the automaton of ``formula`` (usually a negated property).

    Membership is a property of an automaton, not of a language, so the
    acceptance marks of transient states (which never change the language)
    are tried under each policy and the first conforming automaton is kept.
    """
    first = None
    for policy in ("intermediate", "accepting", "rejecting"):
        b = ltl_to_buchi(formula, policy)
        v = classify_abmod(b, domains)
        if v.member:
            return v, b
        if first is None:
            first = (v, b)
    v, b = first
    hint = "membership is syntactic; the verdict concerns this translation of the formula"
    return AbmodVerdict(v.member, v.clause, v.witness, v.reason, hint), b


__all__ = [
    "AbmodVerdict", "BuchiAutomaton", "BuchiTransition", "TranslationBudgetExceeded", "accepts", "accepts_word",
    "bisimulation_quotient", "classify_abmod", "classify_formula", "clause2_by_runs",
    "degeneralize", "implies_prop", "prune_generalized", "ltl_to_buchi", "ltl_to_gba", "mark_transients", "prune",
    "transient_states",
]
