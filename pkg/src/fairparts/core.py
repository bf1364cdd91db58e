"""Finite labelled transition systems with fairness constraint sets.

States are dense integers ``0..n-1``; each state carries a valuation of
the system variables (its label).  A transition is a ``(src, action,
dst)`` triple.  Fairness constraints are sets of transitions sharing one
action; a computation is a lasso whose cycle takes some transition of
every constraint whose source states it visits.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import networkx as nx

from .logic import Expr, Value, valuation_prop

SKIP = "Skip"
TAU = "tau"
FORMAT_TAG = "fairparts-ts/1"


class Transition(NamedTuple):
    src: int
    action: str
    dst: int


class Step(NamedTuple):
    """One position of a lasso: the state and the action taken from it."""

    state: int
    action: str


Cycle = tuple[Transition, ...]


class ModelError(ValueError):
    """Malformed transition system or lasso."""


@dataclass(frozen=True)
class TransitionSystem:
    variables: tuple[str, ...]
    domains: Mapping[str, tuple[Value, ...]]
    labels: tuple[tuple[Value, ...], ...]
    initial: frozenset[int]
    transitions: tuple[Transition, ...]
    actions: frozenset[str] = frozenset()
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        acts = set(self.actions) | {t.action for t in self.transitions}
        object.__setattr__(self, "actions", frozenset(acts))
        object.__setattr__(self, "initial", frozenset(self.initial))
        n = len(self.labels)
        for lab in self.labels:
            if len(lab) != len(self.variables):
                raise ModelError(f"label {lab!r} does not bind every variable once")
            for var, val in zip(self.variables, lab):
                dom = self.domains.get(var)
                if dom is not None and val not in dom:
                    raise ModelError(f"value {val!r} outside the domain of {var}")
        for t in self.transitions:
            if not (0 <= t.src < n and 0 <= t.dst < n):
                raise ModelError(f"transition {t} references an unknown state")
        if not self.initial:
            raise ModelError("a transition system needs at least one initial state")
        if not all(0 <= s < n for s in self.initial):
            raise ModelError("initial state outside the state set")
        if self.names is not None and len(self.names) != n:
            raise ModelError("one name per state is required")

    # -- basic accessors ------------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.labels)

    @property
    def states(self) -> range:
        return range(len(self.labels))

    def name(self, s: int) -> str:
        return self.names[s] if self.names is not None else f"s{s}"

    def valuation(self, s: int) -> dict[str, Value]:
        return dict(zip(self.variables, self.labels[s]))

    def label_prop(self, s: int) -> Expr:
        """Conjunction of all atoms of the state label."""
        return valuation_prop(self.valuation(s), self.variables)

    @cached_property
    def transition_set(self) -> frozenset[Transition]:
        return frozenset(self.transitions)

    @cached_property
    def out(self) -> tuple[tuple[Transition, ...], ...]:
        buckets: list[list[Transition]] = [[] for _ in self.states]
        for t in self.transitions:
            buckets[t.src].append(t)
        return tuple(tuple(b) for b in buckets)

    @cached_property
    def state_of_label(self) -> dict[tuple[Value, ...], int]:
        return {lab: s for s, lab in enumerate(self.labels)}

    def successors(self, s: int) -> Iterator[int]:
        return (t.dst for t in self.out[s])

    def is_total(self) -> bool:
        return all(self.out[s] for s in self.states)

    def graph(self, transitions: Iterable[Transition] | None = None) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.states)
        g.add_edges_from((t.src, t.dst) for t in (self.transitions if transitions is None else transitions))
        return g

    def reachable(self, sources: Iterable[int] | None = None,
                  allowed: Iterable[Transition] | None = None) -> frozenset[int]:
        start = self.initial if sources is None else sources
        return reach(start, self.out if allowed is None else adjacency(self.n_states, allowed))

    def with_transitions(self, transitions: Iterable[Transition],
                         actions: Iterable[str] | None = None) -> TransitionSystem:
        transitions = tuple(transitions)
        return TransitionSystem(self.variables, self.domains, self.labels, self.initial, transitions,
                                frozenset(actions) if actions is not None else frozenset(),
                                self.names)


def adjacency(n: int, transitions: Iterable[Transition]) -> tuple[tuple[Transition, ...], ...]:
    buckets: list[list[Transition]] = [[] for _ in range(n)]
    for t in transitions:
        buckets[t.src].append(t)
    return tuple(tuple(b) for b in buckets)


def reach(sources: Iterable[int], out: Sequence[Sequence[Transition]]) -> frozenset[int]:
    seen = set(sources)
    todo = list(seen)
    while todo:
        s = todo.pop()
        for t in out[s]:
            if t.dst not in seen:
                seen.add(t.dst)
                todo.append(t.dst)
    return frozenset(seen)


def shortest_path(out: Sequence[Sequence[Transition]], sources: Iterable[int],
                  goal, min_steps: int = 0) -> list[Transition] | None:
    """BFS path (list of transitions) from ``sources`` to a state satisfying ``goal``.

    With ``min_steps=1`` the empty path is not accepted, so a source that
    satisfies ``goal`` needs a genuine cycle back to a goal state.
    """
    parent: dict[int, Transition | None] = {}
    queue: deque[int] = deque()
    for s in sources:
        if min_steps == 0 and goal(s):
            return []
        if s not in parent:
            parent[s] = None
            queue.append(s)
    while queue:
        s = queue.popleft()
        for t in out[s]:
            if goal(t.dst):
                path = [t]
                cur = t.src
                while parent[cur] is not None:
                    prev = parent[cur]
                    path.append(prev)
                    cur = prev.src
                return path[::-1]
            if t.dst not in parent:
                parent[t.dst] = t
                queue.append(t.dst)
    return None


@dataclass(frozen=True)
class FairnessConstraint:
    name: str
    action: str
    transitions: frozenset[Transition]

    @cached_property
    def sources(self) -> frozenset[int]:
        """In(F): the states in which a transition of the constraint is enabled."""
        return frozenset(t.src for t in self.transitions)

    @cached_property
    def targets(self) -> frozenset[int]:
        return frozenset(t.dst for t in self.transitions)


@dataclass(frozen=True)
class FairTransitionSystem:
    ts: TransitionSystem
    fairness: tuple[FairnessConstraint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "fairness", tuple(self.fairness))
        for f in self.fairness:
            missing = f.transitions - self.ts.transition_set
            if missing:
                raise ModelError(f"constraint {f.name} has transitions outside the system: {sorted(missing)}")

    @cached_property
    def fair_transitions(self) -> frozenset[Transition]:
        out: set[Transition] = set()
        for f in self.fairness:
            out |= f.transitions
        return frozenset(out)

    def with_fairness(self, fairness: Iterable[FairnessConstraint]) -> FairTransitionSystem:
        return FairTransitionSystem(self.ts, tuple(fairness))


# -- lassos -------------------------------------------------------------------


@dataclass(frozen=True)
class Lasso:
    """``prefix · cycle^ω``; every step records a state and the action taken."""

    prefix: tuple[Step, ...]
    cycle: tuple[Step, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix", tuple(Step(*p) for p in self.prefix))
        object.__setattr__(self, "cycle", tuple(Step(*c) for c in self.cycle))
        if not self.cycle:
            raise ModelError("a lasso needs a nonempty cycle")

    @property
    def steps(self) -> tuple[Step, ...]:
        return self.prefix + self.cycle

    @property
    def loop_start(self) -> int:
        return len(self.prefix)

    @property
    def start(self) -> int:
        return self.steps[0].state

    def states(self) -> list[int]:
        return [st.state for st in self.steps]

    def successor_index(self, i: int) -> int:
        n = len(self.prefix) + len(self.cycle)
        return i + 1 if i + 1 < n else len(self.prefix)

    def transitions(self) -> list[Transition]:
        steps = self.steps
        return [Transition(st.state, st.action, steps[self.successor_index(i)].state)
                for i, st in enumerate(steps)]

    def cycle_transitions(self) -> list[Transition]:
        return self.transitions()[len(self.prefix):]

    def inf_states(self) -> frozenset[int]:
        return frozenset(st.state for st in self.cycle)

    def inf_transitions(self) -> frozenset[Transition]:
        return frozenset(self.cycle_transitions())

    def validate(self, ts: TransitionSystem, from_initial: bool = True) -> None:
        for t in self.transitions():
            if t not in ts.transition_set:
                raise ModelError(f"lasso step {t} is not a transition of the system")
        if from_initial and self.start not in ts.initial:
            raise ModelError(f"lasso starts in non-initial state {self.start}")

    def is_execution(self, ts: TransitionSystem, from_initial: bool = True) -> bool:
        try:
            self.validate(ts, from_initial)
        except ModelError:
            return False
        return True

    def render(self, ts: TransitionSystem | None = None) -> str:
        name = ts.name if ts is not None else str
        parts = [f"{name(s)} -{a}->" for s, a in self.prefix]
        loop = " ".join(f"{name(s)} -{a}->" for s, a in self.cycle)
        return " ".join(parts + [f"( {loop} )^w"])

    @classmethod
    def from_transitions(cls, prefix: Sequence[Transition], cycle: Sequence[Transition]) -> Lasso:
        return cls(tuple(Step(t.src, t.action) for t in prefix),
                   tuple(Step(t.src, t.action) for t in cycle))


def is_computation(fts: FairTransitionSystem, lasso: Lasso, from_initial: bool = False) -> bool:
    """Set-level fairness on the infinitely repeated part of the lasso."""
    lasso.validate(fts.ts, from_initial)
    inf_s = lasso.inf_states()
    inf_t = lasso.inf_transitions()
    for f in fts.fairness:
        if f.sources & inf_s and not (f.transitions & inf_t):
            return False
    return True


# -- transformations ------------------------------------------------------------


def skip_complete(ts: TransitionSystem) -> TransitionSystem:
    """Add ``Skip`` self-loops on deadlock states."""
    dead = [s for s in ts.states if not ts.out[s]]
    if not dead:
        return ts
    extra = tuple(Transition(s, SKIP, s) for s in dead)
    return ts.with_transitions(ts.transitions + extra, ts.actions | {SKIP})


def tau_project(ts: TransitionSystem, act1: Iterable[str]) -> TransitionSystem:
    """Relabel every action outside ``act1`` as the silent action.

    ``Skip`` loops are left alone: they stand for termination, not for a
    hidden step.
    """
    act1 = frozenset(act1)
    unknown = act1 - ts.actions
    if unknown:
        raise ModelError(f"actions {sorted(unknown)} are not actions of the system")
    keep = act1 | {SKIP}
    trans = tuple(t if t.action in keep else Transition(t.src, TAU, t.dst) for t in ts.transitions)
    # Relabelling can merge parallel edges.
    trans = tuple(dict.fromkeys(trans))
    acts = act1 | {TAU} | ({SKIP} if SKIP in ts.actions else set())
    return ts.with_transitions(trans, acts)


def restrict(ts: TransitionSystem, states: Iterable[int], transitions: Iterable[Transition],
             initial: Iterable[int]) -> tuple[TransitionSystem, tuple[int, ...]]:
    """Renumber a sub-system densely; returns it with the new-to-old id map."""
    order = tuple(sorted(set(states)))
    index = {old: new for new, old in enumerate(order)}
    trans = tuple(Transition(index[t.src], t.action, index[t.dst]) for t in transitions)
    sub = TransitionSystem(
        ts.variables, ts.domains, tuple(ts.labels[s] for s in order),
        frozenset(index[s] for s in initial), trans, frozenset(),
        tuple(ts.name(s) for s in order),
    )
    return sub, order


def renumber(fts: FairTransitionSystem, order: Sequence[int],
             names: Sequence[str] | None = None) -> FairTransitionSystem:
    """Reorder the states: new state ``i`` is old state ``order[i]``."""
    ts = fts.ts
    if sorted(order) != list(ts.states):
        raise ModelError("order must be a permutation of the states")
    index = {old: new for new, old in enumerate(order)}

    def move(t: Transition) -> Transition:
        return Transition(index[t.src], t.action, index[t.dst])

    new_names = tuple(names) if names is not None else (
        tuple(ts.name(s) for s in order) if ts.names is not None else None)
    new_ts = TransitionSystem(ts.variables, ts.domains, tuple(ts.labels[s] for s in order),
                              frozenset(index[s] for s in ts.initial),
                              tuple(sorted(move(t) for t in ts.transitions)), ts.actions, new_names)
    fairness = tuple(FairnessConstraint(f.name, f.action, frozenset(move(t) for t in f.transitions))
                     for f in fts.fairness)
    return FairTransitionSystem(new_ts, fairness)


# -- cycles ---------------------------------------------------------------------


def canonical_cycle(cycle: Sequence[Transition]) -> Cycle:
    """Rotate a cycle so that it starts at its smallest transition."""
    k = min(range(len(cycle)), key=lambda i: cycle[i])
    return tuple(cycle[k:]) + tuple(cycle[:k])


def enumerate_cycles(ts: TransitionSystem, restrict_to: Iterable[int] | None = None,
                     reachable_only: bool = True) -> set[Cycle]:
    """Elementary cycles, one representative per rotation.

    Parallel transitions with different actions give distinct cycles.
    Johnson's algorithm runs on each strongly connected component.
    """
    allowed = set(ts.reachable()) if reachable_only else set(ts.states)
    if restrict_to is not None:
        allowed &= set(restrict_to)
    edges: dict[tuple[int, int], list[Transition]] = {}
    for t in ts.transitions:
        if t.src in allowed and t.dst in allowed:
            edges.setdefault((t.src, t.dst), []).append(t)
    g = nx.DiGraph()
    g.add_nodes_from(allowed)
    g.add_edges_from(edges)
    found: set[Cycle] = set()
    for comp in nx.strongly_connected_components(g):
        sub = g.subgraph(comp)
        if len(comp) == 1:
            (v,) = comp
            for t in edges.get((v, v), []):
                found.add((t,))
            continue
        for nodes in nx.simple_cycles(sub):
            hops = [edges[(nodes[i], nodes[(i + 1) % len(nodes)])] for i in range(len(nodes))]
            _expand(hops, 0, [], found)
    return found


def _expand(hops: list[list[Transition]], i: int, acc: list[Transition], found: set[Cycle]) -> None:
    if i == len(hops):
        found.add(canonical_cycle(acc))
        return
    for t in hops[i]:
        acc.append(t)
        _expand(hops, i + 1, acc, found)
        acc.pop()


def fair_exiting_cycles(fts: FairTransitionSystem,
                        cycles: Iterable[Cycle] | None = None) -> dict[Cycle, frozenset[Transition]]:
    """Map every cycle having a fair exit to its set of exit transitions.

    An exit is a fair transition whose source lies on the cycle and whose
    target differs from that source.
    """
    if cycles is None:
        cycles = enumerate_cycles(fts.ts)
    result: dict[Cycle, frozenset[Transition]] = {}
    for c in cycles:
        on = {t.src for t in c}
        exits = frozenset(t for t in fts.fair_transitions if t.src in on and t.dst != t.src)
        if exits:
            result[c] = exits
    return result


def nontrivial_sccs(n: int, transitions: Iterable[Transition],
                    within: Iterable[int] | None = None) -> list[frozenset[int]]:
    """SCCs that contain at least one edge (self-loops count)."""
    trans = list(transitions)
    allowed = set(range(n)) if within is None else set(within)
    g = nx.DiGraph()
    g.add_nodes_from(allowed)
    g.add_edges_from((t.src, t.dst) for t in trans if t.src in allowed and t.dst in allowed)
    out = []
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1:
            out.append(frozenset(comp))
        else:
            (v,) = comp
            if g.has_edge(v, v):
                out.append(frozenset(comp))
    return out


# -- fair strongly connected components ----------------------------------------

Edge = tuple  # (u, v, Transition): a graph edge over arbitrary nodes, tagged by a system transition


def _identity(n):
    return n


def fair_sccs(edges: Iterable[Edge], fairness: Sequence[FairnessConstraint],
              state_of: Callable[[Hashable], int] = _identity,
              nodes: Iterable[Hashable] | None = None) -> list[frozenset]:
    """Maximal strongly connected node sets that can be looped through fairly.

    A component is fair when, for every constraint whose source states it
    touches, it contains an edge tagged by one of the constraint's
    transitions.  Unfair components lose the offending source nodes and are
    decomposed again (the usual Streett-style refinement).
    """
    succ: dict[Hashable, list[tuple[Hashable, Transition]]] = {}
    for u, v, t in edges:
        succ.setdefault(u, []).append((v, t))
        succ.setdefault(v, [])
    start = set(succ) if nodes is None else set(nodes)
    found: list[frozenset] = []
    work = [start]
    while work:
        allowed = work.pop()
        g = nx.DiGraph()
        g.add_nodes_from(allowed)
        g.add_edges_from((u, v) for u in allowed for v, _ in succ.get(u, ()) if v in allowed)
        for comp in nx.strongly_connected_components(g):
            if len(comp) == 1:
                (v,) = comp
                if not g.has_edge(v, v):
                    continue
            taken = {t for u in comp for v, t in succ[u] if v in comp}
            states = {state_of(u) for u in comp}
            bad: set[int] = set()
            for f in fairness:
                if f.sources & states and not (f.transitions & taken):
                    bad |= f.sources
            if not bad:
                found.append(frozenset(comp))
                continue
            rest = {u for u in comp if state_of(u) not in bad}
            if rest:
                work.append(rest)
    return found


def fair_cycle(comp: frozenset, edges: Iterable[Edge], fairness: Sequence[FairnessConstraint],
               anchor: Hashable, state_of: Callable[[Hashable], int] = _identity) -> list[Edge]:
    """A closed walk inside a fair component, from ``anchor`` back to itself,
    taking one transition of every constraint whose sources the component touches."""
    succ: dict[Hashable, list[tuple[Hashable, Transition]]] = {}
    for u, v, t in edges:
        if u in comp and v in comp:
            succ.setdefault(u, []).append((v, t))
    states = {state_of(u) for u in comp}
    required: list[Edge] = []
    for f in fairness:
        if f.sources & states:
            edge = min(((u, v, t) for u in comp for v, t in succ.get(u, ()) if t in f.transitions),
                       key=repr, default=None)
            if edge is not None and edge not in required:
                required.append(edge)
    walk: list[Edge] = []
    cur = anchor
    for u, v, t in required:
        walk += _bfs_edges(succ, cur, u)
        walk.append((u, v, t))
        cur = v
    walk += _bfs_edges(succ, cur, anchor, min_steps=0 if walk else 1)
    return walk


def _bfs_edges(succ: Mapping[Hashable, Sequence[tuple[Hashable, Transition]]], src: Hashable,
               dst: Hashable, min_steps: int = 0) -> list[Edge]:
    if src == dst and min_steps == 0:
        return []
    parent: dict[Hashable, Edge] = {}
    queue = deque([src])
    seen = {src}
    while queue:
        u = queue.popleft()
        for v, t in succ.get(u, ()):
            if v == dst:
                path = [(u, v, t)]
                while u != src:
                    e = parent[u]
                    path.append(e)
                    u = e[0]
                return path[::-1]
            if v not in seen:
                seen.add(v)
                parent[v] = (u, v, t)
                queue.append(v)
    raise ModelError(f"{dst!r} is not reachable from {src!r} inside the component")


# -- fairness validation --------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    clause: str
    constraint: int
    message: str
    witness: tuple[Transition, ...] = ()


def validate_fairness(fts: FairTransitionSystem) -> list[Violation]:
    """Check the three well-formedness clauses of every constraint.

    (a) one action per constraint; (b) every path from the source of a
    fair transition to its target passes through a transition of the same
    constraint; (c) fair actions are deterministic at their sources.
    """
    ts = fts.ts
    out: list[Violation] = []
    for i, f in enumerate(fts.fairness):
        if not f.transitions:
            continue
        odd = tuple(sorted(t for t in f.transitions if t.action != f.action))
        if odd:
            out.append(Violation("a", i, f"constraint {f.name} mixes actions "
                                         f"{sorted({f.action} | {t.action for t in odd})}", odd))
        for t in sorted(f.transitions):
            clash = tuple(u for u in ts.out[t.src] if u.action == t.action and u.dst != t.dst)
            if clash:
                out.append(Violation("c", i, f"action {t.action} is not deterministic in "
                                             f"{ts.name(t.src)}", (t,) + clash))
        without = adjacency(ts.n_states, (u for u in ts.transitions if u not in f.transitions))
        for t in sorted(f.transitions):
            path = shortest_path(without, [t.src], lambda s, goal=t.dst: s == goal, min_steps=1)
            if path is not None:
                out.append(Violation("b", i, f"{ts.name(t.dst)} is reachable from {ts.name(t.src)} "
                                             f"without a transition of {f.name}", tuple(path)))
    return out


def fairness_warnings(fts: FairTransitionSystem) -> list[str]:
    """Non-fatal diagnostics about the constraint list."""
    notes = []
    by_action: dict[str, list[str]] = {}
    for f in fts.fairness:
        by_action.setdefault(f.action, []).append(f.name)
    for act, names in sorted(by_action.items()):
        if len(names) > 1:
            notes.append(f"action {act} is shared by constraints {', '.join(names)}")
    return notes


# -- canonical serialization ----------------------------------------------------


def to_document(fts: FairTransitionSystem | TransitionSystem, extra: Mapping | None = None) -> dict:
    if isinstance(fts, TransitionSystem):
        fts = FairTransitionSystem(fts, ())
    ts = fts.ts
    index = {t: k for k, t in enumerate(ts.transitions)}
    doc = {
        "format": FORMAT_TAG,
        "variables": [{"name": v, "domain": list(ts.domains.get(v, ()))} for v in ts.variables],
        "states": [{"id": s, "name": ts.name(s), "valuation": ts.valuation(s)} for s in ts.states],
        "initial": sorted(ts.initial),
        "actions": sorted(ts.actions),
        "transitions": [[t.src, t.action, t.dst] for t in ts.transitions],
        "fairness": [{"name": f.name, "action": f.action,
                      "transitions": sorted(index[t] for t in f.transitions)} for f in fts.fairness],
    }
    if extra:
        doc.update(extra)
    return doc


def dumps(fts: FairTransitionSystem | TransitionSystem, extra: Mapping | None = None) -> str:
    return json.dumps(to_document(fts, extra), sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def from_document(doc: Mapping) -> FairTransitionSystem:
    if doc.get("format") != FORMAT_TAG:
        raise ModelError(f"unsupported document format {doc.get('format')!r}")
    variables = tuple(v["name"] for v in doc["variables"])
    domains = {v["name"]: tuple(v["domain"]) for v in doc["variables"] if v["domain"]}
    states = sorted(doc["states"], key=lambda s: s["id"])
    if [s["id"] for s in states] != list(range(len(states))):
        raise ModelError("state ids must be 0..n-1")
    labels = tuple(tuple(s["valuation"][v] for v in variables) for s in states)
    names = tuple(s["name"] for s in states)
    trans = tuple(Transition(a, b, c) for a, b, c in doc["transitions"])
    ts = TransitionSystem(variables, domains, labels, frozenset(doc["initial"]), trans,
                          frozenset(doc["actions"]), names)
    fairness = tuple(FairnessConstraint(f["name"], f["action"], frozenset(trans[k] for k in f["transitions"]))
                     for f in doc["fairness"])
    return FairTransitionSystem(ts, fairness)


def loads(text: str) -> FairTransitionSystem:
    return from_document(json.loads(text))
