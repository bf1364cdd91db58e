"""Expression trees shared by guards, gluing invariants and PLTL formulas.

A state proposition is simply an expression without temporal operators.
Values are plain Python scalars (``str`` or ``int``); a valuation is any
mapping from variable name to value.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

Value = str | int


class Expr:
    """Base class; subclasses are frozen dataclasses and hash structurally."""

    __slots__ = ()

    def __invert__(self) -> Expr:
        return Not(self)

    def __and__(self, other: Expr) -> Expr:
        return And(self, other)

    def __or__(self, other: Expr) -> Expr:
        return Or(self, other)

    def __str__(self) -> str:
        return to_text(self)


def _node(cls):
    """Frozen slotted dataclass whose structural hash is computed once."""
    cls.__annotations__ = {**cls.__dict__.get("__annotations__", {}), "_hash": "int | None"}
    cls._hash = field(default=None, init=False, repr=False, compare=False)
    cls = dataclass(frozen=True, slots=True)(cls)
    names = tuple(f.name for f in fields(cls) if f.compare)
    tag = cls.__name__

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((tag,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


@_node
class TrueE(Expr):
    pass


@_node
class FalseE(Expr):
    pass


TRUE = TrueE()
FALSE = FalseE()


@_node
class Atom(Expr):
    """``var = value``."""

    var: str
    value: Value


@_node
class VarEq(Expr):
    """``left = right`` between two variables (gluing invariants)."""

    left: str
    right: str


@_node
class Not(Expr):
    operand: Expr


@_node
class And(Expr):
    left: Expr
    right: Expr


@_node
class Or(Expr):
    left: Expr
    right: Expr


@_node
class Implies(Expr):
    left: Expr
    right: Expr


@_node
class Iff(Expr):
    left: Expr
    right: Expr


@_node
class Next(Expr):
    operand: Expr


@_node
class Until(Expr):
    left: Expr
    right: Expr


@_node
class Release(Expr):
    left: Expr
    right: Expr


@_node
class Eventually(Expr):
    operand: Expr


@_node
class Always(Expr):
    operand: Expr


BINARY = (And, Or, Implies, Iff, Until, Release)
UNARY = (Not, Next, Eventually, Always)
TEMPORAL = (Next, Until, Release, Eventually, Always)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, BINARY):
        return (e.left, e.right)
    if isinstance(e, UNARY):
        return (e.operand,)
    return ()


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


@lru_cache(maxsize=65536)
def is_propositional(e: Expr) -> bool:
    if isinstance(e, TEMPORAL):
        return False
    return all(is_propositional(c) for c in children(e))


def depth(e: Expr) -> int:
    """Operator nesting depth (atoms have depth 0)."""
    cs = children(e)
    return 0 if not cs else 1 + max(depth(c) for c in cs)


def variables(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    for node in walk(e):
        if isinstance(node, Atom):
            out.add(node.var)
        elif isinstance(node, VarEq):
            out.update((node.left, node.right))
    return frozenset(out)


def atoms(e: Expr) -> frozenset[Atom]:
    return frozenset(n for n in walk(e) if isinstance(n, Atom))


def conj(items: Iterable[Expr]) -> Expr:
    items = list(items)
    if not items:
        return TRUE
    out = items[0]
    for it in items[1:]:
        out = And(out, it)
    return out


def disj(items: Iterable[Expr]) -> Expr:
    items = list(items)
    if not items:
        return FALSE
    out = items[0]
    for it in items[1:]:
        out = Or(out, it)
    return out


def conjuncts(e: Expr) -> list[Expr]:
    """Top-level conjuncts, flattening nested ``And``."""
    if isinstance(e, And):
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def valuation_prop(valuation: Mapping[str, Value], order: Iterable[str] | None = None) -> Expr:
    """Conjunction of every ``x = v`` binding of a valuation."""
    names = list(order) if order is not None else sorted(valuation)
    return conj(Atom(x, valuation[x]) for x in names)


class UnresolvedAtom(KeyError):
    """An atom names a variable absent from the valuation(s)."""


def _lookup(var: str, valuation: Mapping[str, Value], other: Mapping[str, Value] | None) -> Value:
    if var in valuation:
        return valuation[var]
    if other is not None and var in other:
        return other[var]
    raise UnresolvedAtom(var)


def holds(e: Expr, valuation: Mapping[str, Value], other: Mapping[str, Value] | None = None) -> bool:
    """Truth of a state proposition on a valuation (or a pair of them).

    With ``other`` given, atoms are resolved against whichever of the two
    valuations binds the variable, which is the pair semantics used for
    gluing invariants (the two variable sets are disjoint).
    """
    if isinstance(e, Atom):
        return _lookup(e.var, valuation, other) == e.value
    if isinstance(e, VarEq):
        return _lookup(e.left, valuation, other) == _lookup(e.right, valuation, other)
    if isinstance(e, TrueE):
        return True
    if isinstance(e, FalseE):
        return False
    if isinstance(e, Not):
        return not holds(e.operand, valuation, other)
    if isinstance(e, And):
        return holds(e.left, valuation, other) and holds(e.right, valuation, other)
    if isinstance(e, Or):
        return holds(e.left, valuation, other) or holds(e.right, valuation, other)
    if isinstance(e, Implies):
        return (not holds(e.left, valuation, other)) or holds(e.right, valuation, other)
    if isinstance(e, Iff):
        return holds(e.left, valuation, other) == holds(e.right, valuation, other)
    raise TypeError(f"not a state proposition: {to_text(e)}")


def partial_eval(e: Expr, valuation: Mapping[str, Value]) -> Expr:
    """Substitute the variables bound in ``valuation`` and constant-fold."""
    if isinstance(e, Atom):
        if e.var in valuation:
            return TRUE if valuation[e.var] == e.value else FALSE
        return e
    if isinstance(e, VarEq):
        left_in, right_in = e.left in valuation, e.right in valuation
        if left_in and right_in:
            return TRUE if valuation[e.left] == valuation[e.right] else FALSE
        if left_in:
            return Atom(e.right, valuation[e.left])
        if right_in:
            return Atom(e.left, valuation[e.right])
        return e
    if isinstance(e, (TrueE, FalseE)):
        return e
    if isinstance(e, Not):
        return simplify_not(partial_eval(e.operand, valuation))
    if isinstance(e, (And, Or, Implies, Iff)):
        left = partial_eval(e.left, valuation)
        right = partial_eval(e.right, valuation)
        return fold_binary(type(e), left, right)
    raise TypeError(f"not a state proposition: {to_text(e)}")


def simplify_not(e: Expr) -> Expr:
    if isinstance(e, TrueE):
        return FALSE
    if isinstance(e, FalseE):
        return TRUE
    if isinstance(e, Not):
        return e.operand
    return Not(e)


def fold_binary(kind: type, left: Expr, right: Expr) -> Expr:
    lt, lf = isinstance(left, TrueE), isinstance(left, FalseE)
    rt, rf = isinstance(right, TrueE), isinstance(right, FalseE)
    if kind is And:
        if lf or rf:
            return FALSE
        if lt:
            return right
        if rt:
            return left
    elif kind is Or:
        if lt or rt:
            return TRUE
        if lf:
            return right
        if rf:
            return left
    elif kind is Implies:
        if lf or rt:
            return TRUE
        if lt:
            return right
        if rf:
            return simplify_not(left)
    elif kind is Iff:
        if lt:
            return right
        if rt:
            return left
        if lf:
            return simplify_not(right)
        if rf:
            return simplify_not(left)
    return kind(left, right)


def _domain_for(var: str, mentioned: Iterable[Value], domains: Mapping[str, Iterable[Value]] | None):
    if domains is not None and var in domains:
        return tuple(domains[var])
    values = sorted(set(mentioned), key=repr)
    # One extra value stands for "anything not mentioned".
    return tuple(values) + (("__other__", var),)


def consistent_valuations(
    e: Expr, domains: Mapping[str, Iterable[Value]] | None = None
) -> Iterator[dict[str, Value]]:
    """Every assignment of the variables of ``e`` over their (finite) domains.

    Variables without a declared domain range over the values mentioned for
    them plus one fresh value, which is enough to decide validity.
    """
    mentioned: dict[str, set[Value]] = {}
    for node in walk(e):
        if isinstance(node, Atom):
            mentioned.setdefault(node.var, set()).add(node.value)
        elif isinstance(node, VarEq):
            mentioned.setdefault(node.left, set())
            mentioned.setdefault(node.right, set())
    # Variables compared with each other must share candidate values.
    for node in walk(e):
        if isinstance(node, VarEq):
            union = mentioned[node.left] | mentioned[node.right]
            mentioned[node.left] = mentioned[node.right] = set(union)
    names = sorted(mentioned)
    spaces = [_domain_for(n, mentioned[n], domains) for n in names]
    for combo in itertools.product(*spaces):
        yield dict(zip(names, combo))


def is_valid(e: Expr, domains: Mapping[str, Iterable[Value]] | None = None) -> bool:
    return all(holds(e, v) for v in consistent_valuations(e, domains))


def is_satisfiable(e: Expr, domains: Mapping[str, Iterable[Value]] | None = None) -> bool:
    return any(holds(e, v) for v in consistent_valuations(e, domains))


def implies_prop(p: Expr, q: Expr, domains: Mapping[str, Iterable[Value]] | None = None) -> bool:
    """Validity of ``p => q`` over all consistent valuations."""
    return is_valid(Implies(p, q), domains)


# -- concrete syntax ---------------------------------------------------------

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4, Until: 5, Release: 5}


def _value_text(v: Value) -> str:
    return str(v)


def to_text(e: Expr, parent: int = 0) -> str:
    """Render in the ASCII formula syntax accepted by :mod:`fairparts.pltl`."""
    if isinstance(e, TrueE):
        return "true"
    if isinstance(e, FalseE):
        return "false"
    if isinstance(e, Atom):
        return f"{e.var}={_value_text(e.value)}"
    if isinstance(e, VarEq):
        return f"{e.left}=={e.right}"
    if isinstance(e, Not):
        return "!" + to_text(e.operand, 9)
    if isinstance(e, Next):
        return "X " + to_text(e.operand, 9)
    if isinstance(e, Eventually):
        return "<>" + to_text(e.operand, 9)
    if isinstance(e, Always):
        return "[]" + to_text(e.operand, 9)
    ops = {And: "&&", Or: "||", Implies: "->", Iff: "<->", Until: "U", Release: "R"}
    prec = _PREC[type(e)]
    # Right-associative operators put the tighter bound on the left operand.
    right_assoc = isinstance(e, (Implies, Until, Release))
    lp = prec + 1 if right_assoc else prec
    rp = prec if right_assoc else prec + 1
    text = f"{to_text(e.left, lp)} {ops[type(e)]} {to_text(e.right, rp)}"
    return f"({text})" if prec < parent else text
