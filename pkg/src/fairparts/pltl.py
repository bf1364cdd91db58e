"""PLTL: parsing, lasso semantics and fairness formulas.

Concrete syntax (ASCII and Unicode)::

    formula  ::= iff
    iff      ::= impl ( ("<->" | "⇔") impl )*
    impl     ::= or ( ("->" | "=>" | "⇒") impl )?          right-assoc
    or       ::= and ( ("||" | "|" | "∨") and )*
    and      ::= until ( ("&&" | "&" | "∧") until )*
    until    ::= unary ( ("U" | "𝒰" | "R") until )?        right-assoc
    unary    ::= ("!" | "¬" | "X" | "◯" | "[]" | "□" | "<>" | "◇") unary
               | "(" formula ")" | "true" | "false" | atom
    atom     ::= NAME ( ("=" | "==") VALUE | "!=" VALUE )?

A bare ``NAME`` is the boolean proposition ``NAME=true``.
"""
from __future__ import annotations

import re
from typing import Iterable, Mapping, Sequence

from .core import FairTransitionSystem, Lasso, TransitionSystem
from .logic import (FALSE, TRUE, Always, And, Atom, Eventually, Expr, FalseE, Iff, Implies,
                    Next, Not, Or, Release, TrueE, Until, Value, VarEq, disj, conj, holds, is_propositional, to_text)

BOOL_TRUE = "true"


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        pointer = f"\n  {text}\n  {' ' * position}^" if text else ""
        super().__init__(f"at position {position}: {message}{pointer}")


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<op><->|->|=>|&&|\|\||!=|==|\[\]|<>|[!&|()=¬∧∨⇒⇔□◇◯𝒰])
  | (?P<num>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-']*)
""", re.VERBOSE)

_CANON = {"¬": "!", "∧": "&&", "&": "&&", "∨": "||", "|": "||", "⇒": "->", "=>": "->",
          "⇔": "<->", "□": "[]", "◇": "<>", "◯": "X", "𝒰": "U", "==": "="}


def _lex(text: str) -> list[tuple[str, str, int]]:
    out = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[i]!r}", i, text)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group(0)
            if kind == "op":
                val = _CANON.get(val, val)
            elif kind == "name" and val in ("X", "U", "R"):
                kind = "op"
            out.append((kind, val, i))
        i = m.end()
    out.append(("eof", "", len(text)))
    return out


class _FormulaParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def is_op(self, val: str) -> bool:
        kind, v, _ = self.peek()
        return kind == "op" and v == val

    def take(self, val: str) -> bool:
        if self.is_op(val):
            self.i += 1
            return True
        return False

    def fail(self, msg: str):
        kind, val, pos = self.peek()
        found = "end of input" if kind == "eof" else repr(val)
        raise FormulaSyntaxError(f"{msg}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        e = self.iff()
        if self.peek()[0] != "eof":
            self.fail("expected end of formula")
        return e

    def iff(self) -> Expr:
        e = self.impl()
        while self.take("<->"):
            e = Iff(e, self.impl())
        return e

    def impl(self) -> Expr:
        e = self.or_()
        if self.take("->"):
            return Implies(e, self.impl())
        return e

    def or_(self) -> Expr:
        e = self.and_()
        while self.take("||"):
            e = Or(e, self.and_())
        return e

    def and_(self) -> Expr:
        e = self.until()
        while self.take("&&"):
            e = And(e, self.until())
        return e

    def until(self) -> Expr:
        e = self.unary()
        if self.take("U"):
            return Until(e, self.until())
        if self.take("R"):
            return Release(e, self.until())
        return e

    def unary(self) -> Expr:
        if self.take("!"):
            return Not(self.unary())
        if self.take("X"):
            return Next(self.unary())
        if self.take("[]"):
            return Always(self.unary())
        if self.take("<>"):
            return Eventually(self.unary())
        if self.take("("):
            e = self.iff()
            if not self.take(")"):
                self.fail("expected ')'")
            return e
        kind, val, pos = self.peek()
        if kind != "name":
            self.fail("expected a proposition")
        self.i += 1
        if val == "true":
            return TRUE
        if val == "false":
            return FALSE
        if self.take("="):
            return Atom(val, self._value())
        if self.take("!="):
            return Not(Atom(val, self._value()))
        return Atom(val, BOOL_TRUE)

    def _value(self) -> Value:
        kind, val, pos = self.peek()
        if kind == "num":
            self.i += 1
            return int(val)
        if kind == "name":
            self.i += 1
            return val
        self.fail("expected a value")


def parse_formula(text: str) -> Expr:
    return _FormulaParser(text).parse()


def formula_text(e: Expr) -> str:
    return to_text(e).replace(f"={BOOL_TRUE}", "")


# -- rewriting ------------------------------------------------------------------


def normalize(e: Expr) -> Expr:
    """Expand derived operators into not/or/and/next/until."""
    if isinstance(e, (Atom, VarEq, TrueE, FalseE)):
        return e
    if isinstance(e, Not):
        return Not(normalize(e.operand))
    if isinstance(e, Next):
        return Next(normalize(e.operand))
    if isinstance(e, Eventually):
        return Until(TRUE, normalize(e.operand))
    if isinstance(e, Always):
        return Not(Until(TRUE, Not(normalize(e.operand))))
    if isinstance(e, Implies):
        return Or(Not(normalize(e.left)), normalize(e.right))
    if isinstance(e, Iff):
        a, b = normalize(e.left), normalize(e.right)
        return And(Or(Not(a), b), Or(Not(b), a))
    if isinstance(e, Release):
        return Not(Until(Not(normalize(e.left)), Not(normalize(e.right))))
    if isinstance(e, (And, Or, Until)):
        return type(e)(normalize(e.left), normalize(e.right))
    raise TypeError(e)


def nnf(e: Expr, negate: bool = False) -> Expr:
    """Negation normal form; propositional subformulas are kept whole."""
    if is_propositional(e):
        return _neg_prop(e) if negate else e
    if isinstance(e, Not):
        return nnf(e.operand, not negate)
    if isinstance(e, Next):
        return Next(nnf(e.operand, negate))
    if isinstance(e, Eventually):
        return Release(FALSE, nnf(e.operand, True)) if negate else Until(TRUE, nnf(e.operand))
    if isinstance(e, Always):
        return Until(TRUE, nnf(e.operand, True)) if negate else Release(FALSE, nnf(e.operand))
    if isinstance(e, Implies):
        return nnf(Or(Not(e.left), e.right), negate)
    if isinstance(e, Iff):
        return nnf(And(Or(Not(e.left), e.right), Or(Not(e.right), e.left)), negate)
    if isinstance(e, And):
        return (Or if negate else And)(nnf(e.left, negate), nnf(e.right, negate))
    if isinstance(e, Or):
        return (And if negate else Or)(nnf(e.left, negate), nnf(e.right, negate))
    if isinstance(e, Until):
        if negate:
            return Release(nnf(e.left, True), nnf(e.right, True))
        return Until(nnf(e.left), nnf(e.right))
    if isinstance(e, Release):
        if negate:
            return Until(nnf(e.left, True), nnf(e.right, True))
        return Release(nnf(e.left), nnf(e.right))
    raise TypeError(e)


def _is_always(e: Expr) -> bool:
    return isinstance(e, Release) and isinstance(e.left, FalseE)


def _is_eventually(e: Expr) -> bool:
    return isinstance(e, Until) and isinstance(e.left, TrueE)


def _always(e: Expr) -> Release:
    return Release(FALSE, e)


def _eventually(e: Expr) -> Until:
    return Until(TRUE, e)


def suffix_invariant(e: Expr) -> bool:
    """True for formulas whose truth is the same at every position of a word
    (``<>[]x``, ``[]<>x`` and their boolean combinations)."""
    if _is_always(e) and _is_eventually(e.right):
        return True
    if _is_eventually(e) and _is_always(e.right):
        return True
    if isinstance(e, (And, Or)):
        return suffix_invariant(e.left) and suffix_invariant(e.right)
    return False


def _flat(e: Expr, kind: type) -> list[Expr]:
    if isinstance(e, kind):
        return _flat(e.left, kind) + _flat(e.right, kind)
    return [e]


def _join(items: list[Expr], kind: type) -> Expr:
    out = items[0]
    for x in items[1:]:
        out = kind(out, x)
    return out


def rewrite_nnf(e: Expr) -> Expr:
    """Equivalence-preserving rewrites of an NNF formula that shrink its automaton.

    ``[]`` distributes over conjunction and ``<>`` over disjunction; a
    suffix-invariant disjunct (conjunct) moves out of ``[]`` (``<>``); and
    ``[]``/``<>`` applied to a suffix-invariant formula or to itself vanish.
    For instance ``[](<>[]a || <>b)`` becomes ``<>[]a || []<>b``.
    """
    if is_propositional(e):
        return e
    if isinstance(e, Next):
        return Next(rewrite_nnf(e.operand))
    if isinstance(e, (And, Or)):
        return type(e)(rewrite_nnf(e.left), rewrite_nnf(e.right))
    left, right = rewrite_nnf(e.left), rewrite_nnf(e.right)
    if isinstance(e, Release) and isinstance(left, FalseE):
        if suffix_invariant(right) or _is_always(right):
            return right
        if isinstance(right, And):
            return And(rewrite_nnf(_always(right.left)), rewrite_nnf(_always(right.right)))
        if isinstance(right, Or):
            parts = _flat(right, Or)
            fixed = [p for p in parts if suffix_invariant(p)]
            rest = [p for p in parts if not suffix_invariant(p)]
            if fixed and rest:
                return Or(_join(fixed, Or), rewrite_nnf(_always(_join(rest, Or))))
        return Release(left, right)
    if isinstance(e, Until) and isinstance(left, TrueE):
        if suffix_invariant(right) or _is_eventually(right):
            return right
        if isinstance(right, Or):
            return Or(rewrite_nnf(_eventually(right.left)), rewrite_nnf(_eventually(right.right)))
        if isinstance(right, And):
            parts = _flat(right, And)
            fixed = [p for p in parts if suffix_invariant(p)]
            rest = [p for p in parts if not suffix_invariant(p)]
            if fixed and rest:
                return And(_join(fixed, And), rewrite_nnf(_eventually(_join(rest, And))))
        return Until(left, right)
    return type(e)(left, right)


def _neg_prop(e: Expr) -> Expr:
    if isinstance(e, TrueE):
        return FALSE
    if isinstance(e, FalseE):
        return TRUE
    if isinstance(e, Not):
        return e.operand
    return Not(e)


def propositions(e: Expr) -> frozenset[Atom]:
    from .logic import atoms

    return atoms(e)


# -- semantics on ultimately periodic words ---------------------------------------


Word = tuple[Sequence[Mapping[str, Value]], Sequence[Mapping[str, Value]]]


def lasso_word(lasso: Lasso, ts: TransitionSystem) -> Word:
    return ([ts.valuation(s) for s, _ in lasso.prefix], [ts.valuation(s) for s, _ in lasso.cycle])


def eval_word(e: Expr, prefix: Sequence[Mapping[str, Value]], cycle: Sequence[Mapping[str, Value]]) -> bool:
    """Truth at position 0 of ``prefix · cycle^ω``, by fixpoints over positions."""
    if not cycle:
        raise ValueError("the cycle of a lasso must be nonempty")
    vals = list(prefix) + list(cycle)
    n, p = len(vals), len(prefix)
    succ = list(range(1, n)) + [p]
    cache: dict[Expr, list[bool]] = {}

    def table(f: Expr) -> list[bool]:
        got = cache.get(f)
        if got is not None:
            return got
        if is_propositional(f):
            res = [holds(f, v) for v in vals]
        elif isinstance(f, Not):
            res = [not x for x in table(f.operand)]
        elif isinstance(f, And):
            a, b = table(f.left), table(f.right)
            res = [x and y for x, y in zip(a, b)]
        elif isinstance(f, Or):
            a, b = table(f.left), table(f.right)
            res = [x or y for x, y in zip(a, b)]
        elif isinstance(f, Implies):
            a, b = table(f.left), table(f.right)
            res = [(not x) or y for x, y in zip(a, b)]
        elif isinstance(f, Iff):
            a, b = table(f.left), table(f.right)
            res = [x == y for x, y in zip(a, b)]
        elif isinstance(f, Next):
            a = table(f.operand)
            res = [a[succ[i]] for i in range(n)]
        elif isinstance(f, (Until, Eventually)):
            a = table(f.left) if isinstance(f, Until) else [True] * n
            b = table(f.right if isinstance(f, Until) else f.operand)
            res = _fix(a, b, succ, least=True)
        elif isinstance(f, (Release, Always)):
            a = table(f.left) if isinstance(f, Release) else [False] * n
            b = table(f.right if isinstance(f, Release) else f.operand)
            res = _fix(a, b, succ, least=False)
        else:
            raise TypeError(f)
        cache[f] = res
        return res

    return table(e)[0]


def _fix(a: list[bool], b: list[bool], succ: list[int], least: bool) -> list[bool]:
    """Until (least) or release (greatest) fixpoint over lasso positions."""
    n = len(a)
    res = [not least] * n
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            if least:
                v = b[i] or (a[i] and res[succ[i]])
            else:
                v = b[i] and (a[i] or res[succ[i]])
            if v != res[i]:
                res[i] = v
                changed = True
    return res


def eval_lasso(e: Expr, lasso: Lasso, ts: TransitionSystem) -> bool:
    prefix, cycle = lasso_word(lasso, ts)
    return eval_word(e, prefix, cycle)


def eval_word_unrolled(e: Expr, prefix: Sequence[Mapping[str, Value]],
                       cycle: Sequence[Mapping[str, Value]]) -> bool:
    """Direct recursive semantics with position folding (independent check).

    Positions past the prefix are folded modulo the cycle length, so every
    future operator only has to look ``len(prefix) + len(cycle)`` steps ahead.
    """
    p, c = len(prefix), len(cycle)
    horizon = p + c

    def label(j: int) -> Mapping[str, Value]:
        return prefix[j] if j < p else cycle[(j - p) % c]

    def fold(j: int) -> int:
        return j if j < p else p + (j - p) % c

    def sat(f: Expr, j: int) -> bool:
        j = fold(j)
        if isinstance(f, TrueE):
            return True
        if isinstance(f, FalseE):
            return False
        if isinstance(f, (Atom, VarEq)):
            return holds(f, label(j))
        if isinstance(f, Not):
            return not sat(f.operand, j)
        if isinstance(f, And):
            return sat(f.left, j) and sat(f.right, j)
        if isinstance(f, Or):
            return sat(f.left, j) or sat(f.right, j)
        if isinstance(f, Implies):
            return (not sat(f.left, j)) or sat(f.right, j)
        if isinstance(f, Iff):
            return sat(f.left, j) == sat(f.right, j)
        if isinstance(f, Next):
            return sat(f.operand, j + 1)
        if isinstance(f, Eventually):
            return any(sat(f.operand, k) for k in range(j, j + horizon))
        if isinstance(f, Always):
            return all(sat(f.operand, k) for k in range(j, j + horizon))
        if isinstance(f, Until):
            for k in range(j, j + horizon):
                if sat(f.right, k):
                    return True
                if not sat(f.left, k):
                    return False
            return False
        if isinstance(f, Release):
            for k in range(j, j + horizon):
                if not sat(f.right, k):
                    return False
                if sat(f.left, k):
                    return True
            return True
        raise TypeError(f)

    return sat(e, 0)


# -- fairness as a formula ----------------------------------------------------------


def fairness_conjunct(fts: FairTransitionSystem, i: int) -> Expr:
    """[]([]<> (some source label) -> <> (some target label)) for constraint ``i``."""
    ts = fts.ts
    f = fts.fairness[i]
    srcs = sorted({t.src for t in f.transitions})
    dsts = sorted({t.dst for t in f.transitions})
    src = disj(_dedup(ts.label_prop(s) for s in srcs))
    dst = disj(_dedup(ts.label_prop(s) for s in dsts))
    return Always(Implies(Always(Eventually(src)), Eventually(dst)))


def _dedup(items: Iterable[Expr]) -> list[Expr]:
    return list(dict.fromkeys(items))


def fairness_formula(fts: FairTransitionSystem, indices: Iterable[int] | None = None) -> Expr:
    """Conjunction of the per-constraint fairness formulas (``true`` if none)."""
    idx = range(len(fts.fairness)) if indices is None else indices
    parts = [fairness_conjunct(fts, i) for i in idx if fts.fairness[i].transitions]
    return conj(parts)


def simplify_fairness_for_part(part_ts: TransitionSystem, fairness: FairTransitionSystem) -> list[int]:
    """Indices of the constraints that can matter on a part.

    A constraint is relevant when the part has a cycle that avoids its
    transitions yet passes through a state labelled like one of its sources;
    on every other lasso of the part the constraint's formula is already
    true, so it can be dropped from the antecedent.
    """
    from .core import nontrivial_sccs

    gts = fairness.ts
    relevant = []
    for i, f in enumerate(fairness.fairness):
        source_labels = {gts.labels[t.src] for t in f.transitions}
        fair_pairs = {(gts.labels[t.src], t.action, gts.labels[t.dst]) for t in f.transitions}
        kept = [t for t in part_ts.transitions
                if (part_ts.labels[t.src], t.action, part_ts.labels[t.dst]) not in fair_pairs]
        for comp in nontrivial_sccs(part_ts.n_states, kept):
            if any(part_ts.labels[s] in source_labels for s in comp):
                relevant.append(i)
                break
    return relevant


__all__ = [
    "FormulaSyntaxError", "Word", "eval_lasso", "eval_word", "eval_word_unrolled",
    "fairness_conjunct", "fairness_formula", "formula_text", "lasso_word", "nnf", "normalize",
    "parse_formula", "rewrite_nnf", "simplify_fairness_for_part", "suffix_invariant",
]
