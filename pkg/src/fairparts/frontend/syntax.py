"""Lexer, parser and pretty-printer for the guarded-command event dialect.

A machine looks like::

    MACHINE teg1
    SETS
      SENDER = {card, reader}; CARD-STATE = {in, out}
    VARIABLES
      Sender1, Cstatus1
    INVARIANT
      Sender1 : SENDER & Cstatus1 : CARD-STATE
    INITIALISATION
      Sender1 := reader || Cstatus1 := in
    EVENTS
      Rsends = SELECT Sender1 = reader & Cstatus1 = in THEN Sender1 := card END;
      ...
    FAIRNESS = {Eject, Csends if (CardF2 = bl)}
    END

Unicode forms (``∧ ∨ ¬ ⇔ ⇒ ∈ ‖ ≙``) are accepted as well.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..logic import (FALSE, TRUE, And, Atom, Expr, FalseE, Iff, Implies, Not, Or, TrueE,
                     Value, VarEq)

KEYWORDS = {"MACHINE", "REFINEMENT", "REFINES", "SETS", "VARIABLES", "INVARIANT",
            "INITIALISATION", "EVENTS", "FAIRNESS", "SELECT", "THEN", "END", "if",
            "or", "not", "TRUE", "FALSE"}
SECTION_ORDER = ("SETS", "VARIABLES", "INVARIANT", "INITIALISATION", "EVENTS", "FAIRNESS")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{line}:{column}: {message}{detail}")


# -- lexer --------------------------------------------------------------------

_SYMBOLS = [
    (":=", ":="), ("^=", "^="), ("≙", "^="), ("<=>", "<=>"), ("⇔", "<=>"), ("=>", "=>"),
    ("⇒", "=>"), ("/=", "/="), ("≠", "/="), ("||", "||"), ("‖", "||"), ("..", ".."),
    ("∧", "&"), ("&", "&"), ("∨", "or"), ("¬", "not"), ("∈", ":"), (":", ":"), ("=", "="),
    ("(", "("), (")", ")"), ("{", "{"), ("}", "}"), (",", ","), (";", ";"),
]
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*(?:-[A-Za-z][A-Za-z0-9_]*)*")
_INT = re.compile(r"-?[0-9]+")


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "kw", "sym", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(1)
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated comment", line, col)
            advance(end + 2 - i)
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            advance((n if end < 0 else end) - i)
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, line, col))
            advance(len(word))
            continue
        m = _INT.match(text, i)
        if m and (ch != "-" or not tokens or tokens[-1].kind in ("sym", "kw")):
            tokens.append(Token("int", m.group(0), line, col))
            advance(len(m.group(0)))
            continue
        for src, canon in _SYMBOLS:
            if text.startswith(src, i):
                tokens.append(Token("sym", canon, line, col))
                advance(len(src))
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


# -- syntax tree --------------------------------------------------------------


@dataclass(frozen=True)
class Typing:
    """``var : SET`` conjunct of an invariant."""

    var: str
    set_name: str


@dataclass(frozen=True)
class Assign:
    var: str
    value: Value | None = None
    source: str | None = None  # copy of another variable

    def rhs_text(self) -> str:
        return self.source if self.source is not None else str(self.value)


@dataclass(frozen=True)
class Event:
    name: str
    guard: Expr
    actions: tuple[Assign, ...]
    line: int = 0


@dataclass(frozen=True)
class FairnessDecl:
    event: str
    condition: Expr | None = None

    def label(self) -> str:
        if self.condition is None:
            return self.event
        return f"{self.event} if ({to_b_text(self.condition)})"


@dataclass(frozen=True)
class SetDecl:
    name: str
    values: tuple[Value, ...]
    is_range: bool = False


@dataclass(frozen=True)
class EventSystem:
    name: str
    refines: str | None
    sets: tuple[SetDecl, ...]
    variables: tuple[str, ...]
    invariant: tuple[Typing | Expr, ...]
    init: tuple[Assign, ...]
    events: tuple[Event, ...]
    fairness: tuple[FairnessDecl, ...]

    @property
    def is_refinement(self) -> bool:
        return self.refines is not None

    def set_values(self, name: str) -> tuple[Value, ...]:
        for s in self.sets:
            if s.name == name:
                return s.values
        raise KeyError(name)

    def event(self, name: str) -> Event:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    @property
    def typing(self) -> dict[str, str]:
        return {item.var: item.set_name for item in self.invariant if isinstance(item, Typing)}

    @property
    def invariant_props(self) -> tuple[Expr, ...]:
        return tuple(item for item in self.invariant if not isinstance(item, Typing))


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def error(self, message: str, *expected: str) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{message}, found {found}", t.line, t.column, expected)

    def peek(self, k: int) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("kw", "sym") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str, context: str = "") -> Token:
        if not self.at(text):
            raise self.error(f"expected {text}" + (f" {context}" if context else ""), text)
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}", what)
        tok = self.tok
        self.pos += 1
        return tok

    def value(self) -> tuple[str, Value]:
        """Returns ("ident", name) or ("int", n)."""
        t = self.tok
        if t.kind == "ident":
            self.pos += 1
            return "ident", t.text
        if t.kind == "int":
            self.pos += 1
            return "int", int(t.text)
        raise self.error("expected a value", "identifier", "integer")

    # machine ----------------------------------------------------------------

    def machine(self) -> tuple[EventSystem, dict]:
        refines = None
        if self.accept("MACHINE"):
            name = self.ident("machine name").text
        elif self.accept("REFINEMENT"):
            name = self.ident("machine name").text
            self.expect("REFINES")
            refines = self.ident("abstract machine name").text
        else:
            raise self.error("expected a machine header", "MACHINE", "REFINEMENT")
        sets: list[SetDecl] = []
        if self.accept("SETS"):
            sets.append(self.set_decl())
            while self.accept(";"):
                if not self.tok.kind == "ident":
                    break
                sets.append(self.set_decl())
        if not self.at("VARIABLES"):
            raise self.error("missing VARIABLES section", "VARIABLES")
        self.pos += 1
        variables = [self.ident("variable name")]
        while self.accept(","):
            variables.append(self.ident("variable name"))
        seen: set[str] = set()
        for v in variables:
            if v.text in seen:
                raise ParseError(f"variable {v.text} declared twice", v.line, v.column)
            seen.add(v.text)
        invariant: list[Typing | Expr] = []
        if self.accept("INVARIANT"):
            invariant = self.invariant()
        if not self.at("INITIALISATION"):
            raise self.error("missing INITIALISATION section", "INITIALISATION")
        self.pos += 1
        init = self.assignments()
        if not self.at("EVENTS"):
            raise self.error("missing EVENTS section", "EVENTS")
        events_tok = self.expect("EVENTS")
        events: list[Event] = []
        while self.tok.kind == "ident":
            events.append(self.event())
            if not self.accept(";"):
                break
        if not events:
            raise ParseError("EVENTS section declares no event", events_tok.line, events_tok.column,
                             ("event definition",))
        names: set[str] = set()
        for e in events:
            if e.name in names:
                raise ParseError(f"duplicate event {e.name}", e.line, 1)
            names.add(e.name)
        fairness: list[FairnessDecl] = []
        if self.accept("FAIRNESS"):
            self.accept("=")
            self.expect("{", "to open the FAIRNESS set")
            if not self.at("}"):
                fairness.append(self.fair_decl())
                while self.accept(","):
                    fairness.append(self.fair_decl())
            self.expect("}", "to close the FAIRNESS set")
            self.accept(";")
        self.expect("END", "to close the machine")
        if self.tok.kind != "eof":
            raise self.error("unexpected text after END", "end of input")
        es = EventSystem(name, refines, tuple(sets), tuple(v.text for v in variables),
                         tuple(invariant), tuple(init), tuple(events), tuple(fairness))
        return es, {"variables": {v.text: (v.line, v.column) for v in variables}}

    def set_decl(self) -> SetDecl:
        name = self.ident("set name").text
        self.expect("=")
        if self.tok.kind == "int":
            lo = int(self.tok.text)
            self.pos += 1
            self.expect("..")
            if self.tok.kind != "int":
                raise self.error("expected an integer bound", "integer")
            hi = int(self.tok.text)
            self.pos += 1
            return SetDecl(name, tuple(range(lo, hi + 1)), True)
        self.expect("{", "to open an enumerated set")
        values = [self.value()[1]]
        while self.accept(","):
            values.append(self.value()[1])
        self.expect("}", "to close an enumerated set")
        if len(set(values)) != len(values):
            raise self.error(f"set {name} lists a value twice")
        return SetDecl(name, tuple(values))

    def invariant(self) -> list[Typing | Expr]:
        items = [self.inv_item()]
        while self.accept("&"):
            items.append(self.inv_item())
        return items

    def inv_item(self) -> Typing | Expr:
        if self.tok.kind == "ident" and self.peek(1).kind == "sym" and self.peek(1).text == ":":
            var = self.ident().text
            self.expect(":")
            return Typing(var, self.ident("set name").text)
        return self.implication()

    def assignments(self) -> list[Assign]:
        out = [self.assign()]
        while self.accept("||"):
            out.append(self.assign())
        return out

    def assign(self) -> Assign:
        var = self.ident("variable name").text
        self.expect(":=")
        # Identifiers on the right are resolved later: value or variable copy.
        return Assign(var, self.value()[1])

    def event(self) -> Event:
        name_tok = self.ident("event name")
        if not (self.accept("=") or self.accept("^=")):
            raise self.error("expected = or ^= after the event name", "=", "^=")
        self.expect("SELECT", "to open the event body")
        guard = self.implication()
        self.expect("THEN", "after the guard")
        actions = self.assignments()
        self.expect("END", "to close the event")
        vars_ = [a.var for a in actions]
        if len(set(vars_)) != len(vars_):
            raise ParseError(f"event {name_tok.text} assigns a variable twice", name_tok.line,
                             name_tok.column)
        return Event(name_tok.text, guard, tuple(actions), name_tok.line)

    def fair_decl(self) -> FairnessDecl:
        name = self.ident("event name").text
        if self.accept("if"):
            return FairnessDecl(name, self.implication())
        return FairnessDecl(name)

    # predicates -------------------------------------------------------------

    def implication(self) -> Expr:
        left = self.equivalence()
        if self.accept("=>"):
            return Implies(left, self.implication())
        return left

    def equivalence(self) -> Expr:
        left = self.disjunction()
        while self.accept("<=>"):
            left = Iff(left, self.disjunction())
        return left

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.accept("or"):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.unary()
        while self.at("&"):
            # A typing conjunct ends the predicate part of an invariant item.
            nxt, after = self.peek(1), self.peek(2)
            if nxt.kind == "ident" and after.kind == "sym" and after.text == ":":
                break
            self.pos += 1
            left = And(left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("not"):
            return Not(self.unary())
        if self.accept("("):
            inner = self.implication()
            self.expect(")", "to close the parenthesis")
            return inner
        if self.accept("TRUE"):
            return TRUE
        if self.accept("FALSE"):
            return FALSE
        var = self.ident("variable name").text
        if self.accept("="):
            kind, v = self.value()
            return _Pending(var, v)
        if self.accept("/="):
            kind, v = self.value()
            return Not(_Pending(var, v))
        raise self.error("expected a comparison", "=", "/=")


@dataclass(frozen=True, slots=True)
class _Pending(Expr):
    """``x = y`` before we know whether ``y`` is a value or a variable."""

    var: str
    rhs: Value


def _resolve(e: Expr, variables: frozenset[str]) -> Expr:
    if isinstance(e, _Pending):
        if isinstance(e.rhs, str) and e.rhs in variables:
            return VarEq(e.var, e.rhs)
        return Atom(e.var, e.rhs)
    if isinstance(e, Not):
        return Not(_resolve(e.operand, variables))
    if isinstance(e, (And, Or, Implies, Iff)):
        return type(e)(_resolve(e.left, variables), _resolve(e.right, variables))
    return e


def parse_event_system(text: str, abstract: EventSystem | None = None) -> EventSystem:
    """Parse one machine or refinement.

    ``abstract`` supplies the sets and variables a refinement may refer to;
    without it, names that are not own variables are taken as values.
    """
    es, where = _Parser(text).machine()
    known = set(es.variables)
    if abstract is not None:
        known |= set(abstract.variables)
    known_f = frozenset(known)
    inv = tuple(i if isinstance(i, Typing) else _resolve(i, known_f) for i in es.invariant)
    init = tuple(_resolve_assign(a, known_f) for a in es.init)
    events = tuple(Event(e.name, _resolve(e.guard, known_f),
                         tuple(_resolve_assign(a, known_f) for a in e.actions), e.line)
                   for e in es.events)
    fair = tuple(FairnessDecl(d.event, None if d.condition is None else _resolve(d.condition, known_f))
                 for d in es.fairness)
    es = EventSystem(es.name, es.refines, es.sets, es.variables, inv, init, events, fair)
    _check_names(es, abstract, where)
    return es


def _resolve_assign(a: Assign, variables: frozenset[str]) -> Assign:
    if isinstance(a.value, str) and a.value in variables:
        return Assign(a.var, None, a.value)
    return a


def _check_names(es: EventSystem, abstract: EventSystem | None, where: dict) -> None:
    from ..logic import variables as vars_of

    own = set(es.variables)
    visible = own | (set(abstract.variables) if abstract is not None else set())
    set_names = {s.name for s in es.sets} | ({s.name for s in abstract.sets} if abstract else set())
    if es.refines is not None and abstract is not None and abstract.name != es.refines:
        raise ParseError(f"{es.name} refines {es.refines}, not {abstract.name}", 1, 1)

    def fail(msg: str) -> None:
        raise ParseError(msg, 1, 1)

    for item in es.invariant:
        if isinstance(item, Typing):
            if item.var not in own:
                fail(f"typing of unknown variable {item.var}")
            if item.set_name not in set_names:
                fail(f"unknown set {item.set_name}")
        else:
            bad = vars_of(item) - visible
            if bad:
                fail(f"invariant mentions unknown variable {sorted(bad)[0]}")
    for a in es.init:
        if a.var not in own:
            fail(f"initialisation assigns unknown variable {a.var}")
    for e in es.events:
        bad = vars_of(e.guard) - own
        if bad:
            fail(f"guard of {e.name} mentions unknown variable {sorted(bad)[0]}")
        for a in e.actions:
            if a.var not in own:
                fail(f"event {e.name} assigns unknown variable {a.var}")
            if a.source is not None and a.source not in own:
                fail(f"event {e.name} reads unknown variable {a.source}")
    names = {e.name for e in es.events}
    for d in es.fairness:
        if d.event not in names:
            fail(f"fairness refers to unknown event {d.event}")
        if d.condition is not None and vars_of(d.condition) - own:
            fail(f"fairness condition of {d.event} mentions unknown variables")


# -- printer ------------------------------------------------------------------

_B_PREC = {Implies: 1, Iff: 2, Or: 3, And: 4}


def to_b_text(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Atom):
        return f"{e.var} = {e.value}"
    if isinstance(e, VarEq):
        return f"{e.left} = {e.right}"
    if isinstance(e, TrueE):
        return "TRUE"
    if isinstance(e, FalseE):
        return "FALSE"
    if isinstance(e, Not):
        return "not " + to_b_text(e.operand, 9)
    if isinstance(e, _Pending):
        return f"{e.var} = {e.rhs}"
    ops = {And: "&", Or: "or", Implies: "=>", Iff: "<=>"}
    prec = _B_PREC[type(e)]
    if isinstance(e, Implies):
        text = f"{to_b_text(e.left, prec + 1)} => {to_b_text(e.right, prec)}"
    else:
        text = f"{to_b_text(e.left, prec)} {ops[type(e)]} {to_b_text(e.right, prec + 1)}"
    # Conjunctions are parenthesised inside invariants so that a following
    # typing conjunct cannot be misread.
    return f"({text})" if prec < parent or (parent and prec == parent and not isinstance(e, (And, Or))) else text


def _assigns_text(assigns) -> str:
    return " || ".join(f"{a.var} := {a.rhs_text()}" for a in assigns)


def pretty(es: EventSystem) -> str:
    """Canonical source text; ``parse`` then ``pretty`` is a fixpoint."""
    lines = [f"REFINEMENT {es.name} REFINES {es.refines}" if es.refines else f"MACHINE {es.name}"]
    if es.sets:
        lines.append("SETS")
        decls = []
        for s in es.sets:
            if s.is_range:
                decls.append(f"{s.name} = {s.values[0]}..{s.values[-1]}")
            else:
                decls.append(f"{s.name} = {{{', '.join(str(v) for v in s.values)}}}")
        lines.append("  " + ";\n  ".join(decls))
    lines.append("VARIABLES")
    lines.append("  " + ", ".join(es.variables))
    if es.invariant:
        lines.append("INVARIANT")
        items = []
        for item in es.invariant:
            if isinstance(item, Typing):
                items.append(f"{item.var} : {item.set_name}")
            else:
                items.append(to_b_text(item, 5))
        lines.append("  " + " &\n  ".join(items))
    lines.append("INITIALISATION")
    lines.append("  " + _assigns_text(es.init))
    lines.append("EVENTS")
    evs = [f"  {e.name} = SELECT {to_b_text(e.guard)}\n    THEN {_assigns_text(e.actions)} END"
           for e in es.events]
    lines.append(";\n".join(evs))
    if es.fairness:
        lines.append("FAIRNESS = {" + ", ".join(d.label() for d in es.fairness) + "}")
    lines.append("END")
    return "\n".join(lines) + "\n"
