"""Guarded-command event systems: parsing, enumeration and gluing."""
from __future__ import annotations

from pathlib import Path

from .explore import (EnumerationError, GluingError, GluingMap, NonFunctional, NonTotal,
                      derive_mu, domains_of, enumerate_system, eval_pair, gluing_invariant,
                      identity_gluing, own_invariant)
from .syntax import (Assign, Event, EventSystem, FairnessDecl, ParseError, SetDecl, Typing,
                     parse_event_system, pretty, to_b_text, tokenize)

EXTENSION = ".evs"

# The operation name used throughout the documentation.
enumerate = enumerate_system  # noqa: A001


def find_abstract(path: Path, es_name: str) -> Path:
    """Locate ``<name>.evs`` next to a refinement file."""
    candidate = path.with_name(es_name + EXTENSION)
    if not candidate.exists():
        raise FileNotFoundError(f"abstract machine {es_name} not found at {candidate}")
    return candidate


def load_machine(path: str | Path, abstract: EventSystem | None = None) -> EventSystem:
    path = Path(path)
    return parse_event_system(path.read_text(encoding="utf-8"), abstract)


def load_refinement(path: str | Path, abstract_path: str | Path | None = None
                    ) -> tuple[EventSystem, EventSystem]:
    """Parse a refinement and the machine it refines; returns (abstract, refined)."""
    path = Path(path)
    header = parse_header(path.read_text(encoding="utf-8"))
    if header is None:
        raise ParseError("not a refinement", 1, 1, ("REFINEMENT",))
    apath = Path(abstract_path) if abstract_path is not None else find_abstract(path, header)
    abstract = load_machine(apath)
    return abstract, load_machine(path, abstract)


def parse_header(text: str) -> str | None:
    """Name of the refined machine, or None for a plain MACHINE."""
    toks = tokenize(text)
    if toks and toks[0].text == "REFINEMENT" and len(toks) > 3 and toks[2].text == "REFINES":
        return toks[3].text
    return None


__all__ = [
    "Assign", "EXTENSION", "EnumerationError", "Event", "EventSystem", "FairnessDecl", "GluingError",
    "GluingMap", "NonFunctional", "NonTotal", "ParseError", "SetDecl", "Typing", "derive_mu",
    "domains_of", "enumerate", "enumerate_system", "eval_pair", "find_abstract", "gluing_invariant",
    "identity_gluing", "load_machine", "load_refinement", "own_invariant", "parse_event_system",
    "parse_header", "pretty", "to_b_text", "tokenize",
]
