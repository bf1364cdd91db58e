"""Verification of fair transition systems by refinement-based parts.

A refined fair transition system is split into one part per abstract
state; a PLTL property whose negation has a suitably shaped Büchi
automaton holds globally once ``fairness => property`` holds on every part.
"""
from .buchi import classify_abmod, classify_formula, ltl_to_buchi
from .core import (FairnessConstraint, FairTransitionSystem, Lasso, Transition, TransitionSystem,
                   is_computation)
from .frontend import GluingMap, derive_mu, enumerate_system, parse_event_system
from .modelcheck import (demonstrate_naive_unsoundness, oracle_check, verify_by_parts,
                         verify_global, verify_under_fairness)
from .partition import naive_parts, refinement_parts
from .pltl import eval_lasso, fairness_formula, parse_formula
from .refinement import check_refinement

__version__ = "0.1.0"

__all__ = [
    "FairTransitionSystem", "FairnessConstraint", "GluingMap", "Lasso", "Transition",
    "TransitionSystem", "check_refinement", "classify_abmod", "classify_formula", "derive_mu",
    "demonstrate_naive_unsoundness", "enumerate_system", "eval_lasso", "fairness_formula",
    "is_computation", "ltl_to_buchi", "naive_parts", "oracle_check", "parse_event_system",
    "parse_formula", "refinement_parts", "verify_by_parts", "verify_global",
    "verify_under_fairness",
]
