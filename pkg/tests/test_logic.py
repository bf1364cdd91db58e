import pickle

import pytest
from hypothesis import given, settings

from fairparts.logic import (FALSE, TRUE, And, Atom, Implies, Not, Or, UnresolvedAtom, VarEq, conj,
                             conjuncts, depth, disj, holds, implies_prop, is_satisfiable, is_valid,
                             partial_eval, to_text, variables)
from fairparts.pltl import parse_formula

from generators import formulas

x1, x2, y2 = Atom("x", 1), Atom("x", 2), Atom("y", 2)


class TestHolds:
    def test_atoms_and_connectives(self):
        v = {"x": 1, "y": 2}
        assert holds(And(x1, y2), v)
        assert not holds(And(x1, x2), v)
        assert holds(Or(x2, y2), v)
        assert holds(Implies(x2, FALSE), v)

    def test_pair_semantics(self):
        assert holds(VarEq("a", "b"), {"a": "in"}, {"b": "in"})
        assert not holds(VarEq("a", "b"), {"a": "in"}, {"b": "out"})

    def test_unresolved(self):
        with pytest.raises(UnresolvedAtom):
            holds(Atom("z", 0), {"x": 1})


class TestImpliesProp:
    def test_reflexive(self):
        assert implies_prop(x1, x1)

    def test_conjunction_implies_conjunct(self):
        assert implies_prop(And(x1, y2), x1)

    def test_distinct_values(self):
        assert not implies_prop(x1, x2, {"x": (1, 2)})

    def test_consistency_makes_conflicting_atoms_unsatisfiable(self):
        assert not is_satisfiable(And(x1, x2))
        assert implies_prop(And(x1, x2), FALSE)

    def test_exhaustive_domain(self):
        assert is_valid(Or(x1, x2), {"x": (1, 2)})
        assert not is_valid(Or(x1, x2))


class TestPartialEval:
    def test_folds_bound_variables(self):
        assert partial_eval(And(x1, y2), {"x": 1}) == y2
        assert partial_eval(And(x1, y2), {"x": 2}) == FALSE

    def test_vareq_becomes_atom(self):
        assert partial_eval(VarEq("a", "b"), {"b": "in"}) == Atom("a", "in")


class TestStructure:
    def test_conj_disj_empty(self):
        assert conj([]) == TRUE
        assert disj([]) == FALSE

    def test_conjuncts_flatten(self):
        assert conjuncts(And(And(x1, y2), x2)) == [x1, y2, x2]

    def test_variables_and_depth(self):
        e = parse_formula("[](x=1 -> <>y=2)")
        assert variables(e) == {"x", "y"}
        assert depth(e) == 3

    def test_hash_is_stable_and_pickles(self):
        e = parse_formula("[](x=1 -> <>(y=2 U x=2))")
        again = pickle.loads(pickle.dumps(e))
        assert again == e and hash(again) == hash(e)
        assert len({e, again}) == 1


class TestText:
    @settings(max_examples=200, deadline=None)
    @given(formulas(4))
    def test_text_round_trip(self, e):
        assert parse_formula(to_text(e)) == e

    def test_precedence_parenthesised(self):
        e = And(Or(x1, y2), Not(x2))
        assert to_text(e) == "(x=1 || y=2) && !x=2"
