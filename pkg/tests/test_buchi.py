import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairparts.buchi import (BuchiAutomaton, BuchiTransition, accepts, accepts_word, classify_abmod,
                             classify_formula, clause2_by_runs, implies_prop, ltl_to_buchi, prune)
from fairparts.corpus import teg1
from fairparts.logic import TRUE, Atom, Not
from fairparts.modelcheck import enumerate_lassos
from fairparts.pltl import eval_lasso, eval_word, parse_formula

from generators import formulas, random_formula, random_ts, valuations

DOMAINS = {v: (0, 1) for v in "pqrs"}
IN_PROPERTIES = ["[](p=1 -> X q=1)", "[](p=1 -> <>q=1)", "[](p=1 -> q=1 U r=1)", "[]!p=1"]
FAIRNESS_PROPERTY = "([]([]<>p=1 -> <>q=1)) -> [](r=1 -> <>s=1)"


def word(*pairs):
    return [{"p": a, "q": b} for a, b in pairs]


def negated(text):
    return Not(parse_formula(text))


class TestTranslation:
    def test_true_accepts_everything(self):
        b = ltl_to_buchi(TRUE, "accepting")
        assert b.n_states == 1
        assert b.accepting == {0}
        assert b.transitions == (BuchiTransition(0, TRUE, 0),)
        # The default policy keeps the transient initial state apart.
        b = ltl_to_buchi(TRUE)
        assert accepts_word(b, [], word((0, 0)))
        assert accepts_word(b, word((1, 0)), word((0, 1), (1, 1)))

    def test_negated_response(self):
        b = ltl_to_buchi(negated("[](p=1 -> <>q=1)"))
        assert accepts_word(b, word((1, 0)), word((0, 0)))
        assert not accepts_word(b, [], word((1, 1)))

    def test_negated_next_response(self):
        b = ltl_to_buchi(negated("[](p=1 -> X q=1)"))
        assert accepts_word(b, word((0, 1), (1, 1), (0, 0)), word((0, 1)))
        assert not accepts_word(b, word((1, 0)), word((0, 1)))

    def test_eventually_never_seen(self):
        b = ltl_to_buchi(parse_formula("<>p=1"))
        assert not accepts_word(b, word((0, 0)), word((0, 1)))
        assert accepts_word(b, word((0, 0)), word((1, 1)))

    @settings(max_examples=200, deadline=None)
    @given(formulas(3), valuations(3, 3))
    def test_acceptance_matches_evaluation(self, e, w):
        assert accepts_word(ltl_to_buchi(e), *w) == eval_word(e, *w)

    @pytest.mark.parametrize("policy", ["accepting", "rejecting"])
    def test_transient_policy_keeps_language(self, policy):
        rng = random.Random(3)
        for _ in range(30):
            e = random_formula(rng, 3)
            b1, b2 = ltl_to_buchi(e), ltl_to_buchi(e, policy)
            for _ in range(10):
                prefix = word(*[(rng.randint(0, 1), rng.randint(0, 1)) for _ in range(rng.randint(0, 3))])
                cycle = word(*[(rng.randint(0, 1), rng.randint(0, 1)) for _ in range(rng.randint(1, 3))])
                assert accepts_word(b1, prefix, cycle) == accepts_word(b2, prefix, cycle)

    def test_system_lassos(self):
        rng = random.Random(9)
        for _ in range(20):
            ts = random_ts(rng, max_states=4)
            e = random_formula(rng, 3)
            b = ltl_to_buchi(e)
            for lasso in enumerate_lassos(ts, 6):
                assert accepts(b, lasso, ts) == eval_lasso(e, lasso, ts)

    def test_deterministic_numbering(self):
        e = negated("[](p=1 -> q=1 U r=1)")
        ltl_to_buchi.cache_clear()
        first = ltl_to_buchi(e).to_dot()
        ltl_to_buchi.cache_clear()
        assert ltl_to_buchi(e).to_dot() == first

    def test_dot_export(self):
        dot = ltl_to_buchi(negated("[](p=1 -> <>q=1)")).to_dot("resp")
        assert dot.startswith('digraph "resp" {')
        assert "doublecircle" in dot and "init -> 0;" in dot


class TestImpliesProp:
    def test_examples(self):
        p, x1, x2 = Atom("p", 1), Atom("x", 1), Atom("x", 2)
        assert implies_prop(p, p)
        assert implies_prop(parse_formula("x=1 && y=2"), x1)
        assert not implies_prop(x1, x2, {"x": (1, 2)})


class TestClassification:
    @pytest.mark.parametrize("text", IN_PROPERTIES)
    def test_in(self, text):
        verdict, b = classify_formula(negated(text), DOMAINS)
        assert verdict.member, str(verdict)
        assert clause2_by_runs(b)

    def test_fairness_property_not_in(self):
        verdict, _ = classify_formula(negated(FAIRNESS_PROPERTY), DOMAINS)
        assert not verdict.member
        assert verdict.clause == 1
        assert verdict.witness and verdict.reason
        assert "translation" in verdict.hint
        assert str(verdict).startswith("NOT-IN-ABmod (clause 1")

    def test_t1_properties(self):
        pair = teg1()
        doms = pair.refined.ts.domains
        for name in ("P", "P1", "P2", "P3", "P4", "P5", "P6", "P'"):
            verdict, _ = classify_formula(Not(pair.formula(name)), doms)
            assert verdict.member, name

    def test_clause3_violation(self):
        p, q = Atom("p", 1), Atom("q", 1)
        b = BuchiAutomaton(2, 0, (BuchiTransition(0, TRUE, 0), BuchiTransition(0, p, 1),
                                  BuchiTransition(1, q, 1)), frozenset({1}))
        v = classify_abmod(b, DOMAINS)
        assert (v.member, v.clause) == (False, 3)

    def test_clause2_violation(self):
        p, q = Atom("p", 1), Atom("q", 1)
        b = BuchiAutomaton(3, 0, (BuchiTransition(0, TRUE, 0), BuchiTransition(0, p, 1),
                                  BuchiTransition(1, q, 2), BuchiTransition(2, TRUE, 2)),
                           frozenset({2}))
        assert classify_abmod(b, DOMAINS).member
        worse = BuchiAutomaton(4, 0, b.transitions + (BuchiTransition(2, q, 3), BuchiTransition(3, TRUE, 2)),
                               frozenset({2}))
        v = classify_abmod(worse, DOMAINS)
        assert (v.member, v.clause) == (False, 2)
        assert not clause2_by_runs(worse)

    @settings(max_examples=60, deadline=None)
    @given(formulas(3))
    def test_clause2_agrees_with_run_check(self, e):
        b = ltl_to_buchi(Not(e))
        loops = any(t.dst == b.initial and t.guard == TRUE for t in b.out[b.initial])
        if loops:
            structural = classify_abmod(b, DOMAINS).clause != 2
            assert structural == clause2_by_runs(b)

    @settings(max_examples=60, deadline=None)
    @given(formulas(3), st.randoms(use_true_random=False))
    def test_renaming_invariance(self, e, rng):
        b = ltl_to_buchi(Not(e))
        perm = list(range(b.n_states))
        rng.shuffle(perm)
        assert classify_abmod(b.relabel(perm), DOMAINS).member == classify_abmod(b, DOMAINS).member

    @settings(max_examples=60, deadline=None)
    @given(formulas(3))
    def test_unreachable_states_ignored(self, e):
        b = ltl_to_buchi(Not(e))
        n = b.n_states
        junk = BuchiAutomaton(n + 1, b.initial,
                              b.transitions + (BuchiTransition(n, TRUE, n),), b.accepting | {n})
        assert prune(junk).n_states == n
        v1, v2 = classify_abmod(prune(junk), DOMAINS), classify_abmod(b, DOMAINS)
        assert (v1.member, v1.clause) == (v2.member, v2.clause)
