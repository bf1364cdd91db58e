import random

import pytest

from fairparts.buchi import ltl_to_buchi
from fairparts.core import is_computation
from fairparts.corpus import naive_assignment, teg1, without_constraint
from fairparts.logic import TRUE, Implies, Not
from fairparts.modelcheck import (ALGORITHMIC, FORMULA, HOLDS, INCONCLUSIVE, OracleBudgetExceeded,
                                  Product, TableRow, UnknownVariable, demonstrate_naive_unsoundness,
                                  enumerate_lassos, format_table, nested_dfs, oracle_check,
                                  scc_emptiness, verify_by_parts, verify_global,
                                  verify_under_fairness)
from fairparts.partition import refinement_parts
from fairparts.pltl import eval_lasso, fairness_formula, parse_formula
from fairparts.refinement import RefinementRefused

from generators import random_formula, random_fts, random_ts


def assert_valid_counterexample(fts_or_ts, formula, verdict, fair=False):
    ts = fts_or_ts.ts if fair else fts_or_ts
    lasso = verdict.counterexample
    assert lasso is not None
    lasso.validate(ts, from_initial=True)
    assert not eval_lasso(formula, lasso, ts)
    if fair:
        assert is_computation(fts_or_ts, lasso)


class TestGlobal:
    def test_ejected_card_comes_back(self):
        ts = teg1().abstract.ts
        e = parse_formula("[](Cstatus1=out -> <>Cstatus1=in)")
        assert verify_global(ts, e).holds
        assert oracle_check(ts, e, fair=False).holds

    def test_true_holds(self):
        assert verify_global(teg1().refined.ts, TRUE).holds

    def test_unfair_violation_without_fairness(self):
        ts = teg1().abstract.ts
        e = parse_formula("<>Cstatus1=out")
        v = verify_global(ts, e)
        assert not v.holds
        assert_valid_counterexample(ts, e, v)

    def test_unknown_variable(self):
        with pytest.raises(UnknownVariable, match="Nope"):
            verify_global(teg1().abstract.ts, parse_formula("[]Nope=1"))

    def test_stats(self):
        v = verify_global(teg1().abstract.ts, parse_formula("[]<>Sender1=card"), cross_check=True)
        assert {"automaton_states", "product_states", "product_size", "wall_time"} <= set(v.stats)

    def test_q_prime_fails_globally(self):
        pair = teg1()
        fts = pair.refined
        v = verify_under_fairness(fts, pair.formula("P'"), FORMULA)
        assert not v.holds
        assert_valid_counterexample(fts.ts, Implies(fairness_formula(fts), pair.formula("P'")), v)
        assert is_computation(fts, v.counterexample)
        assert pair.state("r0") in {s for s, _ in v.counterexample.prefix + v.counterexample.cycle}


class TestEmptinessProcedures:
    def test_nested_dfs_matches_scc(self):
        rng = random.Random(2)
        for _ in range(150):
            ts = random_ts(rng, max_states=5)
            b = ltl_to_buchi(Not(random_formula(rng, 3)))
            product = Product(ts, b)
            lasso, _ = nested_dfs(product)
            empty, _ = scc_emptiness(product)
            assert empty == (lasso is None)

    def test_counterexamples_are_valid(self):
        rng = random.Random(4)
        failures = 0
        for _ in range(150):
            ts = random_ts(rng, max_states=5)
            e = random_formula(rng, 3)
            v = verify_global(ts, e, cross_check=True)
            if not v.holds:
                assert_valid_counterexample(ts, e, v)
                failures += 1
        assert failures > 20


class TestFairness:
    def test_p_holds_in_both_modes(self):
        pair = teg1()
        for mode in (FORMULA, ALGORITHMIC):
            assert verify_under_fairness(pair.refined, pair.formula("P"), mode).holds

    def test_p5_fails(self):
        pair = teg1()
        v = verify_under_fairness(pair.refined, pair.formula("P5"), ALGORITHMIC)
        assert not v.holds
        assert_valid_counterexample(pair.refined, pair.formula("P5"), v, fair=True)

    def test_no_constraints_is_plain_check(self):
        pair = teg1()
        fts = pair.abstract.with_fairness(())
        e = parse_formula("[]<>Cstatus1=out")
        for mode in (FORMULA, ALGORITHMIC):
            assert verify_under_fairness(fts, e, mode).holds == verify_global(fts.ts, e).holds

    def test_modes_agree_on_single_transition_constraints(self):
        rng = random.Random(8)
        for _ in range(60):
            fts = random_fts(rng, 5, single=True, distinct_labels=True)
            e = _on_x(rng, fts)
            a = verify_under_fairness(fts, e, FORMULA)
            b = verify_under_fairness(fts, e, ALGORITHMIC)
            assert a.holds == b.holds
            if not b.holds:
                assert_valid_counterexample(fts, e, b, fair=True)

    def test_budget_fallback(self):
        pair = teg1()
        v = verify_under_fairness(pair.refined, pair.formula("P"), node_budget=10)
        assert v.holds
        assert v.stats["fallback"] is True
        assert v.stats["fairness_mode"] == ALGORITHMIC

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            verify_under_fairness(teg1().abstract, TRUE, "sometimes")


def _on_x(rng, fts):
    """A random depth-2 formula over the state variable ``x``."""
    n = len(fts.ts.domains["x"])
    shapes = ["[]<>{a}", "<>[]{a}", "[]({a} -> <>{b})", "{a} U {b}", "[]({a} -> X {b})", "<>({a} && X {b})"]
    text = rng.choice(shapes)
    return parse_formula(text.format(a=f"x={rng.randrange(n)}", b=f"x={rng.randrange(n)}"))


class TestOracle:
    def test_lassos_are_distinct_and_valid(self):
        ts = teg1().abstract.ts
        seen = set()
        for lasso in enumerate_lassos(ts, 8):
            lasso.validate(ts, from_initial=True)
            key = (lasso.prefix, lasso.cycle)
            assert key not in seen
            seen.add(key)
        assert len(seen) == 99

    def test_agrees_with_checker(self):
        rng = random.Random(6)
        for _ in range(60):
            ts = random_ts(rng, max_states=4)
            e = random_formula(rng, 3)
            assert oracle_check(ts, e, bound=10, fair=False).holds == verify_global(ts, e).holds

    def test_fair_oracle_on_abstract(self):
        fts = teg1().abstract
        e = parse_formula("[]<>Cstatus1=out")
        assert oracle_check(fts, e).holds
        assert not oracle_check(fts, e, fair=False).holds

    def test_p5_counterexample(self):
        pair = teg1()
        v = oracle_check(pair.refined, pair.formula("P5"), bound=10)
        assert not v.holds
        assert is_computation(pair.refined, v.counterexample)

    def test_budget(self):
        with pytest.raises(OracleBudgetExceeded):
            oracle_check(teg1().refined, TRUE, bound=16, max_lassos=100)


class TestByParts:
    def test_p_holds_on_every_part(self):
        pair = teg1()
        report = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P"))
        assert report.aggregate == HOLDS
        assert report.precondition_met
        names = {r.part.name: [pair.refined.fairness[i].name for i in r.relevant] for r in report.results}
        assert names == {"s0": [pair.refined.fairness[2].name], "s1": [pair.refined.fairness[1].name],
                         "s2": [], "s3": []}

    def test_p6_fails_on_two_parts(self):
        pair = teg1()
        report = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P6"))
        assert report.aggregate == INCONCLUSIVE
        assert report.failing == ("s0", "s1")
        for name in report.failing:
            r = report.result(name)
            assert_valid_counterexample(r.part.ts, Implies(fairness_formula(pair.refined, r.relevant),
                                                           pair.formula("P6")), r.verdict)

    def test_workers_do_not_change_the_report(self):
        pair = teg1()
        one = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P1"), workers=1)
        four = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P1"), workers=4)
        assert [(r.part.name, r.holds, r.relevant, r.verdict.counterexample) for r in one.results] == \
            [(r.part.name, r.holds, r.relevant, r.verdict.counterexample) for r in four.results]

    def test_refused_on_broken_refinement(self):
        pair = teg1()
        broken = without_constraint(pair.refined, pair.constraint("F22"))
        with pytest.raises(RefinementRefused) as info:
            verify_by_parts(pair.abstract, broken, pair.mu, pair.formula("P"))
        assert info.value.verdict is not None and info.value.verdict.failed == ("2",)

    def test_precondition_flag_outside_class(self):
        pair = teg1()
        e = parse_formula("[]([]<>SenderF2=card -> <>Cstatus2=out) -> [](CardF2=bl -> <>CardF2=lb)")
        report = verify_by_parts(pair.abstract, pair.refined, pair.mu, e, mode=ALGORITHMIC)
        assert not report.precondition_met


class TestNaive:
    def test_paradox(self):
        pair = teg1()
        report = demonstrate_naive_unsoundness(pair.refined, naive_assignment(pair), pair.formula("P'"))
        assert not report.global_verdict.holds
        assert report.parts_hold
        assert report.paradox

    def test_single_block(self):
        pair = teg1()
        ts = pair.refined.ts
        report = demonstrate_naive_unsoundness(pair.refined, {t: 0 for t in ts.transitions},
                                               pair.formula("P'"), mode=ALGORITHMIC)
        assert not report.paradox
        assert not report.parts_hold

    def test_refinement_parts_catch_the_violation(self):
        pair = teg1()
        parts = refinement_parts(pair.refined, pair.mu, pair.abstract)
        report = demonstrate_naive_unsoundness(pair.refined, None, pair.formula("P'"), mode=ALGORITHMIC,
                                               parts=parts)
        assert not report.paradox
        assert [r.part.name for r in report.results if not r.holds] == ["s1"]
        by_parts = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P'"))
        assert by_parts.failing == ("s1",)

    def test_class_blocks_without_fair_closure_still_mislead(self):
        """Blocks of class-sourced transitions lack the fair continuations of a part."""
        pair = teg1()
        ts = pair.refined.ts
        blocks = {t: pair.mu[t.src] for t in ts.transitions}
        report = demonstrate_naive_unsoundness(pair.refined, blocks, pair.formula("P'"), mode=ALGORITHMIC)
        assert report.paradox


class TestTable:
    def test_format(self):
        rows = [TableRow("P1", True, True, ()), TableRow("P5", False, False, ("s1",)),
                TableRow("P6", True, False, ("s0", "s1"))]
        text = format_table(rows)
        lines = text.splitlines()
        assert lines[0].split() == ["Properties", "Globally", "true", "Globally", "false", "Verified", "by",
                                    "parts"]
        assert lines[1].split() == ["3", "2", "1", "1"]
        assert "fails on s0, s1" in lines[-1]
