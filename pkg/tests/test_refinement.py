import random

import pytest

from fairparts.core import (TAU, FairTransitionSystem, Transition, renumber, tau_project)
from fairparts.corpus import chained, didactic, teg1, without_constraint
from fairparts.frontend import GluingMap
from fairparts.modelcheck import enumerate_lassos
from fairparts.refinement import (check_fairness_preservation, check_refinement, check_tau_divergence,
                                  compute_rho, format_verdict)


def identity(fts):
    n = fts.ts.n_states
    return GluingMap(tuple(range(n)), n)


def names(ts, states):
    return sorted((ts.name(s) for s in states), key=lambda n: int(n[1:]))


class TestT1:
    def test_passes(self):
        pair = teg1()
        v = check_refinement(pair.abstract, pair.refined, pair.mu)
        assert v.passed, format_verdict(v, pair.abstract, pair.refined)
        assert v.failed == ()
        assert [c.clause for c in v.clauses] == ["initial", "1", "2", "3", "4", "5"]

    def test_gluing_invariant_accepted(self):
        pair = teg1()
        v = check_refinement(pair.abstract, pair.refined, pair.invariant)
        assert v.passed and v.mu == pair.mu

    def test_rho_relates_every_state(self):
        pair = teg1()
        w = compute_rho(pair.abstract, pair.refined, pair.mu)
        assert w.rho == {(s, pair.mu[s]) for s in range(14)}
        assert not w.removed

    def test_sc2_and_t1(self):
        pair = teg1()
        w = compute_rho(pair.abstract, pair.refined, pair.mu)
        assert names(pair.refined.ts, w.sc2) == ["r0", "r5", "r10", "r12"]
        (f1,) = pair.abstract.fairness
        for s2, images in w.t1.items():
            assert s2 in w.sc2
            assert images and images <= f1.transitions

    def test_drop_f22_fails_clause_2(self):
        pair = teg1()
        fts2 = without_constraint(pair.refined, pair.constraint("F22"))
        v = check_refinement(pair.abstract, fts2, pair.mu)
        assert v.failed == ("2",)
        cyc = v.clause("2").cycle
        assert names(fts2.ts, {t.src for t in cyc}) == ["r3", "r4"]
        assert {t.action for t in cyc} <= {"Rblocksends", "Cacksends"}

    def test_eject_only_fairness_fails_clause_2(self):
        pair = teg1()
        fts2 = pair.refined.with_fairness([pair.refined.fairness[pair.constraint("F1'")]])
        report = check_tau_divergence(fts2, pair.abstract.ts.actions)
        assert not report.passed
        assert names(fts2.ts, {t.src for t in report.cycle}) == ["r3", "r4"]

    def test_drop_eject_fairness_fails_clause_4(self):
        pair = teg1()
        fts2 = without_constraint(pair.refined, pair.constraint("F1'"))
        v = check_refinement(pair.abstract, fts2, pair.mu)
        assert not v.passed
        assert "4" in v.failed and "2" not in v.failed
        c4 = v.clause("4")
        assert c4.cycle and c4.cycle[0].src == c4.cycle[-1].dst
        assert all(t.action != "Eject" for t in c4.cycle)

    def test_report_text(self):
        pair = teg1()
        fts2 = without_constraint(pair.refined, pair.constraint("F22"))
        text = format_verdict(check_refinement(pair.abstract, fts2, pair.mu), pair.abstract, fts2)
        assert text.splitlines()[0] == "FAIL"
        assert "clause 2: violated" in text
        assert "cycle: r3" in text or "cycle: r4" in text


class TestSmallCases:
    def test_identity(self):
        fts = teg1().abstract
        v = check_refinement(fts, fts, identity(fts))
        assert v.passed
        assert v.witness.rho == {(s, s) for s in fts.ts.states}

    def test_unmatched_abstract_step_removes_pair(self):
        fts1 = teg1().abstract
        ts = fts1.ts
        extra = Transition(3, "Rsends", 1)
        fts2 = FairTransitionSystem(ts.with_transitions(ts.transitions + (extra,)), fts1.fairness)
        w = compute_rho(fts1, fts2, identity(fts1))
        assert (3, 3) not in w.rho
        assert w.removed[3].clause == "1"
        v = check_refinement(fts1, fts2, identity(fts1))
        assert "1" in v.failed

    def test_initial_state_glued_to_non_initial(self):
        fts1 = teg1().abstract
        ts = fts1.ts
        moved = type(ts)(ts.variables, ts.domains, ts.labels, frozenset({1}), ts.transitions,
                         ts.actions, ts.names)
        fts2 = FairTransitionSystem(moved, fts1.fairness)
        v = check_refinement(fts1, fts2, identity(fts1))
        assert v.failed == ("initial",)

    def test_no_abstract_fairness(self):
        pair = teg1()
        fts1 = pair.abstract.with_fairness(())
        v = check_refinement(fts1, pair.refined, pair.mu)
        assert v.passed
        assert not any(v.witness.t1.values())

    def test_no_new_actions_has_no_divergence(self):
        fts = teg1().abstract
        assert check_tau_divergence(fts, fts.ts.actions).passed

    def test_didactic(self):
        d = didactic()
        v = check_refinement(d.abstract, d.refined, d.mu)
        assert v.passed
        assert len(v.witness.rho) == 6

    def test_didactic_without_fairness_diverges(self):
        d = didactic()
        fts2 = d.refined.with_fairness(())
        v = check_refinement(d.abstract, fts2, d.mu)
        assert "2" in v.failed

    def test_chained(self):
        fts1, fts2, mu = chained(3)
        v = check_refinement(fts1, fts2, mu)
        assert v.passed
        assert len(v.witness.rho) == 42

    def test_mismatched_map_rejected(self):
        pair = teg1()
        with pytest.raises(ValueError):
            check_refinement(pair.abstract, pair.refined, GluingMap((0,) * 13, 4))


class TestProperties:
    @pytest.mark.parametrize("seed", range(5))
    def test_rho_independent_of_numbering(self, seed):
        pair = teg1()
        order = list(range(14))
        random.Random(seed).shuffle(order)
        fts2 = renumber(pair.refined, order)
        mu = GluingMap(tuple(pair.mu[s] for s in order), 4)
        w = compute_rho(pair.abstract, fts2, mu)
        assert {(order[s], a) for s, a in w.rho} == compute_rho(pair.abstract, pair.refined, pair.mu).rho
        assert check_refinement(pair.abstract, fts2, mu).passed

    def test_fairness_clauses_consistent_with_full_check(self):
        pair = teg1()
        w = compute_rho(pair.abstract, pair.refined, pair.mu)
        c4, c5 = check_fairness_preservation(pair.abstract, pair.refined, w, pair.mu)
        assert c4.passed and c5.passed

    def test_trace_containment(self):
        """Every refined execution maps to an abstract one once hidden steps are dropped."""
        pair = teg1()
        ts1 = pair.abstract.ts
        act1 = ts1.actions
        tts = tau_project(pair.refined.ts, act1)
        steps = ts1.transition_set
        count = 0
        for lasso in enumerate_lassos(tts, 12):
            states = [s for s, _ in lasso.prefix + lasso.cycle] + [lasso.cycle[0].state]
            for (s, a), nxt in zip(lasso.prefix + lasso.cycle, states[1:]):
                if a == TAU:
                    assert pair.mu[s] == pair.mu[nxt]
                else:
                    assert Transition(pair.mu[s], a, pair.mu[nxt]) in steps
            count += 1
        assert count > 1000


class TestAgainstLassos:
    """The graph decisions of clauses 2 and 4 against bounded computations."""

    def test_divergence_on_random_systems(self):
        from fairparts.core import is_computation
        from generators import random_fts
        rng = random.Random(21)
        seen = {True: 0, False: 0}
        for _ in range(150):
            fts = random_fts(rng, 5)
            report = check_tau_divergence(fts, {"a"})
            hidden_computation = any(
                all(a != "a" for _, a in lasso.cycle) and is_computation(fts, lasso)
                for lasso in enumerate_lassos(fts.ts, 12))
            assert report.passed == (not hidden_computation)
            seen[report.passed] += 1
        assert seen[True] and seen[False]

    @pytest.mark.parametrize("dropped", [None, "F1'"])
    def test_preservation_on_t1(self, dropped):
        from fairparts.core import is_computation
        pair = teg1()
        fts2 = pair.refined if dropped is None else without_constraint(pair.refined, pair.constraint(dropped))
        v = check_refinement(pair.abstract, fts2, pair.mu)
        w = v.witness
        (f1,) = pair.abstract.fairness

        def refines(s, a, d):
            return Transition(pair.mu[s], a, pair.mu[d]) in f1.transitions

        violating = False
        for lasso in enumerate_lassos(fts2.ts, 14):
            if not is_computation(fts2, lasso):
                continue
            cycle = list(lasso.cycle)
            nexts = [st for st, _ in cycle[1:]] + [cycle[0].state]
            if any(s in w.sc2 for s, _ in cycle) and \
                    not any(refines(s, a, d) for (s, a), d in zip(cycle, nexts)):
                violating = True
                break
        assert v.clause("4").passed == (not violating)
