import json

import pytest

from fairparts.core import SKIP, Transition, is_computation, loads
from fairparts.corpus import didactic, naive_assignment, teg1, without_constraint
from fairparts.frontend import GluingMap
from fairparts.modelcheck import enumerate_lassos
from fairparts.partition import (CLASS, FAIR_CLOSURE, FRONTIER, naive_parts, refinement_parts)
from fairparts.refinement import RefinementRefused

from oracles import Decomposer, part_by_definition


def named(ts, states):
    return sorted((ts.name(s) for s in states), key=lambda n: int(n[1:]))


def t1_parts(strict=False):
    pair = teg1()
    return pair, {p.name: p for p in refinement_parts(pair.refined, pair.mu, pair.abstract,
                                                         strict_initial=strict)}


class TestT1Parts:
    def test_one_part_per_abstract_state(self):
        pair, parts = t1_parts()
        assert list(parts) == ["s0", "s1", "s2", "s3"]

    def test_part_of_s0(self):
        pair, parts = t1_parts()
        ts = pair.refined.ts
        part = parts["s0"]
        assert named(ts, part.members(CLASS)) == ["r0", "r2", "r3", "r4", "r10"]
        assert named(ts, part.members(FRONTIER)) == ["r1", "r5", "r11", "r12"]
        assert named(ts, part.members(FAIR_CLOSURE)) == ["r6", "r13"]
        assert named(ts, part.initial) == ["r0", "r10"]

    def test_classes_and_frontiers(self):
        pair, parts = t1_parts()
        ts = pair.refined.ts
        got = {k: (named(ts, p.members(CLASS)), named(ts, p.members(FRONTIER)),
                   named(ts, p.members(FAIR_CLOSURE))) for k, p in parts.items()}
        assert got == {
            "s0": (["r0", "r2", "r3", "r4", "r10"], ["r1", "r5", "r11", "r12"], ["r6", "r13"]),
            "s1": (["r5", "r7", "r8", "r9", "r12"], ["r0", "r6", "r10", "r13"], ["r1", "r11"]),
            "s2": (["r6", "r13"], ["r0"], ["r1"]),
            "s3": (["r1", "r11"], ["r0"], []),
        }

    @pytest.mark.parametrize("name", ["s0", "s1", "s2", "s3"])
    def test_matches_set_definition(self, name):
        pair, parts = t1_parts()
        part = parts[name]
        states, initial, trans = part_by_definition(pair.refined, pair.mu, part.key)
        assert part.states == states
        assert part.initial == initial
        assert part.transitions == trans

    def test_strict_initial_agrees_on_t1(self):
        _, loose = t1_parts()
        _, strict = t1_parts(strict=True)
        assert {k: p.initial for k, p in loose.items()} == {k: p.initial for k, p in strict.items()}

    def test_every_transition_covered(self):
        pair, parts = t1_parts()
        covered = set().union(*(p.transitions for p in parts.values()))
        assert set(pair.refined.ts.transitions) <= covered

    def test_size_bounds(self):
        pair, parts = t1_parts()
        assert len(parts) <= pair.abstract.ts.n_states
        for p in parts.values():
            assert p.ts.n_states == len(p.members(CLASS)) + len(p.members(FRONTIER)) \
                + len(p.members(FAIR_CLOSURE))
            assert p.ts.n_states <= pair.refined.ts.n_states

    def test_parts_are_total(self):
        _, parts = t1_parts()
        assert all(p.ts.is_total() for p in parts.values())

    def test_refused_without_refinement(self):
        pair = teg1()
        broken = without_constraint(pair.refined, pair.constraint("F22"))
        with pytest.raises(RefinementRefused):
            refinement_parts(broken, pair.mu, pair.abstract)

    def test_dumps_carries_provenance(self):
        pair, parts = t1_parts()
        text = parts["s2"].dumps()
        doc = json.loads(text)
        assert doc["part"] == "s2"
        assert doc["provenance"] == {"r6": CLASS, "r13": CLASS, "r0": FRONTIER, "r1": FAIR_CLOSURE}
        again = loads(text)
        assert again.ts.n_states == 4
        assert parts["s2"].dumps() == text

    def test_fragments_decompose(self):
        pair, parts = t1_parts()
        d = Decomposer(pair.refined, pair.mu, list(parts.values()), pair.abstract.ts.actions)
        count = 0
        for lasso in enumerate_lassos(pair.refined.ts, 12):
            if is_computation(pair.refined, lasso):
                assert d.check(lasso), lasso.render(pair.refined.ts)
                count += 1
        assert count > 1000


class TestDidactic:
    def test_part_y0(self):
        d = didactic()
        parts = refinement_parts(d.refined, d.mu, d.abstract)
        part = parts[0]
        ts = d.refined.ts
        assert named(ts, part.states) == ["r0", "r1", "r3", "r5"]
        assert named(ts, part.initial) == ["r0"]
        assert named(ts, part.members(FRONTIER)) == ["r3"]
        assert named(ts, part.members(FAIR_CLOSURE)) == ["r5"]
        assert part.transitions == {Transition(0, "e", 1), Transition(1, "a", 3), Transition(3, "c", 5),
                                    Transition(5, SKIP, 5)}

    def test_identity_refinement(self):
        fts = teg1().abstract
        n = fts.ts.n_states
        parts = refinement_parts(fts, GluingMap(tuple(range(n)), n), fts)
        assert len(parts) == n
        for p in parts:
            (s,) = p.members(CLASS)
            assert {t for t in p.transitions if t.src == s} == set(fts.ts.out[s])
            assert p.ts.is_total()


class TestNaive:
    def test_first_block_loops_in_ack_cycle(self):
        pair = teg1()
        first, second = naive_parts(pair.refined.ts, naive_assignment(pair))
        assert first.name == "s1'" and second.name == "s2'"
        assert pair.transition("r3", "Rsends", "r5") not in first.transitions
        assert {pair.transition("r3", "Rblocksends", "r4"), pair.transition("r4", "Cacksends", "r3")} \
            <= first.transitions

    def test_single_block_is_whole_system(self):
        ts = teg1().refined.ts
        (part,) = naive_parts(ts, {t: 0 for t in ts.transitions})
        assert part.transitions == set(ts.transitions)
        assert part.initial == ts.initial

    def test_singleton_blocks(self):
        ts = teg1().abstract.ts
        parts = naive_parts(ts, {t: i for i, t in enumerate(ts.transitions)})
        assert len(parts) == len(ts.transitions)
        for p in parts:
            real = [t for t in p.transitions if t.action != SKIP]
            assert len(real) == 1
            assert p.ts.is_total()

    def test_assignment_must_be_total(self):
        ts = teg1().abstract.ts
        with pytest.raises(ValueError, match="no block"):
            naive_parts(ts, {ts.transitions[0]: 0})
