import math

import numpy as np
import pytest

from cplass.model import ChangepointVector
from cplass.proposals import (
    NEG_INF,
    ProposalType,
    make_proposal,
    new_vector_log_density,
    propose_birth_death,
    propose_new,
    propose_segment_bd,
    propose_shift,
)

from _oracles import all_vectors, enumerate_kernel

KERNELS = {
    "new": ProposalType.NEW,
    "birth_death": ProposalType.BIRTH_DEATH,
    "segment_bd": ProposalType.SEGMENT_BD,
    "shift": ProposalType.SHIFT,
}


class TestIndependentRedraw:
    def test_formula_value(self):
        # lam*dt = 0.05, n = 5, one set bit.
        logq = new_vector_log_density(1, 5, 1.0, 0.05)
        expected = math.log(1 - math.exp(-0.05)) + 3 * (-0.05)
        assert logq == pytest.approx(expected, rel=1e-13)

    def test_vanishing_rate_concentrates_on_empty_vector(self):
        assert new_vector_log_density(0, 9, 1e-12, 0.05) == pytest.approx(0.0, abs=1e-9)

    def test_densities_depend_only_on_count(self, rng):
        r_cur = ChangepointVector.from_indices([2, 5], 9)
        prop = propose_new(rng, r_cur, 1.0, 0.1)
        assert prop.forward_log_density == pytest.approx(
            new_vector_log_density(prop.r_prop.count, 9, 1.0, 0.1))
        assert prop.reverse_log_density == pytest.approx(
            new_vector_log_density(2, 9, 1.0, 0.1))

    def test_positive_density_for_every_vector(self, rng):
        # Irreducibility: the redraw kernel can reach any state.
        for r in all_vectors(6):
            assert new_vector_log_density(r.count, 6, 1.0, 0.1) > NEG_INF

    @pytest.mark.slow
    def test_empirical_mean_count(self):
        rng = np.random.default_rng(5)
        r_cur = ChangepointVector.empty(50)
        draws = np.array([propose_new(rng, r_cur, 2.0, 0.05).r_prop.count
                          for _ in range(100_000)])
        p = 1 - math.exp(-0.1)
        se = math.sqrt(49 * p * (1 - p) / draws.size)
        assert abs(draws.mean() - 49 * p) < 3 * se


class TestBirthDeath:
    def test_delete_and_reverse_densities(self, rng):
        r_cur = ChangepointVector.from_indices([4, 9, 15], 21)
        for _ in range(50):
            prop = propose_birth_death(rng, r_cur)
            if prop.is_null:
                continue
            if prop.r_prop.count == 2:
                assert prop.forward_log_density == pytest.approx(math.log(1 / 6))
                assert prop.reverse_log_density == pytest.approx(math.log(1 / 36))
            else:
                assert prop.r_prop.count == 4
                assert prop.forward_log_density == pytest.approx(math.log(1 / (2 * 17)))
                assert prop.reverse_log_density == pytest.approx(math.log(1 / 8))

    def test_delete_from_empty_is_null(self):
        rng = np.random.default_rng(0)
        r_cur = ChangepointVector.empty(8)
        nulls = sum(propose_birth_death(rng, r_cur).is_null for _ in range(400))
        # The delete branch (probability 1/2) is impossible.
        assert 140 < nulls < 260

    @pytest.mark.slow
    def test_delete_target_uniformity(self):
        rng = np.random.default_rng(1)
        r_cur = ChangepointVector.from_indices([3, 7, 12, 18], 25)
        counts = {int(m): 0 for m in r_cur.indices}
        deletes = 0
        for _ in range(100_000):
            prop = propose_birth_death(rng, r_cur)
            if not prop.is_null and prop.r_prop.count == 3:
                removed = int(np.flatnonzero(r_cur.bits & ~prop.r_prop.bits)[0]) + 1
                counts[removed] += 1
                deletes += 1
        se = math.sqrt(0.25 * 0.75 / deletes)
        for m, c in counts.items():
            assert abs(c / deletes - 0.25) < 3 * se


class TestSegmentBirthDeath:
    def test_single_changepoint_delete_is_null(self):
        # Only list position J=1 exists and it has no successor.
        rng = np.random.default_rng(2)
        r_cur = ChangepointVector.from_indices([5], 12)
        for _ in range(200):
            prop = propose_segment_bd(rng, r_cur)
            if prop.r_prop.count < r_cur.count:
                pytest.fail("delete must be impossible with one changepoint")

    def test_insert_total_mass_from_empty(self):
        n = 12
        outcomes, reject = enumerate_kernel("segment_bd", ChangepointVector.empty(n))
        insert_mass = sum(p for p, _ in outcomes.values())
        assert insert_mass == pytest.approx(0.5, abs=1e-12)
        assert reject == pytest.approx(0.5, abs=1e-12)

    def test_insert_total_mass_three_segments(self):
        # Segment lengths (3, 4, 3): mass = (1/2) * (2*1 + 3*2 + 2*1) / (7*6).
        r_cur = ChangepointVector.from_indices([3, 7], 10)
        outcomes, _ = enumerate_kernel("segment_bd", r_cur)
        inserts = {k: p for k, (p, v) in outcomes.items() if v.count == 4}
        assert sum(inserts.values()) == pytest.approx(10 / 84, abs=1e-12)

    def test_per_pair_insert_density_matches_formula(self, rng):
        r_cur = ChangepointVector.from_indices([3, 7], 10)
        avail = 10 - 1 - 2
        for _ in range(300):
            prop = propose_segment_bd(rng, r_cur)
            if prop.is_null:
                continue
            if prop.r_prop.count == 4:
                assert prop.forward_log_density == pytest.approx(
                    -math.log(avail) - math.log(avail - 1))
                assert prop.reverse_log_density == pytest.approx(-math.log(2 * 4))
            else:
                assert prop.r_prop.count == 0
                assert prop.forward_log_density == pytest.approx(-math.log(2 * 2))
                assert prop.reverse_log_density == pytest.approx(
                    -math.log(9 * 8))

    def test_inserted_pair_never_straddles_existing_changepoint(self, rng):
        r_cur = ChangepointVector.from_indices([6], 14)
        for _ in range(400):
            prop = propose_segment_bd(rng, r_cur)
            if prop.is_null or prop.r_prop.count != 3:
                continue
            added = np.flatnonzero(prop.r_prop.bits & ~r_cur.bits) + 1
            lo, hi = int(added.min()), int(added.max())
            assert not (lo < 6 < hi)

    def test_deleted_pair_is_list_adjacent(self, rng):
        r_cur = ChangepointVector.from_indices([2, 5, 9, 12], 16)
        idx = r_cur.indices
        seen_delete = False
        for _ in range(400):
            prop = propose_segment_bd(rng, r_cur)
            if prop.is_null or prop.r_prop.count != 2:
                continue
            removed = np.flatnonzero(r_cur.bits & ~prop.r_prop.bits) + 1
            pos = np.searchsorted(idx, removed)
            assert pos[1] == pos[0] + 1
            seen_delete = True
        assert seen_delete


class TestShift:
    def test_density_formula(self, rng):
        r_cur = ChangepointVector.from_indices([3, 8], 11)
        prop = propose_shift(rng, r_cur)
        assert prop.forward_log_density == pytest.approx(math.log(1 / 16))
        assert prop.reverse_log_density == pytest.approx(math.log(1 / 16))

    def test_symmetry_and_count_preservation(self, rng):
        r_cur = ChangepointVector.from_indices([2, 6, 9], 13)
        for _ in range(100):
            prop = propose_shift(rng, r_cur)
            assert prop.forward_log_density == prop.reverse_log_density
            assert prop.r_prop.count == 3

    def test_impossible_cases(self, rng):
        assert propose_shift(rng, ChangepointVector.empty(8)).is_null
        full = ChangepointVector(np.ones(7, dtype=bool), 8)
        assert propose_shift(rng, full).is_null


class TestKernelLaws:
    """Empirical draws match the enumerated sampling procedure exactly in
    support and to Monte-Carlo error in frequency; masses sum to one."""

    @pytest.mark.parametrize("kind", ["new", "birth_death", "segment_bd", "shift"])
    @pytest.mark.parametrize("n", [6, 8, 10])
    def test_outcome_masses_sum_to_one(self, kind, n, rng):
        for r in ([], [2], [1, 4], [2, 3, n - 2]):
            r_cur = ChangepointVector.from_indices([m for m in r if m < n], n)
            outcomes, reject = enumerate_kernel(kind, r_cur, lam=1.0, dt=0.1)
            total = sum(p for p, _ in outcomes.values()) + reject
            assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("kind", ["new", "birth_death", "segment_bd", "shift"])
    def test_recorded_densities_match_enumeration(self, kind, rng):
        n = 9
        for r in ([], [3], [2, 6], [1, 4, 7]):
            r_cur = ChangepointVector.from_indices(r, n)
            outcomes, _ = enumerate_kernel(kind, r_cur, lam=1.0, dt=0.1)
            for _ in range(200):
                prop = make_proposal(KERNELS[kind], rng, r_cur, 1.0, 0.1)
                if prop.is_null:
                    continue
                enumerated = outcomes[prop.r_prop.key()][0]
                assert prop.forward_log_density == pytest.approx(
                    math.log(enumerated), abs=1e-12)

    @pytest.mark.parametrize("kind", ["birth_death", "segment_bd", "shift"])
    def test_reverse_density_is_forward_of_mirror_move(self, kind, rng):
        n = 9
        for r in ([3], [2, 6], [1, 4, 7], [2, 3, 4]):
            r_cur = ChangepointVector.from_indices(r, n)
            for _ in range(200):
                prop = make_proposal(KERNELS[kind], rng, r_cur, 1.0, 0.1)
                if prop.is_null:
                    continue
                back, _ = enumerate_kernel(kind, prop.r_prop, lam=1.0, dt=0.1)
                assert prop.reverse_log_density == pytest.approx(
                    math.log(back[r_cur.key()][0]), abs=1e-12)
