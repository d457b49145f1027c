import math

import numpy as np
import pytest

from cplass.criterion import RSS_FLOOR, ScoreBreakdown, penalty, score
from cplass.errors import DegenerateFitError
from cplass.fit import fit_given_changepoints
from cplass.model import ChangepointVector, ScoreConfig, Trajectory, param_count
from cplass.simulate import simulate_piecewise
from cplass.experiments import component_truth, score_surface_2cp

from _oracles import penalty_highprec, score_highprec
from conftest import random_instance


class TestPenalty:
    def test_complexity_term_against_highprec_oracle(self):
        cfg = ScoreConfig(gamma=1.01)
        r = ChangepointVector.from_indices([10, 20], 100)
        value = penalty(r, [0.1, 0.1, 0.1], cfg, n=100, d=2)
        oracle = penalty_highprec(100, 2, 2, 1.01)
        # rho = d(|r|+2)+1 = 9; all speeds under the cap.
        assert oracle == pytest.approx(9 * math.log(100) ** 1.01, rel=1e-12)
        assert value == pytest.approx(oracle, rel=1e-12)

    def test_speed_term_zero_below_cap(self):
        cfg = ScoreConfig(s_cap=5.0)
        r = ChangepointVector.from_indices([3], 10)
        below = penalty(r, [0.1, 0.2], cfg, n=10, d=1)
        no_speeds = penalty(r, [0.0, 0.0], cfg, n=10, d=1)
        assert below == no_speeds

    def test_speed_term_is_excess_over_cap(self):
        cfg = ScoreConfig(s_cap=5.0)
        r = ChangepointVector.from_indices([3], 10)
        bumped = penalty(r, [5.3, 0.2], cfg, n=10, d=1)
        base = penalty(r, [0.3, 0.2], cfg, n=10, d=1)
        assert bumped - base == pytest.approx(0.3, abs=1e-12)

    def test_speed_term_disabled(self):
        cfg = ScoreConfig(speed_penalty_enabled=False)
        r = ChangepointVector.empty(10)
        assert penalty(r, [99.0], cfg, n=10, d=1) == pytest.approx(
            3 * math.log(10) ** 1.01)

    def test_wrong_speed_count_rejected(self):
        with pytest.raises(ValueError):
            penalty(ChangepointVector.empty(10), [0.1, 0.2], ScoreConfig(), n=10, d=1)


class TestScore:
    def test_equal_complexity_difference_is_pure_likelihood(self, rng):
        traj, _ = random_instance(rng, n_max=15, k_max=0)
        cfg = ScoreConfig()
        a = ChangepointVector.from_indices([3], traj.n)
        b = ChangepointVector.from_indices([traj.n - 2], traj.n)
        sa, sb = score(traj, a, cfg), score(traj, b, cfg)
        rss_a = fit_given_changepoints(traj, a).rss
        rss_b = fit_given_changepoints(traj, b).rss
        expected = -(traj.n * traj.d / 2) * (math.log(rss_a) - math.log(rss_b))
        assert sa.total - sb.total == pytest.approx(expected, rel=1e-10)

    def test_breakdown_identity_and_rho(self, rng):
        traj, r = random_instance(rng)
        try:
            br = score(traj, r, ScoreConfig())
        except DegenerateFitError:
            pytest.skip("degenerate draw")
        assert br.total == pytest.approx(
            br.log_rss_term - br.ssic_term - br.speed_term, rel=1e-12)
        assert br.rho == param_count(traj.d, r.count)

    def test_independent_composition_oracle_n10(self):
        rng = np.random.default_rng(42)
        traj = Trajectory(dt=0.5, positions=rng.standard_normal((10, 1)).cumsum(axis=0) * 0.1)
        cfg = ScoreConfig()
        import itertools

        vectors = [ChangepointVector.empty(10)]
        vectors += [ChangepointVector.from_indices([m], 10) for m in range(1, 10)]
        vectors += [ChangepointVector.from_indices(list(c), 10)
                    for c in itertools.combinations(range(1, 10), 2)]
        for r in vectors:
            try:
                seg = fit_given_changepoints(traj, r)
            except DegenerateFitError:
                continue
            # Different composition order: numpy lstsq residual, then mpmath.
            design = np.hstack([np.ones((10, 1)), traj.times[:, None]] +
                               [np.where(traj.times[:, None] > tau,
                                         traj.times[:, None] - tau, 0.0)
                                for tau in seg.tau])
            _, res, _, _ = np.linalg.lstsq(design, traj.positions, rcond=None)
            oracle = score_highprec(10, 1, float(res.sum()), r.count, cfg.gamma,
                                    seg.speeds, cfg.s_cap)
            assert score(traj, r, cfg).total == pytest.approx(oracle, rel=1e-10)

    def test_degenerate_fit_scores_minus_infinity(self):
        traj = Trajectory(dt=1.0, positions=np.random.default_rng(0).standard_normal((4, 1)))
        r = ChangepointVector.from_indices([1, 2, 3], 4)
        br = score(traj, r, ScoreConfig())
        assert br.total == float("-inf")
        assert br.is_degenerate

    def test_perfect_fit_stays_finite(self):
        # Noiseless on-model data: rss underflows toward zero but the clamp
        # at RSS_FLOOR keeps the score finite and bounded.
        t = 0.5 * np.arange(1, 9)
        traj = Trajectory(dt=0.5, positions=(1 + 2 * t)[:, None])
        br = score(traj, ChangepointVector.empty(8), ScoreConfig())
        assert math.isfinite(br.total)
        assert br.log_rss_term <= -(8 / 2) * math.log(RSS_FLOOR) + 1e-9

    def test_global_maximizer_at_true_pair_on_strong_path(self):
        truth = component_truth(600, 0.01, (3.0, 3.5), (0.0, 0.2, 0.0), 0.01)
        traj, _ = simulate_piecewise(truth, 5)
        surface = score_surface_2cp(traj, stride=10, cfg=ScoreConfig())
        best = surface.argmax_pair()
        assert abs(best[0] - 300) <= 10
        assert abs(best[1] - 350) <= 10


class TestScoreProperties:
    def test_ssic_term_strictly_increasing_in_count(self, rng):
        traj, _ = random_instance(rng, k_max=0)
        cfg = ScoreConfig()
        prev = None
        for count in range(0, 4):
            r = ChangepointVector.from_indices(list(range(1, count + 1)), traj.n)
            term = score(traj, r, cfg).ssic_term if traj.n > count + 2 else None
            if term is None:
                break
            if prev is not None:
                assert term > prev
            prev = term

    def test_likelihood_term_nondecreasing_along_nested_sets(self):
        rng = np.random.default_rng(11)
        traj = Trajectory(dt=0.25, positions=rng.standard_normal((16, 2)).cumsum(axis=0) * 0.05)
        cfg = ScoreConfig()
        r = ChangepointVector.empty(16)
        prev = score(traj, r, cfg).log_rss_term
        for m in (4, 8, 12):
            r = r.with_flipped(m)
            cur = score(traj, r, cfg).log_rss_term
            assert cur >= prev - 1e-9
            prev = cur

    def test_scaling_positions_shifts_scores_uniformly(self):
        rng = np.random.default_rng(21)
        traj = Trajectory(dt=0.25, positions=rng.standard_normal((14, 2)) * 0.3)
        scaled = Trajectory(dt=0.25, positions=traj.positions * 10.0)
        cfg = ScoreConfig(speed_penalty_enabled=False)
        shift = -(14 * 2 / 2) * 2 * math.log(10.0)
        candidates = [ChangepointVector.from_indices(ix, 14)
                      for ix in ([2], [5], [9], [2, 7], [5, 11])]
        base_scores = [score(traj, r, cfg).total for r in candidates]
        scaled_scores = [score(scaled, r, cfg).total for r in candidates]
        for b, s in zip(base_scores, scaled_scores):
            assert s - b == pytest.approx(shift, rel=1e-9)
        assert int(np.argmax(base_scores[:3])) == int(np.argmax(scaled_scores[:3]))
        assert int(np.argmax(base_scores[3:])) == int(np.argmax(scaled_scores[3:]))
