from fractions import Fraction

import numpy as np
import pytest

from cplass.errors import DegenerateFitError, DimensionMismatchError, InvalidChangepointsError
from cplass.fit import build_design, fit_given_changepoints, rss_of
from cplass.model import ChangepointVector, Trajectory

from _oracles import exact_pwl_fit, hinge_design_exact
from conftest import random_instance


class TestBuildDesign:
    def test_no_changepoints_is_linear_design(self):
        traj = Trajectory(dt=1.0, positions=np.zeros((3, 1)))
        design = build_design(traj, [])
        assert design.tolist() == [[1, 1], [1, 2], [1, 3]]

    def test_single_hinge_column(self):
        traj = Trajectory(dt=1.0, positions=np.zeros((4, 1)))
        design = build_design(traj, [2.0])
        assert design[:, 2].tolist() == [0, 0, 1, 2]

    def test_elementwise_indicator_oracle(self):
        traj = Trajectory(dt=0.5, positions=np.zeros((6, 1)))
        taus = [1.0, 2.0]
        design = build_design(traj, taus)
        times = traj.times
        for i in range(6):
            assert design[i, 0] == 1.0
            assert design[i, 1] == times[i]
            for j, tau in enumerate(taus):
                expected = (times[i] - tau) if times[i] > tau else 0.0
                assert design[i, 2 + j] == expected

    def test_rejects_non_increasing_taus(self):
        traj = Trajectory(dt=0.5, positions=np.zeros((6, 1)))
        with pytest.raises(InvalidChangepointsError):
            build_design(traj, [2.0, 1.0])
        with pytest.raises(InvalidChangepointsError):
            build_design(traj, [0.0])
        with pytest.raises(InvalidChangepointsError):
            build_design(traj, [3.0])


class TestFitGivenChangepoints:
    def test_noiseless_line_is_interpolated(self):
        dt = 0.25
        t = dt * np.arange(1, 9)
        y = 2.0 + 0.3 * t
        traj = Trajectory(dt=dt, positions=y[:, None])
        seg = fit_given_changepoints(traj, ChangepointVector.empty(8))
        assert seg.intercept[0] == pytest.approx(2.0, abs=1e-12)
        assert seg.V[0, 0] == pytest.approx(0.3, abs=1e-12)
        assert seg.rss <= 1e-18

    def test_noiseless_two_segment_recovery(self):
        dt = 0.5
        n = 12
        t = dt * np.arange(1, n + 1)
        tau = 3.0
        vels = np.array([[0.1, -0.1], [-0.1, 0.1]])
        x = np.where(t <= tau, 0.1 * t, 0.1 * tau - 0.1 * (t - tau))
        y = np.where(t <= tau, -0.1 * t, -0.1 * tau + 0.1 * (t - tau))
        traj = Trajectory(dt=dt, positions=np.column_stack([x, y]))
        r = ChangepointVector.from_indices([int(tau / dt)], n)
        seg = fit_given_changepoints(traj, r)
        assert np.allclose(seg.V, vels, atol=1e-12)
        assert seg.rss <= 1e-20

    def test_matches_exact_normal_equations_oracle(self):
        y = [0.0, 1.0, 2.0, 3.0, 3.0, 3.0]
        traj = Trajectory(dt=1.0, positions=np.array(y)[:, None])
        r = ChangepointVector.from_indices([3], 6)
        seg = fit_given_changepoints(traj, r)
        coeffs, _, rss = exact_pwl_fit([1, 2, 3, 4, 5, 6], [3], [y])
        assert coeffs[0] == [Fraction(-23, 19), Fraction(22, 19), Fraction(-16, 19)]
        assert rss == Fraction(6, 19)
        assert seg.intercept[0] == pytest.approx(float(coeffs[0][0]), rel=1e-12)
        assert seg.W[0, 0] == pytest.approx(float(coeffs[0][1]), rel=1e-12)
        assert seg.W[1, 0] == pytest.approx(float(coeffs[0][2]), rel=1e-12)
        assert seg.rss == pytest.approx(float(rss), rel=1e-12)

    def test_velocities_are_cumulative_sums_and_speeds_norms(self, rng):
        traj, r = random_instance(rng)
        try:
            seg = fit_given_changepoints(traj, r)
        except DegenerateFitError:
            pytest.skip("degenerate draw")
        assert np.allclose(seg.V, np.cumsum(seg.W, axis=0))
        assert np.allclose(seg.speeds, np.linalg.norm(seg.V, axis=1))
        assert seg.sigma2_hat * seg.d * seg.n == pytest.approx(seg.rss, rel=1e-12)
        assert seg.durations.sum() == pytest.approx(traj.duration, rel=1e-12)

    def test_degenerate_when_more_parameters_than_observations(self):
        traj = Trajectory(dt=1.0, positions=np.random.default_rng(0).standard_normal((4, 1)))
        r = ChangepointVector.from_indices([1, 2, 3], 4)
        with pytest.raises(DegenerateFitError):
            fit_given_changepoints(traj, r)

    def test_dimension_mismatch_rejected(self):
        traj = Trajectory(dt=1.0, positions=np.zeros((6, 1)))
        with pytest.raises(DimensionMismatchError):
            fit_given_changepoints(traj, ChangepointVector.empty(5))


class TestFitProperties:
    def test_oracle_equivalence_random_instances(self, rng):
        checked = 0
        while checked < 25:
            traj, r = random_instance(rng)
            try:
                seg = fit_given_changepoints(traj, r)
            except DegenerateFitError:
                continue
            times = [Fraction(i) * Fraction(traj.dt) for i in range(1, traj.n + 1)]
            taus = [Fraction(int(m)) * Fraction(traj.dt) for m in r.indices]
            cols = [traj.positions[:, l].tolist() for l in range(traj.d)]
            _, fitted, rss = exact_pwl_fit(times, taus, cols)
            fitted_np = np.array([[float(v) for v in col] for col in fitted]).T
            ours = seg.predict(traj.times)
            scale = max(1.0, float(np.abs(fitted_np).max()))
            assert np.abs(ours - fitted_np).max() / scale < 1e-9
            assert seg.rss == pytest.approx(float(rss), rel=1e-9, abs=1e-12)
            checked += 1

    def test_perturbing_solution_never_decreases_rss(self, rng):
        traj, r = random_instance(rng)
        try:
            seg = fit_given_changepoints(traj, r)
        except DegenerateFitError:
            pytest.skip("degenerate draw")
        design = build_design(traj, seg.tau)
        stacked = np.vstack([seg.intercept[None, :], seg.W])
        base = float(np.sum((traj.positions - design @ stacked) ** 2))
        for i in range(stacked.shape[0]):
            for j in range(stacked.shape[1]):
                for delta in (1e-4, -1e-4):
                    perturbed = stacked.copy()
                    perturbed[i, j] += delta
                    rss = float(np.sum((traj.positions - design @ perturbed) ** 2))
                    assert rss >= base - 1e-15

    def test_continuity_at_changepoints(self):
        rng = np.random.default_rng(3)
        traj = Trajectory(dt=0.2, positions=rng.standard_normal((15, 2)))
        r = ChangepointVector.from_indices([4, 9], 15)
        seg = fit_given_changepoints(traj, r)
        eps = 1e-9
        for j, tau in enumerate(seg.tau):
            # One-sided limits of the hinge-basis form.
            left = seg.predict([tau - eps])[0]
            at = seg.predict([tau])[0]
            right = seg.predict([tau + eps])[0]
            assert np.abs(at - left).max() < 1e-8
            assert np.abs(right - at).max() < 1e-8
            # Anchor recursion from the left reaches the same point the next
            # segment starts from.
            pos = seg.intercept.astype(float).copy()
            start = 0.0
            for i in range(j + 1):
                pos = pos + seg.V[i] * (seg.tau[i] - start)
                start = seg.tau[i]
            assert np.abs(pos - at).max() < 1e-9

    def test_nested_models_never_increase_rss(self, rng):
        for _ in range(10):
            traj, r = random_instance(rng, k_max=2)
            free = [m for m in range(1, traj.n) if not r.bits[m - 1]]
            if not free:
                continue
            extra = int(rng.choice(free))
            try:
                base = fit_given_changepoints(traj, r)
                bigger = fit_given_changepoints(traj, r.with_flipped(extra))
            except DegenerateFitError:
                continue
            assert bigger.rss <= base.rss + 1e-10 * max(1.0, base.rss)


class TestRssOf:
    def test_zero_on_noiseless_model_data(self):
        dt = 0.25
        t = dt * np.arange(1, 9)
        traj = Trajectory(dt=dt, positions=(1.0 + 0.5 * t)[:, None])
        seg = fit_given_changepoints(traj, ChangepointVector.empty(8))
        assert rss_of(traj, seg) <= 1e-18

    def test_consistent_with_stored_rss(self, rng):
        traj, r = random_instance(rng)
        try:
            seg = fit_given_changepoints(traj, r)
        except DegenerateFitError:
            pytest.skip("degenerate draw")
        assert rss_of(traj, seg) == pytest.approx(seg.rss, rel=1e-10)

    def test_matches_exact_oracle_value(self):
        y = [0.0, 1.0, 2.0, 3.0, 3.0, 3.0]
        traj = Trajectory(dt=1.0, positions=np.array(y)[:, None])
        seg = fit_given_changepoints(traj, ChangepointVector.from_indices([3], 6))
        assert rss_of(traj, seg) == pytest.approx(6 / 19, rel=1e-10)

    def test_dimension_mismatch(self):
        traj_a = Trajectory(dt=1.0, positions=np.zeros((6, 1)))
        traj_b = Trajectory(dt=1.0, positions=np.zeros((7, 1)))
        seg = fit_given_changepoints(traj_a, ChangepointVector.empty(6))
        with pytest.raises(DimensionMismatchError):
            rss_of(traj_b, seg)
