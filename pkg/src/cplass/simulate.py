"""Synthetic trajectory generators with exact ground truth.

Two generators are provided:

* :func:`simulate_piecewise` draws Gaussian observations around an explicit
  continuous piecewise-linear anchor, for studies where the true changepoint
  times and velocities are chosen directly.
* :func:`simulate_two_state` produces cargo-style paths that alternate
  between a stationary state and a motile state with random speeds and
  directions, following per-step transition probabilities.

Both return the trajectory together with a ground-truth
:class:`~cplass.model.Segmentation` whose ``rss`` measures the generated
noise against the true anchor (exactly zero when the noise scale is zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fit import build_design
from .model import ChangepointVector, Segmentation, Trajectory

__all__ = [
    "PiecewiseTruth",
    "TwoStateParams",
    "BASE_TWO_STATE",
    "simulate_piecewise",
    "simulate_two_state",
    "truth_from_changepoints",
]

BURN_IN_FACTOR = 5


@dataclass(frozen=True)
class PiecewiseTruth:
    """Specification of a true piecewise-linear signal.

    ``tau_true`` holds the changepoint times (strictly increasing, inside the
    open window ``(0, n*dt)``); ``V_true`` is the ``k x d`` velocity matrix
    (one row per segment, consecutive rows must differ); ``intercept_true``
    the anchor position at time zero; ``sigma`` the observation noise scale.
    """

    tau_true: tuple
    V_true: tuple
    intercept_true: tuple
    sigma: float
    dt: float
    n: int

    def __post_init__(self):
        taus = np.asarray(self.tau_true, dtype=float)
        V = np.atleast_2d(np.asarray(self.V_true, dtype=float))
        object.__setattr__(self, "tau_true", tuple(taus.tolist()))
        object.__setattr__(self, "V_true", tuple(map(tuple, V.tolist())))
        object.__setattr__(self, "intercept_true",
                           tuple(np.asarray(self.intercept_true, dtype=float).tolist()))
        if V.shape[0] != taus.size + 1:
            raise ValueError("need one velocity row per segment (len(tau)+1)")
        if taus.size:
            if np.any(np.diff(taus) <= 0):
                raise ValueError("true changepoint times must be strictly increasing")
            if taus[0] <= 0 or taus[-1] >= self.n * self.dt:
                raise ValueError("true changepoint times must lie inside (0, n*dt)")
        if any(np.allclose(V[j], V[j + 1]) for j in range(V.shape[0] - 1)):
            raise ValueError("consecutive velocity rows must differ")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def d(self) -> int:
        return len(self.intercept_true)

    @property
    def k(self) -> int:
        return len(self.V_true)


def _truth_segmentation(n: int, d: int, dt: float, taus: np.ndarray, intercept: np.ndarray,
                        V: np.ndarray, rss: float) -> Segmentation:
    W = np.vstack([V[:1], np.diff(V, axis=0)]) if V.shape[0] > 1 else V.copy()
    bounds = np.concatenate(([0.0], taus, [n * dt]))
    return Segmentation(
        n=n, d=d, dt=dt,
        tau=taus,
        intercept=intercept,
        W=W,
        V=V,
        speeds=np.linalg.norm(V, axis=1),
        durations=np.diff(bounds),
        rss=rss,
        sigma2_hat=rss / (d * n),
    )


def simulate_piecewise(truth: PiecewiseTruth, seed) -> tuple[Trajectory, Segmentation]:
    """Observations ``anchor(t_i) + sigma * eps_i`` for a given truth.

    Deterministic given ``seed``.  The returned segmentation carries the true
    changepoints and velocities; its ``rss`` is the realized noise energy.
    """
    rng = np.random.default_rng(seed)
    taus = np.asarray(truth.tau_true, dtype=float)
    V = np.atleast_2d(np.asarray(truth.V_true, dtype=float))
    intercept = np.asarray(truth.intercept_true, dtype=float)
    W = np.vstack([V[:1], np.diff(V, axis=0)]) if V.shape[0] > 1 else V.copy()

    # The anchor is the hinge design applied to [intercept; velocity diffs],
    # the same parameterization the fitter uses, so refitting at the true
    # changepoints reproduces it exactly in the noiseless case.
    shell = Trajectory(dt=truth.dt, positions=np.zeros((truth.n, max(truth.d, 1))))
    design = build_design(shell, taus)
    anchor = design @ np.vstack([intercept[None, :], W])
    noise = rng.standard_normal((truth.n, truth.d))
    positions = anchor + truth.sigma * noise
    traj = Trajectory(dt=truth.dt, positions=positions)
    rss = float(np.sum((positions - anchor) ** 2))
    return traj, _truth_segmentation(truth.n, truth.d, truth.dt, taus, intercept, V, rss)


def truth_from_changepoints(n: int, dt: float, cp_times, speeds, sigma: float,
                            d: int = 2, intercept=None) -> PiecewiseTruth:
    """Convenience builder: one speed per segment, motion along the diagonal.

    Each segment's velocity is ``speed / sqrt(d)`` in every coordinate, with
    alternating sign flips applied when consecutive speeds coincide so that
    consecutive velocity rows always differ.
    """
    cp_times = list(cp_times)
    speeds = list(speeds)
    if len(speeds) != len(cp_times) + 1:
        raise ValueError("need one speed per segment")
    unit = np.ones(d) / math.sqrt(d)
    rows = []
    for j, s in enumerate(speeds):
        row = s * unit
        if rows and np.allclose(row, rows[-1]):
            row = -row if s != 0 else row
        if rows and np.allclose(row, rows[-1]):
            raise ValueError("could not make consecutive velocities differ")
        rows.append(row)
    return PiecewiseTruth(
        tau_true=tuple(cp_times),
        V_true=tuple(map(tuple, rows)),
        intercept_true=tuple(intercept) if intercept is not None else (0.0,) * d,
        sigma=sigma,
        dt=dt,
        n=n,
    )


@dataclass(frozen=True)
class TwoStateParams:
    """Parameters of the stationary/motile cargo generator.

    ``p`` and ``q`` are per-time-step switching probabilities
    (stationary->motile and motile->stationary).  Motile speeds are drawn
    from a Gamma distribution with shape ``alpha`` and rate ``beta`` in nm/s
    and converted to um/s internally.  While motile, each step keeps the
    current velocity with probability ``p_continue``, negates it with
    probability ``p_reverse``, and otherwise redraws speed and direction.
    ``sigma_cargo`` (um) is added to the anchor positions.  The
    ``mean_stationary`` / ``mean_distance`` fields are descriptive metadata
    of the reference parameterization, not simulator inputs.
    """

    n: int
    p: float
    q: float
    alpha: float
    beta: float
    p_reverse: float
    p_continue: float
    sigma_cargo: float
    dt: float
    d: int = 2
    mean_stationary: float | None = None
    mean_distance: float | None = None

    def __post_init__(self):
        for name in ("p", "q", "p_reverse", "p_continue"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.p_reverse + self.p_continue > 1:
            raise ValueError("p_reverse + p_continue must not exceed 1")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.n < 2 or self.d < 1 or self.dt <= 0 or self.sigma_cargo < 0:
            raise ValueError("invalid grid or noise parameters")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n", "p", "q", "alpha", "beta", "p_reverse", "p_continue",
            "sigma_cargo", "dt", "d", "mean_stationary", "mean_distance")}


#: Reference "base" parameter set for simulated lysosome-like cargo at 25 Hz.
BASE_TWO_STATE = TwoStateParams(
    n=200,
    p=1.0,
    q=0.5,
    alpha=8.0,
    beta=0.02,
    p_reverse=0.3,
    p_continue=0.3,
    sigma_cargo=0.1,
    dt=0.04,
    d=2,
    mean_stationary=5.0,
    mean_distance=300.0,
)


def _random_unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    if d == 1:
        return np.array([1.0 if rng.random() < 0.5 else -1.0])
    while True:
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def _draw_motile_velocity(rng: np.random.Generator, params: TwoStateParams) -> np.ndarray:
    # Speed drawn in nm/s (shape alpha, rate beta), converted to um/s.
    speed = rng.gamma(params.alpha, 1.0 / params.beta) / 1000.0
    return speed * _random_unit_vector(rng, params.d)


def _next_velocity(rng: np.random.Generator, v_prev: np.ndarray,
                   params: TwoStateParams) -> np.ndarray:
    """Direction update within a motile run.

    Single point of convention: reverse with ``p_reverse``, keep with
    ``p_continue``, otherwise redraw speed and direction.  Swap this function
    to explore alternative reversal conventions.
    """
    u = rng.random()
    if u < params.p_reverse:
        return -v_prev
    if u < params.p_reverse + params.p_continue:
        return v_prev
    return _draw_motile_velocity(rng, params)


def simulate_two_state(params: TwoStateParams, seed) -> tuple[Trajectory, Segmentation]:
    """Simulate a stationary/motile cargo path with known segment structure.

    The process runs for ``BURN_IN_FACTOR``-times the requested duration and
    the final window of ``n`` steps is kept, re-origined to start at zero.
    Ground truth records every maximal constant-velocity interval of the
    kept window (stationary intervals have velocity zero).
    """
    rng = np.random.default_rng(seed)
    total = BURN_IN_FACTOR * params.n
    velocities = np.zeros((total, params.d))

    motile = bool(rng.random() < 0.5)
    v = _draw_motile_velocity(rng, params) if motile else np.zeros(params.d)
    velocities[0] = v
    for i in range(1, total):
        if motile:
            if rng.random() < params.q:
                motile = False
                v = np.zeros(params.d)
            else:
                v = _next_velocity(rng, v, params)
        else:
            if rng.random() < params.p:
                motile = True
                v = _draw_motile_velocity(rng, params)
        velocities[i] = v

    kept = velocities[total - params.n:]
    anchor = np.vstack([np.zeros(params.d), np.cumsum(kept * params.dt, axis=0)])
    noise = rng.standard_normal((params.n, params.d))
    positions = anchor[1:] + params.sigma_cargo * noise
    traj = Trajectory(dt=params.dt, positions=positions)

    changes = np.flatnonzero(np.any(kept[1:] != kept[:-1], axis=1)) + 1
    r = ChangepointVector.from_indices(changes, params.n)
    seg_starts = np.concatenate(([0], changes))
    V = kept[seg_starts]
    taus = changes * params.dt
    rss = float(np.sum((positions - anchor[1:]) ** 2))
    truth = _truth_segmentation(params.n, params.d, params.dt, taus,
                                anchor[0].copy(), V, rss)
    assert truth.n_changepoints == r.count
    return traj, truth
