"""Core value types: trajectories, changepoint vectors, fit results, configs.

Conventions used throughout the package:

* Times are in seconds, positions in micrometers (documented, not enforced).
* Observations sit on a uniform grid ``t_i = t0 + i*dt`` for ``i = 1..n``,
  so with the default ``t0 = 0`` the first observation is at ``dt`` and the
  last at ``T = n*dt``.
* A changepoint "index" ``m`` in ``1..n-1`` marks a velocity change between
  observations ``m`` and ``m+1``; its time is ``tau = t0 + m*dt``.  A
  :class:`ChangepointVector` stores these as a boolean mask of length
  ``n - 1`` where mask position ``m - 1`` corresponds to index ``m``.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

__all__ = [
    "Trajectory",
    "ChangepointVector",
    "Segmentation",
    "ScoreConfig",
    "McmcConfig",
    "ChainTrace",
    "cp_vector_to_times",
    "times_to_cp_vector",
    "param_count",
]


def _frozen_array(values, dtype=float, ndim=None) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr = arr.copy() if arr.flags.writeable else arr
    arr.flags.writeable = False
    return arr


def param_count(d: int, n_changepoints: int) -> int:
    """Number of free parameters of a model with ``n_changepoints`` changes.

    With ``k = n_changepoints + 1`` segments in ``d`` dimensions the model has
    ``d`` intercepts, ``k*d`` velocity components and one noise variance:
    ``d*(k + 1) + 1``.  Every module that needs a parameter count goes through
    this function.
    """
    return d * (n_changepoints + 2) + 1


@dataclass(frozen=True)
class Trajectory:
    """A uniformly sampled d-dimensional position time series.

    Parameters
    ----------
    dt : float
        Grid spacing in seconds.
    positions : ndarray, shape (n, d)
        Observed coordinates in micrometers, row ``i`` observed at
        ``t0 + (i + 1) * dt``.
    t0 : float
        Time origin; observation times start one step after it.
    """

    dt: float
    positions: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        pos = _frozen_array(self.positions, ndim=2)
        object.__setattr__(self, "positions", pos)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if pos.shape[0] < 2 or pos.shape[1] < 1:
            raise ValueError("need n >= 2 observations and d >= 1 dimensions")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def duration(self) -> float:
        """Total observed span ``T = n * dt``."""
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        """Observation times ``t0 + dt, ..., t0 + n*dt``."""
        return self.t0 + self.dt * np.arange(1, self.n + 1)


class ChangepointVector:
    """Binary mask over the ``n - 1`` interior grid steps of a trajectory.

    ``bits[m - 1]`` set means a velocity change at grid index ``m``
    (time ``m * dt`` relative to the origin).  ``count`` changepoints split
    the trajectory into ``count + 1`` segments.
    """

    __slots__ = ("bits", "n", "_key")

    def __init__(self, bits, n: int):
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 1 or arr.shape[0] != n - 1:
            raise ValueError(f"bits must have length n-1 = {n - 1}, got {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("ChangepointVector is immutable")

    @classmethod
    def empty(cls, n: int) -> "ChangepointVector":
        return cls(np.zeros(n - 1, dtype=bool), n)

    @classmethod
    def from_indices(cls, indices, n: int) -> "ChangepointVector":
        """Build from grid indices in ``1..n-1`` (one per changepoint)."""
        bits = np.zeros(n - 1, dtype=bool)
        idx = np.asarray(indices, dtype=int)
        if idx.size:
            if idx.min() < 1 or idx.max() > n - 1:
                raise ValueError("changepoint indices must lie in 1..n-1")
            if np.unique(idx).size != idx.size:
                raise ValueError("changepoint indices must be distinct")
            bits[idx - 1] = True
        return cls(bits, n)

    @property
    def count(self) -> int:
        """Number of changepoints ``|r|``."""
        return int(self.bits.sum())

    @property
    def k(self) -> int:
        """Number of segments, ``|r| + 1``."""
        return self.count + 1

    @property
    def indices(self) -> np.ndarray:
        """Sorted changepoint grid indices ``m_1 < ... < m_|r|``."""
        return np.flatnonzero(self.bits) + 1

    def segment_lengths(self) -> np.ndarray:
        """Grid-step length of each segment; sums to ``n``."""
        idx = self.indices
        return np.diff(np.concatenate(([0], idx, [self.n])))

    def with_flipped(self, *grid_indices: int) -> "ChangepointVector":
        bits = self.bits.copy()
        for m in grid_indices:
            bits[m - 1] = ~bits[m - 1]
        return ChangepointVector(bits, self.n)

    def key(self) -> bytes:
        """Compact hashable encoding of the bit pattern."""
        if self._key is None:
            object.__setattr__(self, "_key", np.packbits(self.bits).tobytes())
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChangepointVector):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self) -> int:
        return hash((self.n, self.key()))

    def __repr__(self) -> str:
        return f"ChangepointVector(indices={self.indices.tolist()}, n={self.n})"


def cp_vector_to_times(r: ChangepointVector, dt: float, t0: float = 0.0) -> np.ndarray:
    """Changepoint times ``tau_j = t0 + m_j * dt``, strictly increasing."""
    return t0 + r.indices * dt


def times_to_cp_vector(taus, n: int, dt: float, t0: float = 0.0) -> ChangepointVector:
    """Snap changepoint times to the nearest grid index (inverse of
    :func:`cp_vector_to_times` for on-grid times)."""
    taus = np.asarray(taus, dtype=float)
    indices = np.rint((taus - t0) / dt).astype(int)
    return ChangepointVector.from_indices(indices, n)


@dataclass(frozen=True)
class Segmentation:
    """A fitted (or ground-truth) continuous piecewise-linear description.

    Attributes
    ----------
    n, d, dt, t0 : grid geometry of the trajectory this refers to.
    tau : ndarray, shape (k-1,)
        Changepoint times in seconds.
    intercept : ndarray, shape (d,)
        Anchor position at the time origin ``t0``.
    W : ndarray, shape (k, d)
        Velocity-difference rows: ``W[0] = V[0]`` and ``W[j] = V[j] - V[j-1]``.
    V : ndarray, shape (k, d)
        Per-segment velocities in um/s (cumulative sums of ``W`` rows).
    speeds : ndarray, shape (k,)
        Euclidean norms of the velocity rows.
    durations : ndarray, shape (k,)
        Segment durations; they sum to ``n * dt``.
    rss : float
        Residual sum of squares over all dimensions (um^2).
    sigma2_hat : float
        ``rss / (d * n)``.
    """

    n: int
    d: int
    dt: float
    tau: np.ndarray
    intercept: np.ndarray
    W: np.ndarray
    V: np.ndarray
    speeds: np.ndarray
    durations: np.ndarray
    rss: float
    sigma2_hat: float
    t0: float = 0.0

    def __post_init__(self):
        for name, ndim in (("tau", 1), ("intercept", 1), ("W", 2), ("V", 2),
                           ("speeds", 1), ("durations", 1)):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), ndim=ndim))
        k = self.W.shape[0]
        if self.V.shape != (k, self.d) or self.speeds.shape != (k,) \
                or self.durations.shape != (k,) or self.tau.shape != (k - 1,):
            raise ValueError("inconsistent segmentation shapes")
        if np.any(self.durations <= 0):
            raise ValueError("segment durations must be positive")

    @property
    def k(self) -> int:
        """Number of segments."""
        return self.W.shape[0]

    @property
    def n_changepoints(self) -> int:
        return self.k - 1

    def predict(self, times) -> np.ndarray:
        """Evaluate the fitted signal at arbitrary times (shape (m, d)).

        Uses the hinge-basis form, which is continuous across changepoints by
        construction.
        """
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = self.intercept[None, :] + np.outer(t, self.W[0])
        for j in range(1, self.k):
            hinge = np.where(t > self.tau[j - 1], t - self.tau[j - 1], 0.0)
            out += np.outer(hinge, self.W[j])
        return out


@dataclass(frozen=True)
class ScoreConfig:
    """Settings of the model-selection criterion.

    ``gamma`` is the exponent on ``log(n)`` in the complexity penalty
    (natural log; must exceed 1).  ``s_cap`` is the largest segment speed in
    um/s that incurs no penalty.  ``speed_penalty_scale`` rescales the speed
    penalty for experimentation only; the criterion as specified uses 1.0.
    ``k_max`` optionally caps the number of segments the search may visit.
    """

    gamma: float = 1.01
    s_cap: float = 5.0
    speed_penalty_enabled: bool = True
    speed_penalty_scale: float = 1.0
    k_max: int | None = None

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must be > 1")
        if self.s_cap <= 0:
            raise ValueError("s_cap must be positive")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be >= 1 when given")

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "s_cap": self.s_cap,
            "speed_penalty_enabled": self.speed_penalty_enabled,
            "speed_penalty_scale": self.speed_penalty_scale,
            "k_max": self.k_max,
        }


@dataclass(frozen=True)
class McmcConfig:
    """Settings of the stochastic search.

    ``lam`` is the changepoint rate (per second) of the independent-redraw
    proposal; a fresh bit is set with probability ``1 - exp(-lam * dt)``.
    ``u1 < u2 < u3`` are the cumulative selection weights of proposal types
    1-3 (type 4 receives the remainder).  ``t_max`` is the number of sampler
    steps and ``seed`` the generator seed.
    """

    lam: float = 1.0
    u1: float = 0.25
    u2: float = 0.375
    u3: float = 0.5
    t_max: int = 20_000
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.u1 <= self.u2 <= self.u3 < 1):
            raise ValueError("need 0 < u1 <= u2 <= u3 < 1")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")

    def as_dict(self) -> dict:
        return {
            "lam": self.lam,
            "u1": self.u1,
            "u2": self.u2,
            "u3": self.u3,
            "t_max": self.t_max,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ChainTrace:
    """Per-iteration record of one sampler run.

    Row 0 is the initial state (proposal type 0, counted as accepted); rows
    ``1..t_max`` record each Metropolis step.  ``best_r``/``best_score`` track
    the highest-scoring state visited, first occurrence winning ties; minus
    infinity scores never enter the tracking.
    """

    scores: np.ndarray
    accepted: np.ndarray
    proposal_types: np.ndarray
    num_changepoints: np.ndarray
    best_r: ChangepointVector
    best_score: float
    best_iteration: int
    first_hit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen_array(self.scores, ndim=1))
        object.__setattr__(self, "accepted", _frozen_array(self.accepted, dtype=bool, ndim=1))
        object.__setattr__(self, "proposal_types",
                           _frozen_array(self.proposal_types, dtype=np.int8, ndim=1))
        object.__setattr__(self, "num_changepoints",
                           _frozen_array(self.num_changepoints, dtype=np.int32, ndim=1))

    @property
    def n_iterations(self) -> int:
        """Number of Metropolis steps (excludes the initial state)."""
        return len(self.scores) - 1

    @property
    def acceptance_rate(self) -> float:
        if self.n_iterations == 0:
            return float("nan")
        return float(self.accepted[1:].mean())
