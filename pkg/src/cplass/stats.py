"""Population statistics over collections of segmentations.

The central objects are pooled segment records (speed, duration, path id).
From them we compute the cumulative speed allocation (time-weighted CDF of
segment speeds), per-path maximum sustained-speed ECDFs, duration-weighted
kernel density estimates, and bootstrap ensembles over paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyPoolError
from .model import Segmentation

__all__ = [
    "SegmentPool",
    "CsaCurve",
    "Ecdf",
    "Ensemble",
    "default_speed_grid",
    "csa",
    "max_speed_ecdf",
    "weighted_kde",
    "silverman_bandwidth",
    "bootstrap_ensemble",
]

#: Speed below which a segment is conventionally displayed as stationary
#: (plot metadata only; no statistic branches on it).
STATIONARY_DISPLAY_THRESHOLD = 0.1

DEFAULT_GRID_POINTS = 512


@dataclass(frozen=True)
class SegmentPool:
    """Flat collection of segment records pooled across paths."""

    speeds: np.ndarray
    durations: np.ndarray
    path_ids: np.ndarray

    def __post_init__(self):
        speeds = np.asarray(self.speeds, dtype=float)
        durations = np.asarray(self.durations, dtype=float)
        path_ids = np.asarray(self.path_ids, dtype=int)
        if not (speeds.shape == durations.shape == path_ids.shape) or speeds.ndim != 1:
            raise ValueError("speeds, durations and path_ids must be equal-length 1-d arrays")
        if speeds.size == 0:
            raise EmptyPoolError("segment pool is empty")
        if np.any(durations <= 0):
            raise ValueError("segment durations must be positive")
        for name, arr in (("speeds", speeds), ("durations", durations), ("path_ids", path_ids)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_segmentations(cls, segs: Sequence[Segmentation]) -> "SegmentPool":
        if not segs:
            raise EmptyPoolError("no segmentations given")
        speeds = np.concatenate([s.speeds for s in segs])
        durations = np.concatenate([s.durations for s in segs])
        ids = np.concatenate([np.full(s.k, i) for i, s in enumerate(segs)])
        return cls(speeds, durations, ids)

    @property
    def total_time(self) -> float:
        return float(self.durations.sum())


def default_speed_grid(max_speed: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Evaluation grid from 0 to 1.05 times the largest pooled speed."""
    top = 1.05 * max_speed if max_speed > 0 else 1.0
    return np.linspace(0.0, top, points)


@dataclass(frozen=True)
class CsaCurve:
    """Cumulative speed allocation: fraction of total segment time spent at
    speeds less than or equal to each grid value."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be equal-length 1-d arrays")
        if np.any(np.diff(values) < -1e-12):
            raise ValueError("CSA values must be nondecreasing")
        for name, arr in (("grid", grid), ("values", values)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def csa(pool: SegmentPool, grid=None) -> CsaCurve:
    """Time-weighted cumulative distribution of pooled segment speeds.

    ``CSA(s) = sum(duration of segments with speed <= s) / total time``.
    """
    grid = default_speed_grid(float(pool.speeds.max())) if grid is None \
        else np.asarray(grid, dtype=float)
    order = np.argsort(pool.speeds, kind="stable")
    sorted_speeds = pool.speeds[order]
    cum_time = np.cumsum(pool.durations[order])
    idx = np.searchsorted(sorted_speeds, grid, side="right")
    values = np.where(idx > 0, cum_time[np.maximum(idx - 1, 0)], 0.0) / pool.total_time
    return CsaCurve(grid, values)


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF of a sample."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise EmptyPoolError("ECDF over an empty sample")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.searchsorted(self.points, x, side="right") / self.points.size

    @property
    def n(self) -> int:
        return self.points.size


def path_max_speeds(segs: Sequence[Segmentation], min_duration: float) -> np.ndarray:
    """Per-path maximum speed among segments lasting at least ``min_duration``.

    Paths with no qualifying segment are dropped.
    """
    if min_duration < 0:
        raise ValueError("min_duration must be nonnegative")
    maxima = []
    for seg in segs:
        keep = seg.durations >= min_duration
        if np.any(keep):
            maxima.append(float(seg.speeds[keep].max()))
    return np.asarray(maxima)


def max_speed_ecdf(segs: Sequence[Segmentation], min_duration: float = 0.0) -> Ecdf:
    """ECDF of per-path maximum sustained segment speeds.

    Raises :class:`~cplass.errors.EmptyPoolError` when every path is excluded
    by the duration threshold.
    """
    maxima = path_max_speeds(segs, min_duration)
    if maxima.size == 0:
        raise EmptyPoolError(
            f"no path has a segment of duration >= {min_duration}"
        )
    return Ecdf(maxima)


def silverman_bandwidth(values: np.ndarray, weights: np.ndarray) -> float:
    """Silverman-style rule on weighted samples using the effective sample
    size ``(sum w)^2 / sum(w^2)``."""
    w = weights / weights.sum()
    mean = float(np.sum(w * values))
    var = float(np.sum(w * (values - mean) ** 2))
    sd = math.sqrt(var)
    order = np.argsort(values)
    cdf = np.cumsum(w[order])
    q25, q75 = np.interp([0.25, 0.75], cdf, values[order])
    iqr = q75 - q25
    spread_candidates = [s for s in (sd, iqr / 1.34) if s > 0]
    spread = min(spread_candidates) if spread_candidates else 1.0
    n_eff = 1.0 / float(np.sum(w * w))
    return 0.9 * spread * n_eff ** (-1 / 5)


def weighted_kde(pool: SegmentPool, bandwidth: float | None = None,
                 grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Duration-weighted Gaussian kernel density of pooled segment speeds.

    Speeds are nonnegative, so the kernel mass that would fall below zero is
    reflected back across the origin; the density then integrates to one over
    ``[0, inf)``.  Returns ``(grid, density)``.
    """
    weights = pool.durations / pool.total_time
    if bandwidth is None:
        bandwidth = silverman_bandwidth(pool.speeds, pool.durations)
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if grid is None:
        top = float(pool.speeds.max()) + 5 * bandwidth
        grid = np.linspace(0.0, max(top, 1e-6), DEFAULT_GRID_POINTS)
    else:
        grid = np.asarray(grid, dtype=float)
    norm = 1.0 / (bandwidth * math.sqrt(2 * math.pi))
    diff = (grid[:, None] - pool.speeds[None, :]) / bandwidth
    refl = (grid[:, None] + pool.speeds[None, :]) / bandwidth
    density = norm * np.sum(weights[None, :] * (np.exp(-0.5 * diff ** 2)
                                                + np.exp(-0.5 * refl ** 2)), axis=1)
    return grid, density


@dataclass(frozen=True)
class Ensemble:
    """Bootstrap ensemble of curves evaluated on one shared grid."""

    grid: np.ndarray
    curves: np.ndarray
    point: np.ndarray

    def band(self, lower: float = 0.025, upper: float = 0.975) -> tuple[np.ndarray, np.ndarray]:
        return (np.quantile(self.curves, lower, axis=0),
                np.quantile(self.curves, upper, axis=0))


def bootstrap_ensemble(segs: Sequence[Segmentation], statistic: str, n_boot: int,
                       seed, grid=None, min_duration: float = 0.0,
                       rng: np.random.Generator | None = None) -> Ensemble:
    """Resample paths with replacement and recompute a curve per resample.

    ``statistic`` is ``"csa"`` or ``"ecdf"`` (the latter filtered by
    ``min_duration``).  Deterministic given ``seed``.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    segs = list(segs)
    if not segs:
        raise EmptyPoolError("no segmentations given")
    if rng is None:
        rng = np.random.default_rng(seed)

    if statistic == "csa":
        pool = SegmentPool.from_segmentations(segs)
        if grid is None:
            grid = default_speed_grid(float(pool.speeds.max()))
        point = csa(pool, grid).values
    elif statistic == "ecdf":
        maxima = path_max_speeds(segs, min_duration)
        if maxima.size == 0:
            raise EmptyPoolError("every path excluded by the duration threshold")
        if grid is None:
            grid = default_speed_grid(float(maxima.max()))
        point = Ecdf(maxima)(grid)
    else:
        raise ValueError(f"unknown statistic {statistic!r}")

    grid = np.asarray(grid, dtype=float)
    curves = np.empty((n_boot, grid.size))
    for b in range(n_boot):
        take = rng.integers(0, len(segs), size=len(segs))
        resample = [segs[i] for i in take]
        if statistic == "csa":
            curves[b] = csa(SegmentPool.from_segmentations(resample), grid).values
        else:
            maxima = path_max_speeds(resample, min_duration)
            curves[b] = Ecdf(maxima)(grid) if maxima.size else np.zeros(grid.size)
    return Ensemble(grid=grid, curves=curves, point=np.asarray(point))
