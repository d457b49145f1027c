"""Exact continuous piecewise-linear least squares on the hinge basis.

Given changepoint times ``tau_1 < ... < tau_{k-1}`` the design matrix has
columns ``[1, t, (t - tau_1)_+, ..., (t - tau_{k-1})_+]`` where ``(x)_+`` is
``x`` for ``x > 0`` and zero otherwise.  Solving ordinary least squares per
dimension on this basis yields the maximum-likelihood continuous
piecewise-linear signal: the solution vector stacks the intercept and the
velocity-difference rows, and per-segment velocities are their cumulative
sums.

The solve uses a QR factorization of the design rather than normal equations;
the factorization is shared across all ``d`` dimensions.  A design whose
smallest ``R`` diagonal falls below ``1e-10`` times the largest is reported
as :class:`~cplass.errors.DegenerateFitError` so that callers (the sampler)
can treat the candidate as invalid.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateFitError, DimensionMismatchError, InvalidChangepointsError
from .model import ChangepointVector, Segmentation, Trajectory, cp_vector_to_times

__all__ = ["build_design", "fit_given_changepoints", "rss_of", "RANK_TOLERANCE"]

RANK_TOLERANCE = 1e-10


def build_design(traj: Trajectory, taus) -> np.ndarray:
    """Hinge design matrix of shape ``(n, k + 1)`` for the given changepoints.

    Parameters
    ----------
    traj : Trajectory
    taus : array-like
        Changepoint times, strictly increasing, each inside the open
        observation window ``(t0, t0 + n*dt)``.

    Raises
    ------
    InvalidChangepointsError
        If the times are not strictly increasing or fall outside the window.
    """
    taus = np.asarray(taus, dtype=float)
    t = traj.times
    if taus.size:
        if np.any(np.diff(taus) <= 0):
            raise InvalidChangepointsError("changepoint times must be strictly increasing")
        if taus[0] <= traj.t0 or taus[-1] >= traj.t0 + traj.duration:
            raise InvalidChangepointsError("changepoint times must lie inside the observation window")
    design = np.empty((traj.n, taus.size + 2))
    design[:, 0] = 1.0
    design[:, 1] = t
    for j, tau in enumerate(taus):
        design[:, 2 + j] = np.where(t > tau, t - tau, 0.0)
    return design


def _solve_design(design: np.ndarray, Y: np.ndarray):
    """QR solve for all dimensions at once; returns (coeffs, rss)."""
    q, rmat = np.linalg.qr(design)
    diag = np.abs(np.diag(rmat))
    if diag.min() <= RANK_TOLERANCE * diag.max():
        raise DegenerateFitError(
            f"design matrix is rank deficient (diag ratio {diag.min():.3e}/{diag.max():.3e})"
        )
    coeffs = np.linalg.solve(rmat, q.T @ Y)
    resid = Y - design @ coeffs
    return coeffs, float(np.sum(resid * resid))


def fit_given_changepoints(traj: Trajectory, r: ChangepointVector) -> Segmentation:
    """Least-squares continuous piecewise-linear fit at fixed changepoints.

    Parameters
    ----------
    traj : Trajectory
    r : ChangepointVector
        Must refer to the same ``n``; needs ``n >= k + 1`` observations for
        the ``k = |r| + 1`` segments.

    Returns
    -------
    Segmentation
        With velocities, speeds, durations, total ``rss`` and
        ``sigma2_hat = rss / (d * n)``.

    Raises
    ------
    DegenerateFitError
        If the design is numerically singular (e.g. too few observations).
    """
    if r.n != traj.n:
        raise DimensionMismatchError(f"changepoint vector is for n={r.n}, trajectory has n={traj.n}")
    taus = cp_vector_to_times(r, traj.dt, traj.t0)
    design = build_design(traj, taus)
    if design.shape[1] > traj.n:
        raise DegenerateFitError(
            f"{design.shape[1]} parameters but only {traj.n} observations per dimension"
        )
    coeffs, rss = _solve_design(design, traj.positions)
    W = coeffs[1:, :]
    V = np.cumsum(W, axis=0)
    bounds = np.concatenate(([traj.t0], taus, [traj.t0 + traj.duration]))
    return Segmentation(
        n=traj.n,
        d=traj.d,
        dt=traj.dt,
        t0=traj.t0,
        tau=taus,
        intercept=coeffs[0, :],
        W=W,
        V=V,
        speeds=np.linalg.norm(V, axis=1),
        durations=np.diff(bounds),
        rss=rss,
        sigma2_hat=rss / (traj.d * traj.n),
    )


def rss_of(traj: Trajectory, seg: Segmentation) -> float:
    """Residual sum of squares of ``seg``'s signal against ``traj``.

    Recomputed from scratch; for a segmentation produced by
    :func:`fit_given_changepoints` on the same data this agrees with
    ``seg.rss`` up to solver tolerance.
    """
    if seg.n != traj.n or seg.d != traj.d:
        raise DimensionMismatchError(
            f"segmentation is for (n={seg.n}, d={seg.d}), trajectory has (n={traj.n}, d={traj.d})"
        )
    fitted = seg.predict(traj.times)
    resid = traj.positions - fitted
    return float(np.sum(resid * resid))
