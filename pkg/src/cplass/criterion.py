"""The model-selection criterion maximized by the search.

For a changepoint vector ``r`` with least-squares residual ``RSS_r`` and
fitted segment speeds ``s_j`` the criterion is::

    score(r) = -(n*d/2) * log(RSS_r) - pen(r)
    pen(r)   = log(n)**gamma * rho  +  sum_j max(0, s_j - s_cap)

with ``rho = d*(|r| + 2) + 1`` free parameters and natural logarithms
throughout.  The speed term is omitted when disabled.  A perfect fit is
handled by clamping ``RSS`` at ``1e-300`` (only reachable on noiseless
synthetic data).  Candidates whose design is degenerate score minus infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateFitError
from .fit import fit_given_changepoints
from .model import ChangepointVector, ScoreConfig, Trajectory, param_count

__all__ = ["ScoreBreakdown", "penalty", "score", "RSS_FLOOR"]

RSS_FLOOR = 1e-300


@dataclass(frozen=True)
class ScoreBreakdown:
    """Additive pieces of one criterion evaluation.

    ``total = log_rss_term - ssic_term - speed_term``; ``log_rss_term`` is
    already negated (``-(n*d/2) * log(RSS)``).  A degenerate fit is reported
    with ``total`` and ``log_rss_term`` at minus infinity, never as a silent
    finite number.
    """

    log_rss_term: float
    ssic_term: float
    speed_term: float
    total: float
    rho: int

    @property
    def is_degenerate(self) -> bool:
        return math.isinf(self.total) and self.total < 0


def _ssic_term(n: int, d: int, n_changepoints: int, gamma: float) -> float:
    return math.log(n) ** gamma * param_count(d, n_changepoints)


def _speed_term(speeds, cfg: ScoreConfig) -> float:
    if not cfg.speed_penalty_enabled:
        return 0.0
    excess = 0.0
    for s in speeds:
        if s > cfg.s_cap:
            excess += s - cfg.s_cap
    return cfg.speed_penalty_scale * excess


def penalty(r: ChangepointVector, speeds, cfg: ScoreConfig, n: int, d: int) -> float:
    """Penalty value for ``|r|`` changepoints with the given segment speeds.

    ``speeds`` must hold one entry per segment (``|r| + 1``).
    """
    if len(speeds) != r.count + 1:
        raise ValueError(f"expected {r.count + 1} segment speeds, got {len(speeds)}")
    return _ssic_term(n, d, r.count, cfg.gamma) + _speed_term(speeds, cfg)


def score(traj: Trajectory, r: ChangepointVector, cfg: ScoreConfig) -> ScoreBreakdown:
    """Evaluate the criterion for one changepoint vector.

    Deterministic for fixed inputs.  Returns a minus-infinity sentinel when
    the fit is degenerate.
    """
    n, d = traj.n, traj.d
    ssic = _ssic_term(n, d, r.count, cfg.gamma)
    rho = param_count(d, r.count)
    try:
        seg = fit_given_changepoints(traj, r)
    except DegenerateFitError:
        return ScoreBreakdown(
            log_rss_term=float("-inf"),
            ssic_term=ssic,
            speed_term=0.0,
            total=float("-inf"),
            rho=rho,
        )
    log_rss_term = -(n * d / 2) * math.log(max(seg.rss, RSS_FLOOR))
    speed_term = _speed_term(seg.speeds, cfg)
    return ScoreBreakdown(
        log_rss_term=log_rss_term,
        ssic_term=ssic,
        speed_term=speed_term,
        total=log_rss_term - ssic - speed_term,
        rho=rho,
    )
