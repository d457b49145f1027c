"""Metropolis-Hastings stochastic search over changepoint vectors.

One chain is strictly sequential; independent chains parallelize across
trajectories, each owning its own generator.  Generators are NumPy
``default_rng`` (PCG64); batch drivers derive per-trajectory seeds from a
master seed with ``SeedSequence.spawn`` so results do not depend on
scheduling order.

Each step draws one uniform to select a kernel by the configured cutpoints,
generates a proposal, and accepts with log-probability::

    log(alpha) = min{0, score(r') - score(r) + log q(r | r') - log q(r' | r)}

where both densities come from the selected kernel.  Steps whose proposal is
null (impossible branch or selection) and steps taken from a minus-infinity
state are rejections.  Scores are memoized per chain keyed by the packed bit
pattern, so revisited states cost a dictionary lookup instead of a refit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .criterion import score
from .fit import fit_given_changepoints
from .model import ChainTrace, ChangepointVector, McmcConfig, ScoreConfig, Segmentation, Trajectory
from .proposals import NEG_INF, ProposalType, make_proposal

__all__ = ["StepRecord", "mh_step", "run_chain", "cplass", "score_total"]

INITIAL_REDRAW_LIMIT = 100


def score_total(traj: Trajectory, r: ChangepointVector, cfg: ScoreConfig,
                cache: dict | None = None) -> float:
    """Criterion total for ``r``, memoized in ``cache`` when given."""
    if cache is None:
        return score(traj, r, cfg).total
    key = r.key()
    value = cache.get(key)
    if value is None:
        value = score(traj, r, cfg).total
        cache[key] = value
    return value


@dataclass(frozen=True)
class StepRecord:
    proposal_type: ProposalType
    accepted: bool
    score: float
    n_changepoints: int
    log_alpha: float


def _select_kernel(u: float, mcfg: McmcConfig) -> ProposalType:
    if u <= mcfg.u1:
        return ProposalType.NEW
    if u <= mcfg.u2:
        return ProposalType.BIRTH_DEATH
    if u <= mcfg.u3:
        return ProposalType.SEGMENT_BD
    return ProposalType.SHIFT


def _exceeds_k_max(r: ChangepointVector, cfg: ScoreConfig) -> bool:
    return cfg.k_max is not None and r.count + 1 > cfg.k_max


def mh_step(state: tuple[ChangepointVector, float], traj: Trajectory,
            cfg: ScoreConfig, mcfg: McmcConfig, rng: np.random.Generator,
            *, cache: dict | None = None,
            force_kernel: ProposalType | None = None,
            ) -> tuple[ChangepointVector, float, StepRecord]:
    """One Metropolis step from ``state = (r_cur, score_cur)``.

    The proposed vector is scored at most once.  ``force_kernel`` bypasses the
    kernel-selection draw (used by diagnostics that study a single kernel).
    """
    r_cur, score_cur = state
    if force_kernel is None:
        kernel = _select_kernel(rng.random(), mcfg)
    else:
        kernel = force_kernel
    prop = make_proposal(kernel, rng, r_cur, mcfg.lam, traj.dt)

    def rejected() -> tuple[ChangepointVector, float, StepRecord]:
        return r_cur, score_cur, StepRecord(kernel, False, score_cur, r_cur.count, NEG_INF)

    # Null proposal, proposal over the segment cap, or a minus-infinity
    # current state: zero-density branch, counted as a rejection.
    if prop.is_null or _exceeds_k_max(prop.r_prop, cfg) or score_cur == NEG_INF:
        return rejected()
    score_prop = score_total(traj, prop.r_prop, cfg, cache)
    if score_prop == NEG_INF or prop.reverse_log_density == NEG_INF:
        return rejected()
    log_alpha = min(0.0, score_prop - score_cur
                    + prop.reverse_log_density - prop.forward_log_density)
    if rng.random() < math.exp(log_alpha):
        record = StepRecord(kernel, True, score_prop, prop.r_prop.count, log_alpha)
        return prop.r_prop, score_prop, record
    return r_cur, score_cur, StepRecord(kernel, False, score_cur, r_cur.count, log_alpha)


def _draw_initial(traj: Trajectory, cfg: ScoreConfig, mcfg: McmcConfig,
                  rng: np.random.Generator, cache: dict) -> tuple[ChangepointVector, float]:
    """Initial state: i.i.d. Bernoulli bits, redrawn while unusable.

    A draw is unusable when its fit is degenerate or it exceeds the segment
    cap; after ``INITIAL_REDRAW_LIMIT`` attempts the empty vector is used.
    """
    p = -math.expm1(-mcfg.lam * traj.dt)
    for _ in range(INITIAL_REDRAW_LIMIT):
        r0 = ChangepointVector(rng.random(traj.n - 1) < p, traj.n)
        if _exceeds_k_max(r0, cfg):
            continue
        s0 = score_total(traj, r0, cfg, cache)
        if s0 > NEG_INF:
            return r0, s0
    r0 = ChangepointVector.empty(traj.n)
    return r0, score_total(traj, r0, cfg, cache)


def run_chain(traj: Trajectory, cfg: ScoreConfig, mcfg: McmcConfig,
              *, rng: np.random.Generator | None = None,
              hit_predicate: Callable[[ChangepointVector], bool] | None = None,
              ) -> ChainTrace:
    """Run ``t_max`` Metropolis steps and record the trace.

    Deterministic given ``mcfg.seed`` (or a caller-supplied generator).  Row 0
    of the trace is the initial state.  ``hit_predicate``, when given, is
    evaluated on every visited state; the first iteration where it holds is
    stored as ``first_hit``.
    """
    if rng is None:
        rng = np.random.default_rng(mcfg.seed)
    cache: dict = {}
    r, s = _draw_initial(traj, cfg, mcfg, rng, cache)

    t_max = mcfg.t_max
    scores = np.empty(t_max + 1)
    accepted = np.zeros(t_max + 1, dtype=bool)
    kinds = np.zeros(t_max + 1, dtype=np.int8)
    counts = np.zeros(t_max + 1, dtype=np.int32)

    scores[0], accepted[0], kinds[0], counts[0] = s, True, ProposalType.INITIAL, r.count
    best_r, best_score, best_iter = r, s, 0
    first_hit = 0 if (hit_predicate is not None and hit_predicate(r)) else None

    for t in range(1, t_max + 1):
        r, s, rec = mh_step((r, s), traj, cfg, mcfg, rng, cache=cache)
        scores[t] = s
        accepted[t] = rec.accepted
        kinds[t] = rec.proposal_type
        counts[t] = rec.n_changepoints
        if s > best_score:
            best_r, best_score, best_iter = r, s, t
        if first_hit is None and rec.accepted and hit_predicate is not None and hit_predicate(r):
            first_hit = t

    return ChainTrace(
        scores=scores,
        accepted=accepted,
        proposal_types=kinds,
        num_changepoints=counts,
        best_r=best_r,
        best_score=best_score,
        best_iteration=best_iter,
        first_hit=first_hit,
    )


def cplass(traj: Trajectory, cfg: ScoreConfig, mcfg: McmcConfig,
           *, rng: np.random.Generator | None = None) -> tuple[Segmentation, ChainTrace]:
    """Full detection run: search, then refit at the best-scoring vector.

    Ties in the best score are resolved by first occurrence.
    """
    trace = run_chain(traj, cfg, mcfg, rng=rng)
    seg = fit_given_changepoints(traj, trace.best_r)
    return seg, trace
