"""Scripted numerical studies: score profiles and surfaces, detection-rate
sweeps, the power grid, the large-sample consistency trend, and the
segment-pair-proposal necessity demonstration.

Every study is a pure function of its arguments plus a master seed; task
seeds derive from the master via :mod:`cplass.seeds`, so re-running with the
same inputs reproduces every table bit-identically regardless of the worker
count.  Study results embed the full configuration for provenance.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import ChangepointVector, McmcConfig, ScoreConfig, Segmentation, Trajectory
from .criterion import score
from .sampler import cplass, run_chain
from .seeds import child_sequence
from .simulate import PiecewiseTruth, TwoStateParams, simulate_piecewise, simulate_two_state, truth_from_changepoints

__all__ = [
    "DetectionStudySetup",
    "component_truth",
    "short_segment_study_a",
    "short_segment_study_b",
    "two_change_demo_truth",
    "short_fast_pair_truth",
    "ScoreProfile",
    "score_profile",
    "ScoreSurface",
    "score_surface_2cp",
    "count_local_maxima",
    "GammaSweepResult",
    "gamma_sweep",
    "PowerGridResult",
    "power_grid",
    "power_grid_truth",
    "ConsistencyResult",
    "consistency_trend",
    "Type3Result",
    "type3_necessity",
    "TwoStateBatch",
    "run_two_state_batch",
    "default_workers",
]

#: A detected time matches a true changepoint when within this many grid
#: steps of it (used wherever locations, not just counts, are compared).
LOCATION_MATCH_STEPS = 10


def default_workers() -> int:
    """Worker-pool size: the ``CPLASS_THREADS`` variable, else 1."""
    value = os.environ.get("CPLASS_THREADS", "").strip()
    if value:
        return max(1, int(value))
    return 1


def _pmap(fn, tasks: list, workers: int) -> list:
    """Order-preserving map, optionally over a process pool."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# Built-in study setups
# ---------------------------------------------------------------------------

def component_truth(n: int, dt: float, cp_times, component_speeds, sigma: float,
                    d: int = 2) -> PiecewiseTruth:
    """Truth whose segment velocities have the stated per-dimension magnitude.

    A stated value ``s`` becomes the velocity ``(s, -s, s, ...)`` across the
    ``d`` coordinates (segment speed ``s * sqrt(d)``), the component
    convention of the two-change demo path.  The built-in study setups use
    this convention.
    """
    rows = []
    for s in component_speeds:
        rows.append(tuple(s if j % 2 == 0 else -s for j in range(d)))
    return PiecewiseTruth(
        tau_true=tuple(cp_times),
        V_true=tuple(rows),
        intercept_true=(0.0,) * d,
        sigma=sigma,
        dt=dt,
        n=n,
    )


@dataclass(frozen=True)
class DetectionStudySetup:
    """A paired null/alternative simulation design.

    The alternative has two velocity changes (``cp_times``/``speeds``); the
    null is the same grid and noise with a single zero-speed segment.
    ``speeds`` are per-dimension velocity magnitudes (see
    :func:`component_truth`).
    """

    name: str
    n: int
    dt: float
    sigma: float
    cp_times: tuple
    speeds: tuple
    d: int = 2

    def alternative_truth(self) -> PiecewiseTruth:
        return component_truth(self.n, self.dt, self.cp_times, self.speeds,
                               self.sigma, d=self.d)

    def null_truth(self) -> PiecewiseTruth:
        return truth_from_changepoints(self.n, self.dt, (), (0.0,), self.sigma, d=self.d)

    def as_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "dt": self.dt, "sigma": self.sigma,
                "cp_times": list(self.cp_times), "speeds": list(self.speeds), "d": self.d}


def short_segment_study_a() -> DetectionStudySetup:
    """20 Hz, 2.65 s paths with a 0.45 s middle segment at 0.1 um/s."""
    return DetectionStudySetup("short-segment-a", n=53, dt=0.05, sigma=0.01,
                               cp_times=(1.1, 1.55), speeds=(0.0, 0.1, 0.0))


def short_segment_study_b() -> DetectionStudySetup:
    """20 Hz, 10.15 s paths with a 0.15 s middle segment at 0.15 um/s."""
    return DetectionStudySetup("short-segment-b", n=203, dt=0.05, sigma=0.01,
                               cp_times=(5.0, 5.15), speeds=(0.0, 0.15, 0.0))


def two_change_demo_truth(sigma: float = 0.1) -> PiecewiseTruth:
    """20 Hz, 30 s two-change path with opposing diagonal velocities."""
    return PiecewiseTruth(
        tau_true=(10.0, 20.0),
        V_true=((0.1, -0.1), (0.0, 0.0), (-0.1, 0.1)),
        intercept_true=(0.0, 0.0),
        sigma=sigma,
        dt=0.05,
        n=600,
    )


def short_fast_pair_truth(sigma: float = 0.07) -> PiecewiseTruth:
    """100 Hz, 6 s path with a 0.5 s motile burst (0.2 um/s per dimension).

    The default noise scale puts the path in the regime the segment-pair
    proposal exists for: the burst is collectively significant while either
    endpoint alone lowers the criterion.
    """
    return component_truth(600, 0.01, (3.0, 3.5), (0.0, 0.2, 0.0), sigma)


# ---------------------------------------------------------------------------
# Score profiles and surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreProfile:
    indices: np.ndarray
    scores: np.ndarray
    base_score: float


def score_profile(traj: Trajectory, base_r: ChangepointVector, sweep_indices,
                  cfg: ScoreConfig) -> ScoreProfile:
    """Scores of ``base_r`` with one extra changepoint at each swept index.

    Indices already set in ``base_r`` reproduce the base score.
    """
    indices = np.asarray(list(sweep_indices), dtype=int)
    base_score = score(traj, base_r, cfg).total
    scores = np.empty(indices.size)
    for pos, m in enumerate(indices):
        if base_r.bits[m - 1]:
            scores[pos] = base_score
        else:
            scores[pos] = score(traj, base_r.with_flipped(int(m)), cfg).total
    return ScoreProfile(indices=indices, scores=scores, base_score=base_score)


@dataclass(frozen=True)
class ScoreSurface:
    indices: np.ndarray
    values: np.ndarray
    base_score: float

    def argmax_pair(self) -> tuple[int, int]:
        flat = np.nanargmax(self.values)
        i, j = np.unravel_index(flat, self.values.shape)
        return int(self.indices[i]), int(self.indices[j])


def score_surface_2cp(traj: Trajectory, stride: int, cfg: ScoreConfig) -> ScoreSurface:
    """Two-changepoint score surface relative to the no-change model.

    Entry ``(a, b)`` with ``a < b`` on the strided index grid holds
    ``score({a, b}) - score(empty)``; the lower triangle and diagonal are NaN.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    indices = np.arange(1, traj.n, stride)
    base = score(traj, ChangepointVector.empty(traj.n), cfg).total
    values = np.full((indices.size, indices.size), np.nan)
    empty = ChangepointVector.empty(traj.n)
    for a_pos, a in enumerate(indices):
        for b_pos in range(a_pos + 1, indices.size):
            b = indices[b_pos]
            values[a_pos, b_pos] = score(traj, empty.with_flipped(int(a), int(b)), cfg).total - base
    return ScoreSurface(indices=indices, values=values, base_score=base)


def count_local_maxima(values: np.ndarray) -> int:
    """Strict local maxima under the 4-neighborhood, ignoring NaN cells."""
    count = 0
    rows, cols = values.shape
    for i in range(rows):
        for j in range(cols):
            v = values[i, j]
            if np.isnan(v):
                continue
            neighbors = []
            if i > 0:
                neighbors.append(values[i - 1, j])
            if i < rows - 1:
                neighbors.append(values[i + 1, j])
            if j > 0:
                neighbors.append(values[i, j - 1])
            if j < cols - 1:
                neighbors.append(values[i, j + 1])
            finite = [x for x in neighbors if not np.isnan(x)]
            if finite and all(v > x for x in finite):
                count += 1
    return count


# ---------------------------------------------------------------------------
# Detection-rate studies
# ---------------------------------------------------------------------------

def _detection_task(args) -> tuple[int, tuple, tuple]:
    """Simulate one path and detect; returns (count, tau_hat, speeds_hat)."""
    truth, master_seed, task_index, cfg, mcfg = args
    seq = child_sequence(master_seed, task_index)
    sim_ss, chain_ss = seq.spawn(2)
    traj, _ = simulate_piecewise(truth, sim_ss)
    seg, _ = cplass(traj, cfg, mcfg, rng=np.random.default_rng(chain_ss))
    return seg.n_changepoints, tuple(seg.tau.tolist()), tuple(seg.speeds.tolist())


@dataclass(frozen=True)
class GammaSweepResult:
    """Detection rates per (gamma, speed-penalty mode)."""

    gammas: tuple
    rows: tuple  # (gamma, speed_penalty_enabled, alt_rate, null_rate)
    replicates: int
    config: dict


def gamma_sweep(setup: DetectionStudySetup, gammas, replicates: int, mcfg: McmcConfig,
                *, s_cap: float = 5.0, penalty_modes=(True, False),
                workers: int | None = None) -> GammaSweepResult:
    """Fraction of alternative paths with exactly two detected changes and of
    null paths with any detected change, per gamma and penalty mode.

    The same simulated paths (seeded by replicate index) are reused across
    gammas and penalty modes.
    """
    if workers is None:
        workers = default_workers()
    gammas = tuple(float(g) for g in gammas)
    alt = setup.alternative_truth()
    null = setup.null_truth()
    rows = []
    for gamma in gammas:
        for mode in penalty_modes:
            cfg = ScoreConfig(gamma=gamma, s_cap=s_cap, speed_penalty_enabled=mode)
            tasks = [(alt, mcfg.seed, i, cfg, mcfg) for i in range(replicates)]
            tasks += [(null, mcfg.seed, replicates + i, cfg, mcfg) for i in range(replicates)]
            results = _pmap(_detection_task, tasks, workers)
            alt_counts = [r[0] for r in results[:replicates]]
            null_counts = [r[0] for r in results[replicates:]]
            alt_rate = sum(1 for c in alt_counts if c == 2) / replicates
            null_rate = sum(1 for c in null_counts if c > 0) / replicates
            rows.append((gamma, mode, alt_rate, null_rate))
    return GammaSweepResult(
        gammas=gammas,
        rows=tuple(rows),
        replicates=replicates,
        config={"setup": setup.as_dict(), "s_cap": s_cap, "mcmc": mcfg.as_dict(),
                "replicates": replicates},
    )


def power_grid_truth(duration: float, speed: float, *, dt: float = 0.05,
                     sigma: float = 0.01, flank: float = 2.0) -> PiecewiseTruth:
    """Three-segment truth: ``flank`` s at rest, ``duration`` s moving with
    per-dimension magnitude ``speed``, ``flank`` s at rest."""
    n = round((2 * flank + duration) / dt)
    return component_truth(n, dt, (flank, flank + duration), (0.0, speed, 0.0), sigma)


@dataclass(frozen=True)
class PowerGridResult:
    durations: np.ndarray
    speeds: np.ndarray
    p_correct: np.ndarray
    replicates: int
    config: dict


def power_grid(durations, speeds, replicates: int, mcfg: McmcConfig,
               *, cfg: ScoreConfig | None = None, dt: float = 0.05,
               sigma: float = 0.01, workers: int | None = None) -> PowerGridResult:
    """Proportion of replicates with exactly two detected changes per
    (middle-segment duration, middle-segment speed) cell."""
    if workers is None:
        workers = default_workers()
    if cfg is None:
        cfg = ScoreConfig()
    durations = np.asarray(list(durations), dtype=float)
    speeds = np.asarray(list(speeds), dtype=float)
    tasks = []
    for ci, dur in enumerate(durations):
        for cj, sp in enumerate(speeds):
            truth = power_grid_truth(float(dur), float(sp), dt=dt, sigma=sigma)
            base = (ci * len(speeds) + cj) * replicates
            tasks += [(truth, mcfg.seed, base + rep, cfg, mcfg) for rep in range(replicates)]
    results = _pmap(_detection_task, tasks, workers)
    p_correct = np.empty((len(durations), len(speeds)))
    pos = 0
    for ci in range(len(durations)):
        for cj in range(len(speeds)):
            chunk = results[pos:pos + replicates]
            p_correct[ci, cj] = sum(1 for r in chunk if r[0] == 2) / replicates
            pos += replicates
    return PowerGridResult(
        durations=durations, speeds=speeds, p_correct=p_correct, replicates=replicates,
        config={"dt": dt, "sigma": sigma, "score": cfg.as_dict(), "mcmc": mcfg.as_dict(),
                "replicates": replicates},
    )


# ---------------------------------------------------------------------------
# Consistency trend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyResult:
    n_values: tuple
    k_correct_fraction: tuple
    median_location_error: tuple
    location_errors: tuple  # per n: tuple of max-errors over correct replicates
    config: dict


def consistency_trend(n_values, replicates: int, mcfg: McmcConfig,
                      *, total_time: float = 8.0, cp_fractions=(0.25, 0.75),
                      speeds=(0.0, 0.12, 0.0), sigma: float = 0.05,
                      cfg: ScoreConfig | None = None, iters_per_n=None,
                      workers: int | None = None) -> ConsistencyResult:
    """Detection and localization quality as the sampling rate grows.

    The truth is fixed in continuous time (changes at ``cp_fractions`` of
    ``total_time``); each ``n`` observes it at spacing ``total_time / n``.
    Reports the fraction of replicates detecting the true change count and
    the median (over those replicates) of the worst per-change location
    error.
    """
    if workers is None:
        workers = default_workers()
    if cfg is None:
        cfg = ScoreConfig()
    n_values = tuple(int(n) for n in n_values)
    cp_times = tuple(f * total_time for f in cp_fractions)
    fractions, medians, all_errors = [], [], []
    for block, n in enumerate(n_values):
        dt = total_time / n
        truth = truth_from_changepoints(n, dt, cp_times, speeds, sigma)
        t_max = iters_per_n(n) if iters_per_n is not None else max(20_000, 25 * n)
        mcfg_n = replace(mcfg, t_max=t_max)
        tasks = [(truth, mcfg.seed, block * replicates + rep, cfg, mcfg_n)
                 for rep in range(replicates)]
        results = _pmap(_detection_task, tasks, workers)
        errors = []
        correct = 0
        for count, tau_hat, _ in results:
            if count == len(cp_times):
                correct += 1
                errors.append(max(abs(th - tt) for th, tt in zip(sorted(tau_hat), cp_times)))
        fractions.append(correct / replicates)
        medians.append(float(np.median(errors)) if errors else float("nan"))
        all_errors.append(tuple(errors))
    return ConsistencyResult(
        n_values=n_values,
        k_correct_fraction=tuple(fractions),
        median_location_error=tuple(medians),
        location_errors=tuple(all_errors),
        config={"total_time": total_time, "cp_fractions": list(cp_fractions),
                "speeds": list(speeds), "sigma": sigma, "score": cfg.as_dict(),
                "mcmc": mcfg.as_dict(), "replicates": replicates},
    )


# ---------------------------------------------------------------------------
# Segment-pair-proposal necessity
# ---------------------------------------------------------------------------

def _first_hit_task(args) -> tuple[int, int]:
    """Iterations until the chain first holds a state matching the true pair,
    for the full mixture and for the mixture without segment-pair moves."""
    sigma, master_seed, task_index, cfg, mcfg, cap = args
    seq = child_sequence(master_seed, task_index)
    sim_ss, full_ss, restricted_ss = seq.spawn(3)
    truth = short_fast_pair_truth(sigma)
    traj, _ = simulate_piecewise(truth, sim_ss)
    true_idx = np.rint(np.asarray(truth.tau_true) / truth.dt).astype(int)

    def hit(r: ChangepointVector) -> bool:
        if r.count != 2:
            return False
        idx = r.indices
        return bool(np.all(np.abs(idx - true_idx) <= LOCATION_MATCH_STEPS))

    mcfg_cap = replace(mcfg, t_max=cap)
    full = run_chain(traj, cfg, mcfg_cap, rng=np.random.default_rng(full_ss),
                     hit_predicate=hit)
    restricted_cfg = replace(mcfg_cap, u3=mcfg_cap.u2)
    restricted = run_chain(traj, cfg, restricted_cfg,
                           rng=np.random.default_rng(restricted_ss), hit_predicate=hit)
    full_hit = full.first_hit if full.first_hit is not None else cap
    restricted_hit = restricted.first_hit if restricted.first_hit is not None else cap
    return full_hit, restricted_hit


@dataclass(frozen=True)
class Type3Result:
    score_empty: float
    score_left: float
    score_right: float
    score_pair: float
    full_first_hits: tuple
    restricted_first_hits: tuple
    iteration_cap: int
    config: dict

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.restricted_first_hits) / np.median(self.full_first_hits))

    @property
    def ordering_holds(self) -> bool:
        return (self.score_pair > self.score_empty > self.score_left
                and self.score_empty > self.score_right)


def type3_necessity(n_seeds: int, mcfg: McmcConfig, *, sigma: float = 0.05,
                    cfg: ScoreConfig | None = None, iteration_cap: int = 100_000,
                    workers: int | None = None) -> Type3Result:
    """Demonstrate why pair insertions are needed for short motile bursts.

    On a path with a short fast segment, evaluates the criterion for the
    no-change model, each single true endpoint, and the true pair; then
    measures how many iterations the sampler needs to first reach a
    two-change state matching the truth, with and without the segment-pair
    kernel (runs that never hit are censored at ``iteration_cap``).
    """
    if workers is None:
        workers = default_workers()
    if cfg is None:
        cfg = ScoreConfig()
    truth = short_fast_pair_truth(sigma)
    traj, _ = simulate_piecewise(truth, child_sequence(mcfg.seed, 10_000))
    m1, m2 = np.rint(np.asarray(truth.tau_true) / truth.dt).astype(int)
    empty = ChangepointVector.empty(traj.n)
    s_empty = score(traj, empty, cfg).total
    s_left = score(traj, empty.with_flipped(int(m1)), cfg).total
    s_right = score(traj, empty.with_flipped(int(m2)), cfg).total
    s_pair = score(traj, empty.with_flipped(int(m1), int(m2)), cfg).total

    tasks = [(sigma, mcfg.seed, i, cfg, mcfg, iteration_cap) for i in range(n_seeds)]
    results = _pmap(_first_hit_task, tasks, workers)
    return Type3Result(
        score_empty=s_empty, score_left=s_left, score_right=s_right, score_pair=s_pair,
        full_first_hits=tuple(r[0] for r in results),
        restricted_first_hits=tuple(r[1] for r in results),
        iteration_cap=iteration_cap,
        config={"sigma": sigma, "score": cfg.as_dict(), "mcmc": mcfg.as_dict(),
                "n_seeds": n_seeds, "iteration_cap": iteration_cap},
    )


# ---------------------------------------------------------------------------
# Two-state batch detection (speed-penalty and CSA studies)
# ---------------------------------------------------------------------------

def _two_state_detect_task(args) -> tuple[Segmentation, dict]:
    params, master_seed, index, configs, mcfg = args
    seq = child_sequence(master_seed, index)
    children = seq.spawn(1 + len(configs))
    traj, truth = simulate_two_state(params, children[0])
    fits = {}
    for pos, (name, cfg) in enumerate(sorted(configs.items())):
        seg, _ = cplass(traj, cfg, mcfg, rng=np.random.default_rng(children[1 + pos]))
        fits[name] = seg
    return truth, fits


@dataclass(frozen=True)
class TwoStateBatch:
    truths: tuple
    fits: dict  # name -> tuple[Segmentation]
    config: dict


def run_two_state_batch(n_paths: int, params: TwoStateParams, configs: dict,
                        mcfg: McmcConfig, *, workers: int | None = None) -> TwoStateBatch:
    """Simulate ``n_paths`` two-state paths and detect under each named
    score configuration; the same paths are shared across configurations."""
    if workers is None:
        workers = default_workers()
    tasks = [(params, mcfg.seed, i, configs, mcfg) for i in range(n_paths)]
    results = _pmap(_two_state_detect_task, tasks, workers)
    fits = {name: tuple(r[1][name] for r in results) for name in configs}
    return TwoStateBatch(
        truths=tuple(r[0] for r in results),
        fits=fits,
        config={"n_paths": n_paths, "params": params.as_dict(),
                "configs": {k: v.as_dict() for k, v in sorted(configs.items())},
                "mcmc": mcfg.as_dict()},
    )
