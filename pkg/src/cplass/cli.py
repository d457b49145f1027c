"""Command-line interface.

Subcommands: ``simulate`` (piecewise or two-state paths), ``detect`` (single
file or batch directory), ``score-profile``, ``score-surface``, ``csa``,
``ecdf``, ``wkde`` and ``experiment {gamma-sweep,power-grid,consistency,
type3-demo}``.  Exit codes: 0 success, 1 usage error, 2 data error.

Every output file embeds the deterministic run manifest; a sidecar
``<out>.manifest.json`` additionally records wall-clock time.  The
``CPLASS_THREADS`` environment variable bounds the worker pool for batch
detection and experiments; results never depend on the pool size.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .criterion import score
from .errors import CplassError
from .experiments import (
    DetectionStudySetup,
    consistency_trend,
    default_workers,
    gamma_sweep,
    power_grid,
    score_profile,
    score_surface_2cp,
    short_segment_study_a,
    short_segment_study_b,
    type3_necessity,
)
from .io import (
    RunManifest,
    ingest_trajectory,
    read_segmentation_json,
    sha256_of_file,
    write_segmentation_json,
    write_table_csv,
    write_trace_csv,
    write_trajectory_csv,
)
from .model import ChangepointVector, McmcConfig, ScoreConfig
from .sampler import cplass
from .seeds import child_rng, child_sequence
from .simulate import (
    BASE_TWO_STATE,
    PiecewiseTruth,
    TwoStateParams,
    simulate_piecewise,
    simulate_two_state,
)
from .stats import SegmentPool, bootstrap_ensemble, csa as csa_stat, max_speed_ecdf, path_max_speeds, weighted_kde

__all__ = ["cli_dispatch", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _score_config(args) -> ScoreConfig:
    return ScoreConfig(
        gamma=args.gamma,
        s_cap=args.s_cap,
        speed_penalty_enabled=not args.no_speed_penalty,
        k_max=args.k_max,
    )


def _mcmc_config(args) -> McmcConfig:
    return McmcConfig(lam=args.lam, t_max=args.iters, seed=args.seed)


def _add_score_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.01)
    p.add_argument("--s-cap", type=float, default=5.0)
    p.add_argument("--no-speed-penalty", action="store_true")
    p.add_argument("--k-max", type=int, default=None)


def _add_mcmc_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="changepoint rate of the independent-redraw proposal (1/s)")
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> _Parser:
    parser = _Parser(prog="cplass", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic trajectories")
    sim_sub = sim.add_subparsers(dest="generator", required=True)

    pw = sim_sub.add_parser("piecewise", help="explicit piecewise-linear truth")
    pw.add_argument("--n", type=int, required=True)
    pw.add_argument("--dt", type=float, required=True)
    pw.add_argument("--sigma", type=float, required=True)
    pw.add_argument("--cp-times", type=_float_list, default=[])
    pw.add_argument("--speeds", type=_float_list, required=True,
                    help="one speed per segment; motion along the diagonal")
    pw.add_argument("--d", type=int, default=2)
    pw.add_argument("--seed", type=int, default=0)
    pw.add_argument("--out", required=True)
    pw.add_argument("--truth", default=None)
    pw.set_defaults(func=_cmd_simulate_piecewise)

    ts = sim_sub.add_parser("two-state", help="stationary/motile cargo model")
    ts.add_argument("--preset", choices=["base"], default=None)
    ts.add_argument("--n", type=int, default=None)
    ts.add_argument("--p", type=float, default=None)
    ts.add_argument("--q", type=float, default=None)
    ts.add_argument("--alpha", type=float, default=None)
    ts.add_argument("--beta", type=float, default=None)
    ts.add_argument("--p-reverse", type=float, default=None)
    ts.add_argument("--p-continue", type=float, default=None)
    ts.add_argument("--sigma-cargo", type=float, default=None)
    ts.add_argument("--dt", type=float, default=None)
    ts.add_argument("--d", type=int, default=None)
    ts.add_argument("--seed", type=int, default=0)
    ts.add_argument("--out", required=True)
    ts.add_argument("--truth", default=None)
    ts.set_defaults(func=_cmd_simulate_two_state)

    det = sub.add_parser("detect", help="changepoint detection on trajectory CSVs")
    det.add_argument("--input", required=True, help="trajectory CSV or a directory of them")
    _add_score_options(det)
    _add_mcmc_options(det)
    det.add_argument("--out", required=True, help="segmentation JSON (or directory in batch mode)")
    det.add_argument("--trace", default=None, help="optional trace CSV (or directory in batch mode)")
    det.add_argument("--workers", type=int, default=None)
    det.set_defaults(func=_cmd_detect)

    prof = sub.add_parser("score-profile", help="one-extra-changepoint score profile")
    prof.add_argument("--input", required=True)
    _add_score_options(prof)
    prof.add_argument("--base-indices", type=_int_list, default=[])
    prof.add_argument("--stride", type=int, default=1)
    prof.add_argument("--out", required=True)
    prof.set_defaults(func=_cmd_score_profile)

    surf = sub.add_parser("score-surface", help="two-changepoint score surface")
    surf.add_argument("--input", required=True)
    _add_score_options(surf)
    surf.add_argument("--stride", type=int, default=1)
    surf.add_argument("--out", required=True)
    surf.set_defaults(func=_cmd_score_surface)

    csa_p = sub.add_parser("csa", help="cumulative speed allocation over segmentations")
    csa_p.add_argument("--inputs", nargs="+", required=True)
    csa_p.add_argument("--boot", type=int, default=0)
    csa_p.add_argument("--seed", type=int, default=0)
    csa_p.add_argument("--grid-points", type=int, default=512)
    csa_p.add_argument("--out", required=True)
    csa_p.set_defaults(func=_cmd_csa)

    ecdf_p = sub.add_parser("ecdf", help="max sustained-speed ECDF over segmentations")
    ecdf_p.add_argument("--inputs", nargs="+", required=True)
    ecdf_p.add_argument("--min-duration", type=float, default=0.6)
    ecdf_p.add_argument("--boot", type=int, default=0)
    ecdf_p.add_argument("--seed", type=int, default=0)
    ecdf_p.add_argument("--grid-points", type=int, default=512)
    ecdf_p.add_argument("--out", required=True)
    ecdf_p.set_defaults(func=_cmd_ecdf)

    wkde_p = sub.add_parser("wkde", help="duration-weighted kernel density of speeds")
    wkde_p.add_argument("--inputs", nargs="+", required=True)
    wkde_p.add_argument("--bandwidth", type=float, default=None)
    wkde_p.add_argument("--out", required=True)
    wkde_p.set_defaults(func=_cmd_wkde)

    exp = sub.add_parser("experiment", help="scripted numerical studies")
    exp_sub = exp.add_subparsers(dest="study", required=True)

    gs = exp_sub.add_parser("gamma-sweep")
    gs.add_argument("--panel", choices=["a", "b"], default="a")
    gs.add_argument("--gammas", type=_float_list, default=[1.01])
    gs.add_argument("--replicates", type=int, default=50)
    _add_mcmc_options(gs)
    gs.add_argument("--s-cap", type=float, default=5.0)
    gs.add_argument("--workers", type=int, default=None)
    gs.add_argument("--out", required=True)
    gs.set_defaults(func=_cmd_gamma_sweep)

    pg = exp_sub.add_parser("power-grid")
    pg.add_argument("--durations", type=_float_list,
                    default=[round(0.05 * i, 2) for i in range(1, 21)])
    pg.add_argument("--speeds", type=_float_list,
                    default=[round(0.01 * i, 2) for i in range(1, 21)])
    pg.add_argument("--replicates", type=int, default=10)
    _add_mcmc_options(pg)
    pg.add_argument("--workers", type=int, default=None)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=_cmd_power_grid)

    ct = exp_sub.add_parser("consistency")
    ct.add_argument("--n-values", type=_int_list, default=[100, 400, 1600])
    ct.add_argument("--replicates", type=int, default=15)
    _add_mcmc_options(ct)
    ct.add_argument("--workers", type=int, default=None)
    ct.add_argument("--out", required=True)
    ct.set_defaults(func=_cmd_consistency)

    t3 = exp_sub.add_parser("type3-demo")
    t3.add_argument("--n-seeds", type=int, default=20)
    t3.add_argument("--sigma", type=float, default=0.05)
    t3.add_argument("--cap", type=int, default=100_000)
    _add_mcmc_options(t3)
    t3.add_argument("--workers", type=int, default=None)
    t3.add_argument("--out", required=True)
    t3.set_defaults(func=_cmd_type3)

    return parser


def _manifest(args, command: str, config: dict, input_digest: str = "",
              seed: int | None = None, wall_clock_s: float | None = None) -> RunManifest:
    return RunManifest(command=command, config=config, input_digest=input_digest,
                       seed=seed, wall_clock_s=wall_clock_s)


def _cmd_simulate_piecewise(args) -> int:
    from .simulate import truth_from_changepoints

    truth = truth_from_changepoints(args.n, args.dt, args.cp_times, args.speeds,
                                    args.sigma, d=args.d)
    config = {"generator": "piecewise", "n": args.n, "dt": args.dt, "sigma": args.sigma,
              "cp_times": args.cp_times, "speeds": args.speeds, "d": args.d}
    started = time.monotonic()
    traj, truth_seg = simulate_piecewise(truth, args.seed)
    manifest = _manifest(args, "simulate piecewise", config, seed=args.seed,
                         wall_clock_s=time.monotonic() - started)
    write_trajectory_csv(args.out, traj, manifest)
    manifest.write_sidecar(args.out)
    if args.truth:
        write_segmentation_json(args.truth, truth_seg, config=config, seed=args.seed,
                                manifest=manifest, extra={"truth": True})
    return 0


def _cmd_simulate_two_state(args) -> int:
    if args.preset == "base":
        params = BASE_TWO_STATE
    else:
        required = ["n", "p", "q", "alpha", "beta", "p_reverse", "p_continue",
                    "sigma_cargo", "dt"]
        missing = [k for k in required if getattr(args, k) is None]
        if missing:
            raise _UsageError("two-state simulation needs --preset base or all of: "
                              + ", ".join("--" + k.replace("_", "-") for k in missing))
        params = TwoStateParams(
            n=args.n, p=args.p, q=args.q, alpha=args.alpha, beta=args.beta,
            p_reverse=args.p_reverse, p_continue=args.p_continue,
            sigma_cargo=args.sigma_cargo, dt=args.dt, d=args.d or 2)
    overrides = {k: getattr(args, k) for k in ("n", "dt", "d") if getattr(args, k) is not None}
    if args.preset == "base" and overrides:
        params = replace(params, **overrides)
    config = {"generator": "two-state", "params": params.as_dict()}
    started = time.monotonic()
    traj, truth_seg = simulate_two_state(params, args.seed)
    manifest = _manifest(args, "simulate two-state", config, seed=args.seed,
                         wall_clock_s=time.monotonic() - started)
    write_trajectory_csv(args.out, traj, manifest)
    manifest.write_sidecar(args.out)
    if args.truth:
        write_segmentation_json(args.truth, truth_seg, config=config, seed=args.seed,
                                manifest=manifest, extra={"truth": True})
    return 0


def _detect_one(in_path: Path, out_path: Path, trace_path: Path | None,
                cfg: ScoreConfig, mcfg: McmcConfig, command: str) -> None:
    started = time.monotonic()
    traj = ingest_trajectory(in_path)
    seg, trace = cplass(traj, cfg, mcfg)
    breakdown = score(traj, trace.best_r, cfg)
    config = {"score": cfg.as_dict(), "mcmc": mcfg.as_dict()}
    manifest = RunManifest(command=command, config=config,
                           input_digest=sha256_of_file(in_path), seed=mcfg.seed,
                           wall_clock_s=time.monotonic() - started)
    write_segmentation_json(
        out_path, seg,
        score={
            "total": breakdown.total,
            "log_rss_term": breakdown.log_rss_term,
            "ssic_term": breakdown.ssic_term,
            "speed_term": breakdown.speed_term,
        },
        config=config, seed=mcfg.seed, manifest=manifest)
    manifest.write_sidecar(out_path)
    if trace_path is not None:
        write_trace_csv(trace_path, trace, manifest)


def _detect_batch_task(task) -> None:
    in_path, out_path, trace_path, cfg, mcfg, command = task
    _detect_one(Path(in_path), Path(out_path), Path(trace_path) if trace_path else None,
                cfg, mcfg, command)


def _cmd_detect(args) -> int:
    cfg = _score_config(args)
    mcfg = _mcmc_config(args)
    in_path = Path(args.input)
    command = "detect"
    if in_path.is_dir():
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        trace_dir = Path(args.trace) if args.trace else None
        if trace_dir is not None:
            trace_dir.mkdir(parents=True, exist_ok=True)
        files = sorted(p for p in in_path.iterdir() if p.suffix == ".csv")
        if not files:
            raise CplassError(f"no .csv trajectories in {in_path}")
        tasks = []
        for index, f in enumerate(files):
            # Per-file seeds split from the master by name-sorted index, so
            # results do not depend on scheduling.
            file_seed = int(child_sequence(mcfg.seed, index).generate_state(1)[0])
            task_mcfg = replace(mcfg, seed=file_seed)
            trace_path = (trace_dir / (f.stem + ".trace.csv")) if trace_dir else None
            tasks.append((str(f), str(out_dir / (f.stem + ".json")),
                          str(trace_path) if trace_path else None, cfg, task_mcfg, command))
        workers = args.workers if args.workers is not None else default_workers()
        if workers <= 1 or len(tasks) == 1:
            for t in tasks:
                _detect_batch_task(t)
        else:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=workers) as pool:
                list(pool.map(_detect_batch_task, tasks, chunksize=1))
        return 0
    _detect_one(in_path, Path(args.out), Path(args.trace) if args.trace else None,
                cfg, mcfg, command)
    return 0


def _cmd_score_profile(args) -> int:
    traj = ingest_trajectory(args.input)
    cfg = _score_config(args)
    base = ChangepointVector.from_indices(args.base_indices, traj.n)
    sweep = range(1, traj.n, args.stride)
    profile = score_profile(traj, base, sweep, cfg)
    config = {"score": cfg.as_dict(), "base_indices": args.base_indices,
              "stride": args.stride}
    manifest = RunManifest(command="score-profile", config=config,
                           input_digest=sha256_of_file(args.input), seed=None)
    rows = [(int(m), float(s), float(profile.base_score))
            for m, s in zip(profile.indices, profile.scores)]
    write_table_csv(args.out, ["index", "score", "base_score"], rows,
                    config=config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_score_surface(args) -> int:
    traj = ingest_trajectory(args.input)
    cfg = _score_config(args)
    surface = score_surface_2cp(traj, args.stride, cfg)
    config = {"score": cfg.as_dict(), "stride": args.stride}
    manifest = RunManifest(command="score-surface", config=config,
                           input_digest=sha256_of_file(args.input), seed=None)
    rows = []
    for a_pos, a in enumerate(surface.indices):
        for b_pos, b in enumerate(surface.indices):
            v = surface.values[a_pos, b_pos]
            if not np.isnan(v):
                rows.append((int(a), int(b), float(v)))
    write_table_csv(args.out, ["index_1", "index_2", "score_minus_base"], rows,
                    config=config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _load_segmentations(paths) -> list:
    return [read_segmentation_json(p)[0] for p in paths]


def _curve_rows(grid, point, ensemble) -> tuple[list[str], list[tuple]]:
    if ensemble is None:
        return ["speed", "value"], [(float(g), float(v)) for g, v in zip(grid, point)]
    lo, hi = ensemble.band()
    q25 = np.quantile(ensemble.curves, 0.25, axis=0)
    q75 = np.quantile(ensemble.curves, 0.75, axis=0)
    columns = ["speed", "value", "band_lo", "q25", "q75", "band_hi"]
    rows = [(float(g), float(v), float(a), float(b), float(c), float(d))
            for g, v, a, b, c, d in zip(grid, point, lo, q25, q75, hi)]
    return columns, rows


def _cmd_csa(args) -> int:
    segs = _load_segmentations(args.inputs)
    pool = SegmentPool.from_segmentations(segs)
    from .stats import default_speed_grid

    grid = default_speed_grid(float(pool.speeds.max()), args.grid_points)
    curve = csa_stat(pool, grid)
    ensemble = None
    if args.boot:
        ensemble = bootstrap_ensemble(segs, "csa", args.boot, args.seed, grid=grid)
    config = {"inputs": [str(p) for p in args.inputs], "boot": args.boot,
              "grid_points": args.grid_points}
    manifest = RunManifest(command="csa", config=config, input_digest="", seed=args.seed)
    columns, rows = _curve_rows(grid, curve.values, ensemble)
    write_table_csv(args.out, columns, rows, config=config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_ecdf(args) -> int:
    segs = _load_segmentations(args.inputs)
    maxima = path_max_speeds(segs, args.min_duration)
    ecdf = max_speed_ecdf(segs, args.min_duration)
    from .stats import default_speed_grid

    grid = default_speed_grid(float(maxima.max()), args.grid_points)
    point = ecdf(grid)
    ensemble = None
    if args.boot:
        ensemble = bootstrap_ensemble(segs, "ecdf", args.boot, args.seed, grid=grid,
                                      min_duration=args.min_duration)
    config = {"inputs": [str(p) for p in args.inputs], "min_duration": args.min_duration,
              "boot": args.boot}
    manifest = RunManifest(command="ecdf", config=config, input_digest="", seed=args.seed)
    columns, rows = _curve_rows(grid, point, ensemble)
    write_table_csv(args.out, columns, rows, config=config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_wkde(args) -> int:
    segs = _load_segmentations(args.inputs)
    pool = SegmentPool.from_segmentations(segs)
    grid, density = weighted_kde(pool, bandwidth=args.bandwidth)
    config = {"inputs": [str(p) for p in args.inputs], "bandwidth": args.bandwidth}
    manifest = RunManifest(command="wkde", config=config, input_digest="", seed=None)
    rows = [(float(g), float(v)) for g, v in zip(grid, density)]
    write_table_csv(args.out, ["speed", "density"], rows, config=config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_gamma_sweep(args) -> int:
    setup = short_segment_study_a() if args.panel == "a" else short_segment_study_b()
    mcfg = _mcmc_config(args)
    started = time.monotonic()
    result = gamma_sweep(setup, args.gammas, args.replicates, mcfg,
                         s_cap=args.s_cap, workers=args.workers)
    manifest = RunManifest(command="experiment gamma-sweep", config=result.config,
                           input_digest="", seed=args.seed,
                           wall_clock_s=time.monotonic() - started)
    rows = [(g, int(mode), alt, null) for g, mode, alt, null in result.rows]
    write_table_csv(args.out, ["gamma", "speed_penalty", "alt_detection_rate",
                               "null_false_positive_rate"], rows,
                    config=result.config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_power_grid(args) -> int:
    mcfg = _mcmc_config(args)
    started = time.monotonic()
    result = power_grid(args.durations, args.speeds, args.replicates, mcfg,
                        workers=args.workers)
    manifest = RunManifest(command="experiment power-grid", config=result.config,
                           input_digest="", seed=args.seed,
                           wall_clock_s=time.monotonic() - started)
    rows = []
    for i, dur in enumerate(result.durations):
        for j, sp in enumerate(result.speeds):
            rows.append((float(dur), float(sp), float(result.p_correct[i, j])))
    write_table_csv(args.out, ["duration", "speed", "p_correct"], rows,
                    config=result.config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_consistency(args) -> int:
    mcfg = _mcmc_config(args)
    started = time.monotonic()
    result = consistency_trend(args.n_values, args.replicates, mcfg, workers=args.workers)
    manifest = RunManifest(command="experiment consistency", config=result.config,
                           input_digest="", seed=args.seed,
                           wall_clock_s=time.monotonic() - started)
    rows = [(n, f, m) for n, f, m in zip(result.n_values, result.k_correct_fraction,
                                         result.median_location_error)]
    write_table_csv(args.out, ["n", "k_correct_fraction", "median_location_error"],
                    rows, config=result.config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def _cmd_type3(args) -> int:
    mcfg = _mcmc_config(args)
    started = time.monotonic()
    result = type3_necessity(args.n_seeds, mcfg, sigma=args.sigma,
                             iteration_cap=args.cap, workers=args.workers)
    manifest = RunManifest(command="experiment type3-demo", config=result.config,
                           input_digest="", seed=args.seed,
                           wall_clock_s=time.monotonic() - started)
    rows = [("score_empty", result.score_empty),
            ("score_left_endpoint", result.score_left),
            ("score_right_endpoint", result.score_right),
            ("score_true_pair", result.score_pair),
            ("median_full_first_hit", float(np.median(result.full_first_hits))),
            ("median_restricted_first_hit", float(np.median(result.restricted_first_hits))),
            ("median_ratio", result.median_ratio)]
    write_table_csv(args.out, ["quantity", "value"], rows,
                    config=result.config, manifest=manifest)
    manifest.write_sidecar(args.out)
    return 0


def cli_dispatch(argv) -> int:
    """Parse and run; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CplassError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
