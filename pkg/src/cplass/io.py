"""File formats: trajectory CSV, segmentation JSON, trace CSV, result tables.

Formats
-------
Trajectory CSV
    UTF-8, LF line endings, ``.`` decimal point.  Comment lines start with
    ``#`` (a ``# units: s, um`` line is always written).  Header is
    ``t,x1,...,xd`` (``t,x,y`` accepted as an alias for two dimensions).
Segmentation JSON
    Carries the fitted parameters, the score breakdown, the configuration
    and the run manifest; ``schema_version`` is checked on load (unknown
    major versions are rejected).
Trace CSV
    ``iter,score,accepted,proposal_type,num_changepoints``.

Outputs embed only deterministic manifest fields so that repeated runs are
byte-identical; wall-clock timing goes to the optional ``.manifest.json``
sidecar instead.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridError, SchemaVersionError, TrajectoryParseError
from .model import ChainTrace, ChangepointVector, Segmentation, Trajectory

__all__ = [
    "SCHEMA_VERSION",
    "RunManifest",
    "ingest_trajectory",
    "write_trajectory_csv",
    "write_segmentation_json",
    "read_segmentation_json",
    "write_trace_csv",
    "write_table_csv",
    "sha256_of_file",
]

SCHEMA_VERSION = "1.0"
GRID_RELATIVE_JITTER = 1e-6
UNITS_HEADER = "# units: s, um"


def package_version() -> str:
    from . import __version__
    return __version__


def sha256_of_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record of one run.

    ``command``, ``config``, ``input_digest``, ``seed`` and ``version``
    suffice to reproduce the outputs bit-identically; ``wall_clock_s`` is
    informational and kept out of data files.
    """

    command: str
    config: dict
    input_digest: str
    seed: int | None
    version: str = field(default_factory=package_version)
    wall_clock_s: float | None = None

    def core_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "version": self.version,
        }

    def comment_line(self) -> str:
        return "# manifest: " + json.dumps(self.core_dict(), sort_keys=True)

    def write_sidecar(self, out_path) -> None:
        data = self.core_dict()
        if self.wall_clock_s is not None:
            data["wall_clock_s"] = self.wall_clock_s
        sidecar = Path(str(out_path) + ".manifest.json")
        sidecar.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n",
                           encoding="utf-8")


def _format_float(x) -> str:
    return repr(float(x))


def write_trajectory_csv(path, traj: Trajectory, manifest: RunManifest | None = None) -> None:
    lines = [UNITS_HEADER]
    if manifest is not None:
        lines.append(manifest.comment_line())
    header = "t," + ",".join(f"x{i + 1}" for i in range(traj.d))
    lines.append(header)
    times = traj.times
    for i in range(traj.n):
        row = [_format_float(times[i])] + [_format_float(v) for v in traj.positions[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def ingest_trajectory(path) -> Trajectory:
    """Parse a trajectory CSV, validating the uniform time grid.

    Raises :class:`TrajectoryParseError` for malformed headers, missing
    fields or non-finite values (naming the file line), and
    :class:`GridError` when successive time steps deviate from the mean
    spacing by more than one part in a million.
    """
    path = Path(path)
    times, rows = [], []
    expected_fields = None
    with open(path, "r", encoding="utf-8") as fh:
        lineno = 0
        header = None
        for raw in fh:
            lineno += 1
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                if header[0] != "t" or len(header) < 2:
                    raise TrajectoryParseError(
                        f"{path}:{lineno}: header must be 't,x1,...,xd', got {line!r}")
                d = len(header) - 1
                if header[1:] != [f"x{i + 1}" for i in range(d)] and header[1:] != ["x", "y"]:
                    raise TrajectoryParseError(
                        f"{path}:{lineno}: unrecognized coordinate columns {header[1:]!r}")
                expected_fields = len(header)
                continue
            fields = line.split(",")
            if len(fields) != expected_fields:
                raise TrajectoryParseError(
                    f"{path}:{lineno}: expected {expected_fields} fields, got {len(fields)}")
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise TrajectoryParseError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(values)):
                raise TrajectoryParseError(f"{path}:{lineno}: non-finite value")
            times.append(values[0])
            rows.append(values[1:])
    if header is None or len(rows) < 2:
        raise TrajectoryParseError(f"{path}: need a header and at least 2 data rows")

    t = np.asarray(times)
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if dt <= 0:
        raise GridError(f"{path}: times are not increasing")
    diffs = np.diff(t)
    bad = np.flatnonzero(np.abs(diffs - dt) > GRID_RELATIVE_JITTER * dt)
    if bad.size:
        # Line number of the first row whose step from its predecessor is off.
        raise GridError(
            f"{path}: non-uniform time grid at data row {bad[0] + 2} "
            f"(step {diffs[bad[0]]!r} vs mean {dt!r})")
    return Trajectory(dt=float(dt), positions=np.asarray(rows), t0=float(t[0] - dt))


def write_segmentation_json(path, seg: Segmentation, *, score: dict | None = None,
                            config: dict | None = None, seed: int | None = None,
                            manifest: RunManifest | None = None,
                            extra: dict | None = None) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": seg.n,
        "d": seg.d,
        "dt": seg.dt,
        "t0": seg.t0,
        "k": seg.k,
        "tau": seg.tau.tolist(),
        "intercept": seg.intercept.tolist(),
        "V": seg.V.tolist(),
        "speeds": seg.speeds.tolist(),
        "durations": seg.durations.tolist(),
        "rss": seg.rss,
        "sigma2": seg.sigma2_hat,
        "score": score,
        "config": config,
        "seed": seed,
    }
    if manifest is not None:
        doc["manifest"] = manifest.core_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8", newline="\n")


def read_segmentation_json(path) -> tuple[Segmentation, dict]:
    """Load a segmentation document; returns (segmentation, full document)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = str(doc.get("schema_version", ""))
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise SchemaVersionError(
            f"{path}: unsupported schema version {version!r} (supported major: "
            f"{SCHEMA_VERSION.split('.', 1)[0]})")
    V = np.asarray(doc["V"], dtype=float)
    W = np.vstack([V[:1], np.diff(V, axis=0)]) if V.shape[0] > 1 else V.copy()
    seg = Segmentation(
        n=int(doc["n"]),
        d=int(doc["d"]),
        dt=float(doc["dt"]),
        t0=float(doc.get("t0", 0.0)),
        tau=np.asarray(doc["tau"], dtype=float),
        intercept=np.asarray(doc["intercept"], dtype=float),
        W=W,
        V=V,
        speeds=np.asarray(doc["speeds"], dtype=float),
        durations=np.asarray(doc["durations"], dtype=float),
        rss=float(doc["rss"]),
        sigma2_hat=float(doc["sigma2"]),
    )
    return seg, doc


def write_trace_csv(path, trace: ChainTrace, manifest: RunManifest | None = None) -> None:
    lines = [UNITS_HEADER]
    if manifest is not None:
        lines.append(manifest.comment_line())
    lines.append("iter,score,accepted,proposal_type,num_changepoints")
    for t in range(len(trace.scores)):
        lines.append(",".join([
            str(t),
            _format_float(trace.scores[t]),
            str(int(trace.accepted[t])),
            str(int(trace.proposal_types[t])),
            str(int(trace.num_changepoints[t])),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_table_csv(path, columns, rows, *, config: dict | None = None,
                    manifest: RunManifest | None = None) -> None:
    """Plot-ready CSV with provenance comment lines."""
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    if manifest is not None:
        lines.append(manifest.comment_line())
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, (float, np.floating)):
                cells.append(_format_float(value))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
