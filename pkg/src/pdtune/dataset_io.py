"""File formats: rollout CSVs with sidecar manifests, and front CSVs.

Rollout files are the deliverable dataset (per-tick torque, position,
velocity, end-effector and desired coordinates), written as plain CSV so
downstream training pipelines can consume them without this package.
Every rollout CSV gets exactly one JSON manifest carrying the trajectory,
gains, model parameters, seed, objectives and a content checksum of the
CSV. Writes are atomic (temp file + rename) and numbers are rendered with
shortest round-trip precision, so identical inputs give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .control import Gains
from .pareto import ParetoFront
from .plant import ArmModel
from .rollout import ObjectiveVector, RolloutLog, RolloutMeta

SCHEMA_VERSION = 1


class IntegrityError(RuntimeError):
    """Checksum or bookkeeping mismatch between a CSV and its manifest."""


class MalformedDatasetError(ValueError):
    """Structurally invalid CSV content; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


@dataclass
class RunManifest:
    """Sidecar metadata making one rollout file self-describing."""

    trajectory_kind: str
    trajectory_params: dict
    duration: float
    dt: float
    kp: tuple[float, ...]
    kd: tuple[float, ...]
    model: dict
    seed: int | None = None
    f_acc: float | None = None
    f_t: float | None = None
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    ticks: int | None = None
    csv_file: str | None = None
    sha256: str | None = None


def manifest_for(model: ArmModel, log: RolloutLog,
                 objectives: ObjectiveVector | None = None,
                 trajectory_params: dict | None = None) -> RunManifest:
    meta = log.meta
    return RunManifest(
        trajectory_kind=meta.trajectory_kind,
        trajectory_params=dict(trajectory_params or {}),
        duration=meta.duration,
        dt=log.dt,
        kp=meta.gains.kp,
        kd=meta.gains.kd,
        model={"n_links": model.n_links,
               "link_lengths": list(model.link_lengths),
               "link_masses": list(model.link_masses),
               "viscous_damping": list(model.viscous_damping),
               "torque_limits": list(model.torque_limits),
               "gravity": model.gravity,
               "base_position": list(model.base_position),
               "hash": model.content_hash()},
        seed=meta.seed,
        f_acc=None if objectives is None else float(objectives.f_acc),
        f_t=None if objectives is None else float(objectives.f_t),
    )


def _fmt(x: float) -> str:
    """Shortest decimal that parses back to the same float64."""
    return repr(float(x))


def atomic_write_text(path: Path, text: str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rollout_header(n_joints: int) -> list[str]:
    cols = ["t"]
    cols += [f"q_{j + 1}" for j in range(n_joints)]
    cols += [f"qd_{j + 1}" for j in range(n_joints)]
    cols += [f"u_{j + 1}" for j in range(n_joints)]
    cols += ["ee_x", "ee_y", "des_x", "des_y"]
    return cols


def _rollout_csv_text(log: RolloutLog) -> str:
    lines = [",".join(rollout_header(log.n_joints))]
    for i in range(log.ticks):
        row = [_fmt(log.t[i])]
        row += [_fmt(v) for v in log.q[i]]
        row += [_fmt(v) for v in log.qd[i]]
        row += [_fmt(v) for v in log.u[i]]
        row += [_fmt(log.ee[i, 0]), _fmt(log.ee[i, 1]), _fmt(log.des[i, 0]), _fmt(log.des[i, 1])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def manifest_path(csv_path) -> Path:
    return Path(str(csv_path) + ".json")


def write_rollout(log: RolloutLog, manifest: RunManifest, path,
                  overwrite: bool = False) -> None:
    """Emit the CSV plus its manifest atomically; records the checksum."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists (pass overwrite=True to replace)")
    text = _rollout_csv_text(log)
    manifest.ticks = log.ticks
    manifest.csv_file = path.name
    manifest.sha256 = hashlib.sha256(text.encode()).hexdigest()
    atomic_write_text(path, text)
    atomic_write_text(manifest_path(path),
                      json.dumps(asdict(manifest), sort_keys=True, indent=2) + "\n")


def _parse_float(cell: str, line_no: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise MalformedDatasetError(f"non-numeric cell {cell!r} on line {line_no}",
                                    line=line_no) from None


def read_rollout(path) -> tuple[RolloutLog, RunManifest]:
    """Exact inverse of write_rollout; checksum gate first, then structure."""
    path = Path(path)
    with open(manifest_path(path)) as fh:
        data = json.load(fh)
    manifest = RunManifest(**data)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != manifest.sha256:
        raise IntegrityError(f"checksum mismatch for {path.name}: "
                             f"manifest {manifest.sha256}, file {digest}")

    lines = raw.decode().splitlines()
    n = int(manifest.model["n_links"])
    expected_cols = 1 + 3 * n + 4
    if not lines or lines[0].split(",") != rollout_header(n):
        raise MalformedDatasetError("bad or missing header row", line=1)
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != expected_cols:
            raise MalformedDatasetError(
                f"line {line_no} has {len(cells)} columns, expected {expected_cols} "
                f"(last good line {line_no - 1})", line=line_no)
        rows.append([_parse_float(c, line_no) for c in cells])
    if manifest.ticks is not None and len(rows) != manifest.ticks:
        raise MalformedDatasetError(
            f"row count {len(rows)} does not match manifest ticks {manifest.ticks}",
            line=len(lines))

    table = np.array(rows, dtype=float).reshape(len(rows), expected_cols)
    meta = RolloutMeta(gains=Gains(kp=tuple(manifest.kp), kd=tuple(manifest.kd)),
                       trajectory_kind=manifest.trajectory_kind,
                       duration=manifest.duration,
                       model_hash=manifest.model.get("hash", ""),
                       seed=manifest.seed)
    log = RolloutLog(dt=manifest.dt, t=table[:, 0],
                     q=table[:, 1:1 + n], qd=table[:, 1 + n:1 + 2 * n],
                     u=table[:, 1 + 2 * n:1 + 3 * n],
                     ee=table[:, 1 + 3 * n:3 + 3 * n],
                     des=table[:, 3 + 3 * n:5 + 3 * n], meta=meta)
    return log, manifest


def front_header(n_joints: int) -> list[str]:
    return (["f_acc", "f_t"]
            + [f"kp_{j + 1}" for j in range(n_joints)]
            + [f"kd_{j + 1}" for j in range(n_joints)])


def write_front(front: ParetoFront, gains: list[Gains], path,
                n_joints: int | None = None, overwrite: bool = False) -> None:
    """CSV of objective points with decoded gains, sorted by f_acc."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists (pass overwrite=True to replace)")
    if len(gains) != len(front.points):
        raise ValueError("need one Gains per front point")
    if n_joints is None:
        if not gains:
            raise ValueError("n_joints required to write an empty front")
        n_joints = gains[0].n_joints
    order = sorted(range(len(front.points)), key=lambda i: front.points[i])
    lines = [",".join(front_header(n_joints))]
    for i in order:
        p, g = front.points[i], gains[i]
        lines.append(",".join([_fmt(p.f_acc), _fmt(p.f_t)]
                              + [_fmt(v) for v in g.kp] + [_fmt(v) for v in g.kd]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_front(path) -> tuple[list[ObjectiveVector], list[Gains]]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise MalformedDatasetError("empty front file", line=1)
    header = lines[0].split(",")
    if len(header) < 4 or (len(header) - 2) % 2:
        raise MalformedDatasetError("unrecognized front header", line=1)
    n = (len(header) - 2) // 2
    if header != front_header(n):
        raise MalformedDatasetError("unrecognized front header", line=1)
    points, gains = [], []
    for line_no, line in enumerate(lines[1:], start=2):
        cells = [_parse_float(c, line_no) for c in line.split(",")]
        if len(cells) != len(header):
            raise MalformedDatasetError(f"line {line_no} has {len(cells)} columns",
                                        line=line_no)
        points.append(ObjectiveVector(cells[0], cells[1]))
        gains.append(Gains(kp=tuple(cells[2:2 + n]), kd=tuple(cells[2 + n:])))
    return points, gains


def write_trajectory_csv(traj, path, overwrite: bool = False) -> None:
    """Inspection export of a Cartesian trajectory (t, x, y per tick)."""
    path = Path(path)
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists (pass overwrite=True to replace)")
    lines = ["t,x,y"]
    for i in range(traj.ticks):
        lines.append(",".join([_fmt(i * traj.dt), _fmt(traj.points[i, 0]),
                               _fmt(traj.points[i, 1])]))
    atomic_write_text(path, "\n".join(lines) + "\n")
