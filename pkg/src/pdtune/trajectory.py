"""Cartesian trajectory generators and joint-setpoint conversion.

Three families: spirals (smooth curvature), pyramids (straight segments
with sharp turns) and splined random waypoints (irregular motion). All
generators are pure functions of their arguments; the random family is
driven by a seeded PCG64 generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .plant import ArmModel, CartesianPoint, UnreachableTargetError, inverse_kinematics


class TrajectoryGenerationError(ValueError):
    """Raised when a requested trajectory cannot be generated."""


@dataclass(frozen=True)
class Workspace:
    """Reachable annulus around the arm base, margins already applied."""

    center: tuple[float, float]
    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0.0 <= self.r_min < self.r_max:
            raise ValueError("workspace requires 0 <= r_min < r_max")

    @classmethod
    def from_model(cls, model: ArmModel, margin: float = 0.05) -> "Workspace":
        reach = sum(model.link_lengths)
        inner = max(0.0, 2.0 * max(model.link_lengths) - reach)
        return cls(center=model.base_position,
                   r_min=inner * (1.0 + margin),
                   r_max=reach * (1.0 - margin))

    def contains(self, xy: np.ndarray) -> np.ndarray:
        r = np.hypot(xy[..., 0] - self.center[0], xy[..., 1] - self.center[1])
        return (r >= self.r_min) & (r <= self.r_max)


@dataclass(frozen=True)
class CartesianTrajectory:
    """Time-stamped Cartesian path, one point per control tick."""

    dt: float
    points: np.ndarray  # (ticks, 2)
    kind: str
    duration: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be a (ticks, 2) array")
        if pts.shape[0] != round(self.duration / self.dt) + 1:
            raise ValueError("tick count must equal round(duration/dt) + 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def ticks(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class JointTrajectory:
    """Per-tick joint setpoints (unwrapped angles plus velocities)."""

    dt: float
    q_des: np.ndarray   # (ticks, n)
    qd_des: np.ndarray  # (ticks, n)
    source: CartesianTrajectory

    def __post_init__(self):
        for name in ("q_des", "qd_des"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.q_des.shape != self.qd_des.shape:
            raise ValueError("q_des and qd_des must have the same shape")
        if self.q_des.shape[0] != self.source.ticks:
            raise ValueError("setpoint tick count must match the source trajectory")

    @property
    def ticks(self) -> int:
        return self.q_des.shape[0]


def _tick_count(duration: float, dt: float) -> int:
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    n = round(duration / dt)
    if n < 1:
        raise ValueError(f"duration {duration} too short for dt {dt}")
    return n


def _check_workspace(xy: np.ndarray, workspace: Workspace, kind: str) -> None:
    ok = workspace.contains(xy)
    if not np.all(ok):
        first = int(np.argmin(ok))
        raise TrajectoryGenerationError(
            f"{kind} trajectory leaves the workspace annulus "
            f"[{workspace.r_min:.4g}, {workspace.r_max:.4g}] first at tick {first} "
            f"(point {xy[first].tolist()})")


def gen_spiral(center: CartesianPoint, r0: float, r1: float, turns: float,
               duration: float, dt: float, workspace: Workspace) -> CartesianTrajectory:
    """Archimedean spiral: radius r0 -> r1 linear in tick index while the
    angle sweeps 2*pi*turns, starting at angle 0 (first point = center + (r0, 0))."""
    if not 0.0 <= r0 < r1:
        raise ValueError("spiral requires 0 <= r0 < r1")
    n = _tick_count(duration, dt)
    s = np.arange(n + 1) / n
    radius = r0 + (r1 - r0) * s
    angle = 2.0 * np.pi * turns * s
    xy = np.column_stack((center.x + radius * np.cos(angle),
                          center.y + radius * np.sin(angle)))
    _check_workspace(xy, workspace, "spiral")
    return CartesianTrajectory(dt=dt, points=xy, kind="spiral", duration=duration,
                               params={"center": (center.x, center.y), "r0": r0,
                                       "r1": r1, "turns": turns})


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder apportionment of `total` ticks over segments."""
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    remainder = total - counts.sum()
    order = np.lexsort((np.arange(len(weights)), -(quotas - counts)))
    counts[order[:remainder]] += 1
    return counts


def gen_pyramid(center: CartesianPoint, half_width: float, height: float,
                n_teeth: int, duration: float, dt: float,
                workspace: Workspace) -> CartesianTrajectory:
    """Triangle-wave polyline of `n_teeth` teeth traversed at constant speed.

    The baseline runs horizontally through `center` from -half_width to
    +half_width; apexes sit `height` above it. Segment tick counts come from
    largest-remainder apportionment so every vertex lands exactly on a tick.
    """
    if n_teeth < 1:
        raise ValueError("n_teeth must be >= 1")
    if half_width <= 0 or height <= 0:
        raise ValueError("half_width and height must be positive")
    n_vertices = 2 * n_teeth + 1
    xs = center.x - half_width + (2.0 * half_width) * np.arange(n_vertices) / (n_vertices - 1)
    ys = np.where(np.arange(n_vertices) % 2 == 1, center.y + height, center.y)
    vertices = np.column_stack((xs, ys))

    seg_len = np.hypot(np.diff(xs), np.diff(ys))
    total_ticks = _tick_count(duration, dt)
    counts = _apportion(total_ticks, seg_len)
    if np.any(counts == 0):
        raise TrajectoryGenerationError(
            f"duration/dt gives {total_ticks} ticks, too few for {len(seg_len)} segments")

    rows = [vertices[0][None, :]]
    for s, c in enumerate(counts):
        alpha = (np.arange(1, c + 1) / c)[:, None]
        rows.append((1.0 - alpha) * vertices[s] + alpha * vertices[s + 1])
    xy = np.vstack(rows)
    _check_workspace(xy, workspace, "pyramid")
    return CartesianTrajectory(dt=dt, points=xy, kind="pyramid", duration=duration,
                               params={"center": (center.x, center.y),
                                       "half_width": half_width, "height": height,
                                       "n_teeth": n_teeth})


def gen_random(seed: int, workspace: Workspace, n_waypoints: int,
               duration: float, dt: float, max_retries: int = 10) -> CartesianTrajectory:
    """Natural cubic spline through waypoints sampled uniformly (by area)
    from the workspace annulus. Re-draws the waypoints when the spline
    overshoots the annulus, up to `max_retries` attempts."""
    if n_waypoints < 2:
        raise ValueError("n_waypoints must be >= 2")
    n = _tick_count(duration, dt)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        r = np.sqrt(rng.uniform(workspace.r_min**2, workspace.r_max**2, size=n_waypoints))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n_waypoints)
        waypoints = np.column_stack((workspace.center[0] + r * np.cos(phi),
                                     workspace.center[1] + r * np.sin(phi)))
        spline = CubicSpline(np.linspace(0.0, 1.0, n_waypoints), waypoints,
                             axis=0, bc_type="natural")
        xy = spline(np.arange(n + 1) / n)
        if np.all(workspace.contains(xy)):
            return CartesianTrajectory(dt=dt, points=xy, kind="random", duration=duration,
                                       params={"seed": seed, "n_waypoints": n_waypoints})
    raise TrajectoryGenerationError(
        f"no in-workspace random trajectory found in {max_retries} attempts (seed {seed})")


def to_joint_setpoints(model: ArmModel, traj: CartesianTrajectory,
                       branch: str = "down") -> JointTrajectory:
    """Convert a Cartesian path to joint setpoints.

    Positions come from the analytic inverse kinematics with a fixed elbow
    branch, unwrapped so consecutive angles differ by less than pi per
    joint; velocities are central differences (one-sided at the ends).
    """
    pts = traj.points
    q = np.empty((traj.ticks, model.n_links))
    for i in range(traj.ticks):
        try:
            q[i] = inverse_kinematics(model, CartesianPoint(pts[i, 0], pts[i, 1]), branch)
        except UnreachableTargetError as err:
            raise UnreachableTargetError(f"tick {i}: {err}") from err
    q = np.unwrap(q, axis=0)

    qd = np.empty_like(q)
    qd[1:-1] = (q[2:] - q[:-2]) / (2.0 * traj.dt)
    qd[0] = (q[1] - q[0]) / traj.dt
    qd[-1] = (q[-1] - q[-2]) / traj.dt
    return JointTrajectory(dt=traj.dt, q_des=q, qd_des=qd, source=traj)
