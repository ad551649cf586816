"""Planar n-link rigid-body arm: kinematics, dynamics and time stepping.

The arm is a chain of uniform rods in a vertical plane. All operations are
pure functions of their arguments; `ArmModel` is immutable so derived
dynamics coefficients can be cached per model.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels


class UnreachableTargetError(ValueError):
    """Raised when a Cartesian target lies outside the arm workspace."""


class NumericalBlowupError(RuntimeError):
    """Raised when integration produces non-finite or absurd joint values."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class ArmModel:
    """Geometric/inertial/actuation description of the planar chain.

    Per-link and per-joint fields must all have length ``n_links``. Gravity
    acts along -y; ``torque_limits`` are symmetric bounds in N.m.
    """

    n_links: int
    link_lengths: tuple[float, ...]
    link_masses: tuple[float, ...]
    viscous_damping: tuple[float, ...]
    torque_limits: tuple[float, ...]
    gravity: float = 9.81
    base_position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "link_lengths", tuple(float(v) for v in self.link_lengths))
        object.__setattr__(self, "link_masses", tuple(float(v) for v in self.link_masses))
        object.__setattr__(self, "viscous_damping", tuple(float(v) for v in self.viscous_damping))
        object.__setattr__(self, "torque_limits", tuple(float(v) for v in self.torque_limits))
        object.__setattr__(self, "base_position", (float(self.base_position[0]), float(self.base_position[1])))
        if self.n_links < 1:
            raise ValueError("n_links must be a positive integer")
        for name in ("link_lengths", "link_masses", "viscous_damping", "torque_limits"):
            if len(getattr(self, name)) != self.n_links:
                raise ValueError(f"{name} must have exactly n_links={self.n_links} entries")
        if any(v <= 0 for v in self.link_lengths):
            raise ValueError("link lengths must be strictly positive")
        if any(v <= 0 for v in self.link_masses):
            raise ValueError("link masses must be strictly positive")
        if any(v < 0 for v in self.viscous_damping):
            raise ValueError("viscous damping must be non-negative")
        if any(v <= 0 for v in self.torque_limits):
            raise ValueError("torque limits must be strictly positive")

    def content_hash(self) -> str:
        """Stable short hash of the model parameters, for run manifests."""
        text = repr((self.n_links, self.link_lengths, self.link_masses,
                     self.viscous_damping, self.torque_limits,
                     self.gravity, self.base_position))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class JointState:
    """Joint positions (rad) and velocities (rad/s)."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qd = np.asarray(self.qd, dtype=float)
        if q.shape != qd.shape or q.ndim != 1:
            raise ValueError("q and qd must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("joint state entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@lru_cache(maxsize=None)
def _chain_params(model: ArmModel):
    """Constant dynamics coefficients of the uniform-rod chain.

    Returns (b, inertia, gamma, damping, lengths) arrays consumed by the
    kernels: COM coupling coefficients b[j,k], rod inertias about the COM,
    gravity moment coefficients gamma[j], and the per-joint damping.
    """
    n = model.n_links
    lengths = np.array(model.link_lengths)
    masses = np.array(model.link_masses)
    # r[i, j]: coefficient of link-direction j in the COM position of link i
    r = np.zeros((n, n))
    for i in range(n):
        for j in range(i):
            r[i, j] = lengths[j]
        r[i, i] = lengths[i] / 2.0
    b = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            b[j, k] = sum(masses[i] * r[i, j] * r[i, k] for i in range(max(j, k), n))
    inertia = masses * lengths**2 / 12.0
    gamma = np.array([sum(masses[i] * r[i, j] for i in range(j, n)) for j in range(n)])
    damping = np.array(model.viscous_damping)
    for arr in (b, inertia, gamma, damping, lengths):
        arr.setflags(write=False)
    return b, inertia, gamma, damping, lengths


def _check_dim(model: ArmModel, *vectors):
    for v in vectors:
        if v.shape != (model.n_links,):
            raise ValueError(f"expected vector of length {model.n_links}, got shape {v.shape}")


def forward_kinematics(model: ArmModel, q) -> CartesianPoint:
    """End-effector position: cumulative-angle chain sum from the base."""
    q = np.asarray(q, dtype=float)
    _check_dim(model, q)
    _, _, _, _, lengths = _chain_params(model)
    x, y = _kernels.end_effector(lengths, model.base_position[0], model.base_position[1], q)
    return CartesianPoint(x, y)


def _wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def inverse_kinematics(model: ArmModel, p: CartesianPoint, branch: str = "down") -> np.ndarray:
    """Analytic 2R inverse kinematics.

    ``branch`` selects the elbow sign ("down" gives a non-negative elbow
    angle, "up" the mirrored solution). Angles are wrapped to (-pi, pi].
    Raises UnreachableTargetError when the target lies outside the annulus
    [|l1-l2|, l1+l2] around the base.
    """
    if model.n_links != 2:
        raise ValueError("analytic inverse kinematics requires a 2-link arm")
    if branch not in ("down", "up"):
        raise ValueError(f"unknown elbow branch {branch!r}")
    l1, l2 = model.link_lengths
    dx = p.x - model.base_position[0]
    dy = p.y - model.base_position[1]
    d2 = dx * dx + dy * dy
    d = math.sqrt(d2)
    r_min, r_max = abs(l1 - l2), l1 + l2
    # tolerate float fuzz right at the workspace boundary
    tol = 1e-9 * max(1.0, r_max)
    if d > r_max + tol or d < r_min - tol:
        raise UnreachableTargetError(
            f"point ({p.x}, {p.y}) at distance {d:.6g} from base is outside "
            f"the reachable annulus [{r_min:.6g}, {r_max:.6g}]")
    cos_q2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    cos_q2 = min(1.0, max(-1.0, cos_q2))
    q2 = math.acos(cos_q2)
    if branch == "up":
        q2 = -q2
    q1 = math.atan2(dy, dx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    return np.array([_wrap_angle(q1), _wrap_angle(q2)])


def mass_matrix(model: ArmModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    _check_dim(model, q)
    b, inertia, _, _, _ = _chain_params(model)
    return _kernels.mass_matrix(b, inertia, q)


def coriolis_matrix(model: ArmModel, q, qd) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    _check_dim(model, q, qd)
    b, _, _, _, _ = _chain_params(model)
    return _kernels.coriolis_matrix(b, q, qd)


def gravity_vector(model: ArmModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    _check_dim(model, q)
    _, _, gamma, _, _ = _chain_params(model)
    return _kernels.gravity_vector(gamma, model.gravity, q)


def inverse_dynamics(model: ArmModel, q, qd, qdd) -> np.ndarray:
    """Torque u = M(q) qdd + C(q, qd) qd + g(q) + D qd."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    qdd = np.asarray(qdd, dtype=float)
    _check_dim(model, q, qd, qdd)
    b, inertia, gamma, damping, _ = _chain_params(model)
    return _kernels.inverse_dynamics(b, inertia, gamma, damping, model.gravity, q, qd, qdd)


def forward_dynamics(model: ArmModel, state: JointState, u) -> np.ndarray:
    """Joint accelerations solving M(q) qdd = u - C qd - g - D qd."""
    u = np.asarray(u, dtype=float)
    _check_dim(model, state.q, state.qd, u)
    b, inertia, gamma, damping, _ = _chain_params(model)
    return _kernels.forward_dynamics(b, inertia, gamma, damping, model.gravity,
                                     state.q, state.qd, u)


def step(model: ArmModel, state: JointState, u, dt: float, tick: int | None = None) -> JointState:
    """Advance one RK4 step with zero-order-hold torque."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    _check_dim(model, state.q, state.qd, u)
    b, inertia, gamma, damping, _ = _chain_params(model)
    q, qd = _kernels.rk4_step(b, inertia, gamma, damping, model.gravity,
                              state.q, state.qd, u, dt)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise NumericalBlowupError(
            f"non-finite joint state after integration step (tick {tick})",
            step_index=tick)
    return JointState(q=q, qd=qd)


def mechanical_energy(model: ArmModel, state: JointState) -> float:
    """Total kinetic plus gravitational potential energy of the chain."""
    m = mass_matrix(model, state.q)
    kinetic = 0.5 * float(state.qd @ m @ state.qd)
    _, _, gamma, _, _ = _chain_params(model)
    theta = np.cumsum(state.q)
    total_mass = sum(model.link_masses)
    potential = model.gravity * (total_mass * model.base_position[1]
                                 + float(gamma @ np.sin(theta)))
    return kinetic + potential
