"""Joint-space PD torque law with actuator saturation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .plant import JointState


@dataclass(frozen=True)
class Gains:
    """Per-joint proportional (N.m/rad) and derivative (N.m.s/rad) gains.

    Tuned gains decoded from the search space are strictly positive; zero
    is accepted here so the unpowered arm stays expressible as a PD law.
    """

    kp: tuple[float, ...]
    kd: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "kp", tuple(float(v) for v in self.kp))
        object.__setattr__(self, "kd", tuple(float(v) for v in self.kd))
        if len(self.kp) != len(self.kd):
            raise ValueError("kp and kd must have the same length")
        if any(v < 0 for v in self.kp):
            raise ValueError("kp entries must be non-negative")
        if any(v < 0 for v in self.kd):
            raise ValueError("kd entries must be non-negative")

    @property
    def n_joints(self) -> int:
        return len(self.kp)


def pd_torque(gains: Gains, setpoint, state: JointState, limits) -> np.ndarray:
    """Saturated PD law: clamp(kp*(q_des - q) + kd*(qd_des - qd), +-limits).

    Saturation applies to the summed command, matching actuator-limit
    semantics. Position errors are taken on the unwrapped angles the
    trajectory module supplies.
    """
    q_des, qd_des = setpoint
    q_des = np.asarray(q_des, dtype=float)
    qd_des = np.asarray(qd_des, dtype=float)
    limits = np.asarray(limits, dtype=float)
    n = state.q.shape[0]
    for v in (q_des, qd_des, limits):
        if v.shape != (n,):
            raise ValueError(f"expected vectors of length {n}, got shape {v.shape}")
    if gains.n_joints != n:
        raise ValueError(f"gains cover {gains.n_joints} joints, state has {n}")
    return _kernels.pd_torque(np.array(gains.kp), np.array(gains.kd),
                              q_des, qd_des, state.q, state.qd, limits)
