"""Closed-loop trajectory execution and the two tuning objectives.

A rollout runs the PD controller against the plant at the control rate,
logging time, joint state, applied torque and end-effector position per
tick. The objectives scored from a log are the mean Cartesian tracking
error and the mean squared torque difference between consecutive ticks
(the torque before the first tick is zero: the arm starts unpowered).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .control import Gains
from .plant import ArmModel, _chain_params
from .trajectory import JointTrajectory

# Objective vector assigned to diverged rollouts; dominated by every
# feasible point so the GA treats blowups as totally ordered failures.
PENALTY = 1.0e6


class ObjectiveVector(NamedTuple):
    f_acc: float  # mean end-effector distance to the desired path, m
    f_t: float    # mean squared torque difference per tick, (N.m)^2


class DivergedRolloutError(RuntimeError):
    """Raised when the closed loop blows up; carries the partial log."""

    def __init__(self, message, partial_log, tick):
        super().__init__(message)
        self.partial_log = partial_log
        self.tick = tick


@dataclass(frozen=True)
class RolloutMeta:
    gains: Gains
    trajectory_kind: str
    duration: float
    model_hash: str
    seed: int | None = None


@dataclass(frozen=True)
class RolloutLog:
    """Per-tick record of one closed-loop execution.

    Arrays all have `ticks` rows: tick 0 is the rest state on the first
    setpoint with zero torque, later rows hold the post-step state and the
    torque applied during that step.
    """

    dt: float
    t: np.ndarray    # (ticks,)
    q: np.ndarray    # (ticks, n)
    qd: np.ndarray   # (ticks, n)
    u: np.ndarray    # (ticks, n)
    ee: np.ndarray   # (ticks, 2)
    des: np.ndarray  # (ticks, 2)
    meta: RolloutMeta

    def __post_init__(self):
        rows = self.t.shape[0]
        for name in ("t", "q", "qd", "u", "ee", "des"):
            arr = getattr(self, name)
            if arr.shape[0] != rows:
                raise ValueError("all log arrays must have the same tick count")
            arr.setflags(write=False)

    @property
    def ticks(self) -> int:
        return self.t.shape[0]

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]


def simulate(model: ArmModel, jtraj: JointTrajectory, gains: Gains) -> RolloutLog:
    """Run the 500 Hz-style loop: one PD command and one RK4 step per tick.

    The arm starts at rest on the first setpoint. Raises
    DivergedRolloutError (with the partial log) if any joint angle exceeds
    1e3 rad or goes non-finite.
    """
    if gains.n_joints != model.n_links:
        raise ValueError("gains/model joint count mismatch")
    b, inertia, gamma, damping, lengths = _chain_params(model)
    q_log, qd_log, u_log, ee_log, status = _kernels.rollout(
        b, inertia, gamma, damping, model.gravity, lengths,
        model.base_position[0], model.base_position[1],
        jtraj.q_des, jtraj.qd_des,
        np.array(gains.kp), np.array(gains.kd), np.array(model.torque_limits),
        jtraj.dt)
    ticks = jtraj.ticks if status < 0 else status
    seed = jtraj.source.params.get("seed")
    meta = RolloutMeta(gains=gains, trajectory_kind=jtraj.source.kind,
                       duration=jtraj.source.duration, model_hash=model.content_hash(),
                       seed=seed)
    log = RolloutLog(dt=jtraj.dt, t=np.arange(ticks) * jtraj.dt,
                     q=q_log[:ticks].copy(), qd=qd_log[:ticks].copy(),
                     u=u_log[:ticks].copy(), ee=ee_log[:ticks].copy(),
                     des=jtraj.source.points[:ticks].copy(), meta=meta)
    if status >= 0:
        raise DivergedRolloutError(f"rollout diverged at tick {status}", log, status)
    return log


def _require_steps(log: RolloutLog) -> int:
    steps = log.ticks - 1
    if steps < 1:
        raise ValueError("log holds no controlled ticks")
    return steps


def accuracy_objective(log: RolloutLog) -> float:
    """Mean Euclidean end-effector error over the controlled ticks.

    Tick 0 is excluded: no control decision has been made at t=0.
    """
    steps = _require_steps(log)
    err = np.hypot(log.ee[1:, 0] - log.des[1:, 0], log.ee[1:, 1] - log.des[1:, 1])
    return float(np.sum(err) / steps)


def torque_objective(log: RolloutLog) -> float:
    """Mean squared torque step between consecutive ticks.

    Per-joint differences aggregate by squared Euclidean norm; the torque
    preceding the first controlled tick is the zero vector (row 0 of the
    log), so a large opening command is penalized like any other jump.
    """
    steps = _require_steps(log)
    du = np.diff(log.u, axis=0)
    return float(np.sum(du * du) / steps)


def evaluate(model: ArmModel, jtraj: JointTrajectory, gains: Gains) -> ObjectiveVector:
    """Score one gain vector; diverged rollouts map to the penalty vector."""
    try:
        log = simulate(model, jtraj, gains)
    except DivergedRolloutError:
        return ObjectiveVector(PENALTY, PENALTY)
    return ObjectiveVector(accuracy_objective(log), torque_objective(log))
