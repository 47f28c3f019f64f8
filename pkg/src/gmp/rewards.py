"""Reward system for reference-guided velocity-tracking locomotion.

Three groups: motion guidance (joint + keypoint tracking against a generated
reference frame), task (commanded velocity tracking), and regularization
(smoothness, effort, contact shaping).  All pure functions over explicit
state samples; SI units throughout (rad, m, N*m, s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .command import VelocityCommand
from .model import DOF_COUNT, RobotModel, default_model, keypoints_local
from .rollout import ReferenceFrame

TASK_WEIGHTS = {"lin_velocity": 3.0, "ang_velocity": 2.5}

REG_WEIGHTS = {
    "z_lin_velocity": -0.8,
    "xy_ang_velocity": -0.05,
    "projected_gravity": -6.0,
    "torque": -5e-6,
    "dof_velocity": -5e-4,
    "dof_acceleration": -2e-8,
    "action_rate": -0.01,
    "smoothness": -5e-3,
    "joint_regularization": -0.1,
    "feet_air_time": 20.0,
    "no_fly": 0.8,
    "collision": -1.0,
    "termination": -200.0,
}


class RewardError(ValueError):
    """Malformed reward input."""


def _vec(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise RewardError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RewardError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class ControlStateSample:
    """One control-step snapshot of everything the reward terms read."""

    v_xy: np.ndarray  # base linear velocity, m/s
    v_z: float
    w: np.ndarray  # base angular velocity, rad/s
    g_xy: np.ndarray  # gravity direction projected on the base plane
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    a_dot: np.ndarray  # action first difference
    a_ddot: np.ndarray  # action second difference
    q_default: np.ndarray
    T_air: np.ndarray  # per-foot air time; at touchdown holds the completed flight time
    foot_contact: np.ndarray  # per-foot bool
    collision: bool = False
    termination: bool = False

    def __post_init__(self):
        object.__setattr__(self, "v_xy", _vec(self.v_xy, 2, "v_xy"))
        object.__setattr__(self, "w", _vec(self.w, 3, "w"))
        object.__setattr__(self, "g_xy", _vec(self.g_xy, 2, "g_xy"))
        for name in ("q", "qd", "qdd", "tau", "a_dot", "a_ddot", "q_default"):
            object.__setattr__(self, name, _vec(getattr(self, name), DOF_COUNT, name))
        object.__setattr__(self, "T_air", _vec(self.T_air, 2, "T_air"))
        fc = np.asarray(self.foot_contact, dtype=bool)
        if fc.shape != (2,):
            raise RewardError(f"foot_contact must have shape (2,), got {fc.shape}")
        object.__setattr__(self, "foot_contact", fc)
        vz = float(self.v_z)
        if not np.isfinite(vz):
            raise RewardError("v_z must be finite")
        object.__setattr__(self, "v_z", vz)
        object.__setattr__(self, "collision", bool(self.collision))
        object.__setattr__(self, "termination", bool(self.termination))


def standing_state(model: RobotModel | None = None, q_default: np.ndarray | None = None) -> ControlStateSample:
    """Ideal zero-motion standing sample: both feet planted, no effort."""
    z21 = np.zeros(DOF_COUNT)
    q0 = z21 if q_default is None else np.asarray(q_default, dtype=float)
    return ControlStateSample(
        v_xy=np.zeros(2), v_z=0.0, w=np.zeros(3), g_xy=np.zeros(2),
        q=q0.copy(), qd=z21, qdd=z21, tau=z21, a_dot=z21, a_ddot=z21,
        q_default=q0.copy(), T_air=np.zeros(2),
        foot_contact=np.array([True, True]),
    )


@dataclass(frozen=True)
class RewardConfig:
    """Exposed knobs: guidance term weights and the exponent variant."""

    dof_weight: float = 1.0
    keypos_weight: float = 1.0
    squared_exponent: bool = False  # exp(-0.7*||e||^2) ablation instead of exp(-0.7*||e||)


def _guidance_kernel(err_norm: float, squared: bool) -> float:
    return float(np.exp(-0.7 * (err_norm**2 if squared else err_norm)))


def r_dof(q: np.ndarray, q_ref: np.ndarray, config: RewardConfig = RewardConfig()) -> float:
    q = _vec(q, DOF_COUNT, "q")
    q_ref = _vec(q_ref, DOF_COUNT, "q_ref")
    return _guidance_kernel(float(np.linalg.norm(q - q_ref)), config.squared_exponent)


def r_keypos(p: np.ndarray, p_ref: np.ndarray, config: RewardConfig = RewardConfig()) -> float:
    p = np.asarray(p, dtype=float)
    p_ref = np.asarray(p_ref, dtype=float)
    if p.shape != (8, 3) or p_ref.shape != (8, 3):
        raise RewardError(f"keypoints must have shape (8, 3), got {p.shape} and {p_ref.shape}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(p_ref))):
        raise RewardError("keypoints must be finite")
    return _guidance_kernel(float(np.linalg.norm((p - p_ref).ravel())), config.squared_exponent)


def r_guidance(
    state: ControlStateSample,
    reference: ReferenceFrame,
    config: RewardConfig = RewardConfig(),
    model: RobotModel | None = None,
) -> float:
    """Sum of joint and keypoint guidance; robot keypoints come from FK of q."""
    model = model or default_model()
    p = keypoints_local(model, state.q)
    return config.dof_weight * r_dof(state.q, reference.q_ref, config) + \
        config.keypos_weight * r_keypos(p, reference.p_ref, config)


def task_rewards(state: ControlStateSample, c: VelocityCommand) -> dict[str, float]:
    lin = float(np.exp(-4.0 * float(np.sum((state.v_xy - np.array([c.vx, c.vy])) ** 2))))
    ang = float(np.exp(-4.0 * (state.w[2] - c.yaw_rate) ** 2))
    return {"lin_velocity": lin, "ang_velocity": ang}


def regularization_rewards(state: ControlStateSample) -> dict[str, float]:
    """Raw (unweighted) values of every regularization term."""
    touchdown = state.foot_contact & (state.T_air > 0.0)
    return {
        "z_lin_velocity": state.v_z**2,
        "xy_ang_velocity": float(np.sum(state.w[:2] ** 2)),
        "projected_gravity": float(np.sum(state.g_xy**2)),
        "torque": float(np.sum(state.tau**2)),
        "dof_velocity": float(np.sum(state.qd**2)),
        "dof_acceleration": float(np.sum(state.qdd**2)),
        "action_rate": float(np.sum(state.a_dot**2)),
        "smoothness": float(np.sum(state.a_ddot**2)),
        "joint_regularization": float(np.sum((state.q - state.q_default) ** 2)),
        "feet_air_time": float(np.sum(state.T_air[touchdown] - 0.5)),
        "no_fly": float(np.any(state.foot_contact)),
        "collision": float(state.collision),
        "termination": float(state.termination),
    }


@dataclass(frozen=True)
class RewardBreakdown:
    """Named term map {term: (raw, weight, weighted)} plus the total."""

    terms: dict[str, dict[str, float]]
    total: float

    def as_table(self) -> str:
        width = max(len(k) for k in self.terms)
        lines = [f"{'term':<{width}}  {'raw':>14}  {'weight':>10}  {'weighted':>14}"]
        for name, t in self.terms.items():
            lines.append(
                f"{name:<{width}}  {t['raw']:>14.6g}  {t['weight']:>10.6g}  {t['weighted']:>14.6g}"
            )
        lines.append(f"{'total':<{width}}  {'':>14}  {'':>10}  {self.total:>14.6g}")
        return "\n".join(lines)


def total_reward(
    state: ControlStateSample,
    reference: ReferenceFrame,
    command: VelocityCommand,
    config: RewardConfig = RewardConfig(),
    model: RobotModel | None = None,
) -> RewardBreakdown:
    model = model or default_model()
    p = keypoints_local(model, state.q)
    terms: dict[str, dict[str, float]] = {}

    terms["dof_guidance"] = {"raw": r_dof(state.q, reference.q_ref, config), "weight": config.dof_weight}
    terms["keypos_guidance"] = {"raw": r_keypos(p, reference.p_ref, config), "weight": config.keypos_weight}
    for name, raw in task_rewards(state, command).items():
        terms[name] = {"raw": raw, "weight": TASK_WEIGHTS[name]}
    for name, raw in regularization_rewards(state).items():
        terms[name] = {"raw": raw, "weight": REG_WEIGHTS[name]}

    total = 0.0
    for t in terms.values():
        t["weighted"] = t["raw"] * t["weight"]
        total += t["weighted"]
    return RewardBreakdown(terms=terms, total=total)


__all__ = [
    "REG_WEIGHTS",
    "TASK_WEIGHTS",
    "ControlStateSample",
    "RewardBreakdown",
    "RewardConfig",
    "RewardError",
    "r_dof",
    "r_guidance",
    "r_keypos",
    "regularization_rewards",
    "standing_state",
    "task_rewards",
    "total_reward",
]
