"""Whole-body motion retargeting by sequence-level first-order optimization.

Matches robot limb directions to a source skeleton, pins source-labeled
contact feet to the ground, and smooths joint accelerations.  Gradients are
analytic: geometric Jacobians through FK plus an exponential-map chain rule
for base orientation increments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import MotionClip, _central_diff
from .model import DOF_COUNT, LIMB_SITE_NAMES, RobotModel, fk_sites
from .nn import Adam
from .rotations import matrix_to_quat, quat_to_matrix, so3_exp_batch, so3_left_jacobian_batch

LIMB_VECTOR_PAIRS = (
    ("l_shoulder", "l_elbow"),
    ("r_shoulder", "r_elbow"),
    ("l_elbow", "l_wrist"),
    ("r_elbow", "r_wrist"),
    ("l_hip", "l_knee"),
    ("r_hip", "r_knee"),
    ("l_knee", "l_ankle"),
    ("r_knee", "r_ankle"),
)

_SITE_INDEX = {name: i for i, name in enumerate(LIMB_SITE_NAMES)}
_PAIR_IDX = np.array([( _SITE_INDEX[a], _SITE_INDEX[b]) for a, b in LIMB_VECTOR_PAIRS])
_ANKLE_IDX = np.array([_SITE_INDEX["l_ankle"], _SITE_INDEX["r_ankle"]])


class RetargetError(ValueError):
    """Degenerate source data or ill-posed retargeting setup."""


@dataclass(frozen=True)
class RetargetWeights:
    alpha: float = 1.0
    beta: float = 1000.0
    gamma: float = 100.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise RetargetError("retargeting weights must be non-negative")


@dataclass
class HumanMotion:
    """Source skeleton trajectory: limb site positions plus base and contacts."""

    fps: float
    sites: dict[str, np.ndarray]  # name -> (T,3), all 12 limb sites
    base_pos: np.ndarray  # (T,3)
    base_quat: np.ndarray  # (T,4)
    contacts: np.ndarray  # (T,2) bool
    standing_height: float = 1.65

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.base_quat = np.asarray(self.base_quat, dtype=float)
        self.contacts = np.asarray(self.contacts, dtype=bool)
        T = len(self.base_pos)
        missing = [n for n in LIMB_SITE_NAMES if n not in self.sites]
        if missing:
            raise RetargetError(f"source motion is missing limb sites: {missing}")
        for n in LIMB_SITE_NAMES:
            arr = np.asarray(self.sites[n], dtype=float)
            if arr.shape != (T, 3):
                raise RetargetError(f"site {n} must be (T,3) matching the base trajectory")
            self.sites[n] = arr
        if self.contacts.shape != (T, 2):
            raise RetargetError("contacts must be (T,2)")

    def __len__(self) -> int:
        return len(self.base_pos)

    def site_array(self) -> np.ndarray:
        return np.stack([self.sites[n] for n in LIMB_SITE_NAMES], axis=1)  # (T,12,3)


def human_from_clip(clip: MotionClip, model: RobotModel, scale: float = 1.0) -> HumanMotion:
    """Treat a robot clip as a source skeleton (optionally height-scaled)."""
    if clip.contacts is None:
        raise RetargetError("source clip needs contact labels")
    R = clip.rotations()
    pos = fk_sites(model, clip.q, clip.base_pos, R, model.limb_sites) * scale
    sites = {n: pos[:, i].copy() for i, n in enumerate(LIMB_SITE_NAMES)}
    return HumanMotion(
        fps=clip.fps,
        sites=sites,
        base_pos=clip.base_pos * scale,
        base_quat=clip.base_quat.copy(),
        contacts=clip.contacts.copy(),
        standing_height=model.standing_height * scale,
    )


@dataclass
class RetargetProblem:
    source: HumanMotion
    model: RobotModel
    weights: RetargetWeights = field(default_factory=RetargetWeights)

    def __post_init__(self):
        self.human_dirs = _unit_limb_vectors(self.source.site_array(), "source")
        self.init_rotations = np.stack([quat_to_matrix(qt) for qt in self.source.base_quat])

    def init_variables(self) -> dict[str, np.ndarray]:
        """Standing q, source base path scaled to the robot's stature."""
        T = len(self.source)
        scale = self.model.standing_height / self.source.standing_height
        return {
            "q": np.zeros((T, DOF_COUNT)),
            "base_pos": self.source.base_pos * scale,
            "delta": np.zeros((T, 3)),
        }


def _unit_limb_vectors(site_pos: np.ndarray, who: str) -> np.ndarray:
    """(T,8,3) unit directions for LIMB_VECTOR_PAIRS; errors name the limb."""
    vec = site_pos[:, _PAIR_IDX[:, 1]] - site_pos[:, _PAIR_IDX[:, 0]]
    norms = np.linalg.norm(vec, axis=2)
    if (norms < 1e-8).any():
        t, j = np.argwhere(norms < 1e-8)[0]
        a, b = LIMB_VECTOR_PAIRS[j]
        raise RetargetError(f"zero-length {who} limb vector {a}->{b} at frame {t}")
    return vec / norms[:, :, None]


def vec_loss(human_vectors: np.ndarray, robot_vectors: np.ndarray) -> float:
    """Sum of squared differences between unit limb directions."""
    hv = np.asarray(human_vectors, dtype=float)
    rv = np.asarray(robot_vectors, dtype=float)
    if hv.shape != rv.shape or hv.shape[-2:] != (8, 3):
        raise RetargetError("limb vector sets must both be (...,8,3)")
    hu = hv / np.linalg.norm(hv, axis=-1, keepdims=True)
    ru = rv / np.linalg.norm(rv, axis=-1, keepdims=True)
    return float(np.sum((hu - ru) ** 2))


def foot_loss(contacts, foot_states) -> float:
    """Σ over in-contact feet of squared height plus squared velocity."""
    total = 0.0
    for flags, states in zip(contacts, foot_states):
        for in_contact, st in zip(flags, states):
            if in_contact:
                total += st.height**2 + float(np.dot(st.velocity, st.velocity))
    return total


def smooth_loss(q_dot_t: np.ndarray, q_dot_t1: np.ndarray) -> float:
    """Squared change in joint velocity between consecutive steps."""
    a = np.asarray(q_dot_t, dtype=float)
    b = np.asarray(q_dot_t1, dtype=float)
    if a.shape != b.shape:
        raise RetargetError("velocity vectors must have matching dimensions")
    d = b - a
    return float(np.dot(d.ravel(), d.ravel()))


def _central_diff_adjoint(dv: np.ndarray, dt: float) -> np.ndarray:
    """Transpose of _central_diff: scatter velocity gradients back to positions."""
    dp = np.zeros_like(dv)
    dp[2:] += dv[1:-1] / (2.0 * dt)
    dp[:-2] -= dv[1:-1] / (2.0 * dt)
    dp[1] += dv[0] / dt
    dp[0] -= dv[0] / dt
    dp[-1] += dv[-1] / dt
    dp[-2] -= dv[-1] / dt
    return dp


def total_loss(problem: RetargetProblem, variables: dict[str, np.ndarray], want_grad: bool = True):
    """Weighted Eq.-style objective over the whole sequence.

    Returns (total, parts, grads) with parts = {vec, foot, smo} and grads
    keyed like variables; grads is None when want_grad is False.
    """
    model, w = problem.model, problem.weights
    src = problem.source
    Q = variables["q"]
    base_pos = variables["base_pos"]
    delta = variables["delta"]
    T = len(src)
    dt = 1.0 / src.fps

    R = so3_exp_batch(delta) @ problem.init_rotations
    if want_grad:
        pos, Jq, Jw = fk_sites(model, Q, base_pos, R, model.limb_sites, want_jacobian=True)
    else:
        pos = fk_sites(model, Q, base_pos, R, model.limb_sites)

    # limb direction term
    vec = pos[:, _PAIR_IDX[:, 1]] - pos[:, _PAIR_IDX[:, 0]]
    norms = np.linalg.norm(vec, axis=2)
    if (norms < 1e-8).any():
        t, j = np.argwhere(norms < 1e-8)[0]
        a, b = LIMB_VECTOR_PAIRS[j]
        raise RetargetError(f"zero-length robot limb vector {a}->{b} at frame {t}")
    unit = vec / norms[:, :, None]
    diff = unit - problem.human_dirs
    l_vec = float(np.sum(diff**2))

    # foot contact term: ankle clearance and world velocity at source contacts
    ankles = pos[:, _ANKLE_IDX]  # (T,2,3)
    heights = ankles[:, :, 2] - model.ankle_rest_height
    vel = _central_diff(ankles, dt)
    mask = src.contacts.astype(float)
    l_foot = float(np.sum(mask * heights**2) + np.sum(mask[:, :, None] * vel**2))

    # joint acceleration term
    qdot = (Q[1:] - Q[:-1]) / dt
    qacc = qdot[1:] - qdot[:-1]
    l_smo = float(np.sum(qacc**2))

    total = w.alpha * l_vec + w.beta * l_foot + w.gamma * l_smo
    parts = {"vec": l_vec, "foot": l_foot, "smo": l_smo}
    if not np.isfinite(total):
        bad = max(parts, key=lambda k: abs(parts[k]))
        raise RetargetError(f"non-finite retargeting loss (term {bad})")
    if not want_grad:
        return total, parts, None

    # d(total)/d(site positions)
    dpos = np.zeros_like(pos)
    dunit = 2.0 * w.alpha * diff
    dvec = (dunit - unit * np.sum(dunit * unit, axis=2, keepdims=True)) / norms[:, :, None]
    np.add.at(dpos, (slice(None), _PAIR_IDX[:, 1]), dvec)
    np.subtract.at(dpos, (slice(None), _PAIR_IDX[:, 0]), dvec)
    dank = np.zeros_like(ankles)
    dank[:, :, 2] += 2.0 * w.beta * mask * heights
    dank += _central_diff_adjoint(2.0 * w.beta * mask[:, :, None] * vel, dt)
    dpos[:, _ANKLE_IDX] += dank

    dw = np.einsum("tsik,tsi->tk", Jw, dpos)
    grads = {
        "q": np.einsum("tsiq,tsi->tq", Jq, dpos),
        "base_pos": dpos.sum(axis=1),
        "delta": np.einsum("tji,tj->ti", so3_left_jacobian_batch(delta), dw),
    }

    dqacc = 2.0 * w.gamma * qacc
    dqdot = np.zeros_like(qdot)
    dqdot[1:] += dqacc
    dqdot[:-1] -= dqacc
    grads["q"][1:] += dqdot / dt
    grads["q"][:-1] -= dqdot / dt
    return total, parts, grads


@dataclass
class RetargetResult:
    clip: MotionClip
    trace: list[dict]  # per-logged-iteration loss breakdown
    converged: bool
    final_loss: float


def retarget(
    problem: RetargetProblem,
    max_iters: int = 2000,
    lr: float = 1e-2,
    tol: float = 1e-6,
    log_every: int = 25,
) -> RetargetResult:
    """Adam over all frame variables jointly; returns the best iterate."""
    variables = problem.init_variables()
    # heavier momentum and a short gradient-variance window cope with the
    # stiff foot-velocity term; cosine decay to lr/100 does the polishing
    opt = Adam(variables, lr=lr, beta1=0.95, beta2=0.99)
    best = {k: v.copy() for k, v in variables.items()}
    best_loss = np.inf
    trace: list[dict] = []
    checkpoint_loss = np.inf
    checkpoint_at = max(1, int(0.8 * max_iters))
    for it in range(max_iters):
        opt.lr = lr * (0.01 + 0.495 * (1.0 + np.cos(np.pi * it / max_iters)))
        total, parts, grads = total_loss(problem, variables)
        if total < best_loss:
            best_loss = total
            best = {k: v.copy() for k, v in variables.items()}
        if it % log_every == 0 or it == max_iters - 1:
            trace.append({"iter": it, "total": total, **parts})
        if it == checkpoint_at:
            checkpoint_loss = best_loss
        opt.step(grads)
    # settled when the final stretch stopped improving the best iterate
    converged = best_loss >= checkpoint_loss * (1.0 - max(tol, 1e-12) * checkpoint_at)

    T = len(problem.source)
    q = np.clip(best["q"], problem.model.lower_limits, problem.model.upper_limits)
    R = so3_exp_batch(best["delta"]) @ problem.init_rotations
    quat = np.stack([matrix_to_quat(Rt) for Rt in R])
    clip = MotionClip(
        fps=problem.source.fps,
        base_pos=best["base_pos"].copy(),
        base_quat=quat,
        q=q,
        contacts=problem.source.contacts.copy(),
    )
    return RetargetResult(clip=clip, trace=trace, converged=converged, final_loss=best_loss)
