"""Auto-regressive motion generation from a trained decoder.

Two modes: random latents (diverse unconditioned motion) and commanded
latents from the command encoder (velocity steering).  Keypoint positions in
the generated frames are re-projected through forward kinematics from the
generated joint angles, so the pose stream stays kinematically consistent;
the raw decoder outputs are kept alongside for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .command import CommandEncoder, VelocityCommand
from .cvae import Cvae
from .dataset import H_BASE, P_KEY, Q_JOINTS, RobotPose, V_BASE, W_BASE
from .model import RobotModel, default_model, keypoints_local_batch
from .rotations import yaw_matrix

MAX_LATENT_NORM = 6.0


class RolloutError(RuntimeError):
    """Non-finite state or invalid input during generation."""


@dataclass(frozen=True)
class ReferenceFrame:
    """Per-frame tracking targets consumed by the reward engine."""

    q_ref: np.ndarray  # (21,) joint angles, rad
    p_ref: np.ndarray  # (8,3) base-local keypoint positions, m


@dataclass
class RolloutResult:
    poses: list[RobotPose]  # FK-consistent generated frames
    raw: list[RobotPose]  # unprojected decoder outputs, same length
    references: list[ReferenceFrame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.poses)


def step(decoder: Cvae, m: RobotPose, z: np.ndarray) -> RobotPose:
    """One auto-regressive step; exactly the decoder map (z, m) -> m_next."""
    return decoder.decode(z, m)


def _reproject(flat: np.ndarray, model: RobotModel) -> np.ndarray:
    # silent limit clamp: generated angles ride the limits by design
    out = flat.copy()
    out[P_KEY] = keypoints_local_batch(model, flat[Q_JOINTS][None])[0].ravel()
    return out


def _advance(decoder: Cvae, cur_std: np.ndarray, z: np.ndarray, model: RobotModel, t: int):
    """Decode one standardized step; returns (fk_std, raw_flat, fk_flat)."""
    try:
        nxt_std = decoder.decode_std(z[None], cur_std[None])[0]
    except FloatingPointError as exc:
        raise RolloutError(f"non-finite decoder output at step {t}") from exc
    raw = decoder.unstandardize(nxt_std)
    if not np.all(np.isfinite(raw)):
        raise RolloutError(f"non-finite pose at step {t}")
    fk = _reproject(raw, model)
    return decoder.standardize(fk), raw, fk


def rollout_random(
    decoder: Cvae,
    m0: RobotPose,
    n_frames: int,
    seed: int = 0,
    model: RobotModel | None = None,
) -> RolloutResult:
    """Generate n_frames poses with latents z ~ N(0, I), norm-clamped."""
    if n_frames < 1:
        raise RolloutError("n_frames must be >= 1")
    model = model or default_model()
    rng = np.random.default_rng(seed)
    zs = rng.standard_normal((n_frames, decoder.config.latent))
    norms = np.linalg.norm(zs, axis=1, keepdims=True)
    zs *= np.minimum(1.0, MAX_LATENT_NORM / np.maximum(norms, 1e-12))
    return rollout_latents(decoder, m0, zs, model=model)


def rollout_latents(
    decoder: Cvae,
    m0: RobotPose,
    latents: np.ndarray,
    model: RobotModel | None = None,
) -> RolloutResult:
    """Deterministic rollout from an explicit (N, latent) array."""
    model = model or default_model()
    latents = np.asarray(latents, dtype=float)
    if latents.ndim != 2 or latents.shape[1] != decoder.config.latent:
        raise RolloutError(f"latents must be (N, {decoder.config.latent}), got {latents.shape}")
    cur_std = decoder.standardize(m0.flat())
    result = RolloutResult(poses=[], raw=[])
    for t, z in enumerate(latents):
        cur_std, raw, fk = _advance(decoder, cur_std, z, model, t)
        result.raw.append(RobotPose.from_flat(raw))
        result.poses.append(RobotPose.from_flat(fk))
    return result


def rollout_commanded(
    decoder: Cvae,
    encoder: CommandEncoder,
    m0: RobotPose,
    commands: list[VelocityCommand],
    n_frames: int | None = None,
    model: RobotModel | None = None,
) -> RolloutResult:
    """Steered rollout: z_t = psi(c_t, m_{t-1}).

    Commands shorter than n_frames hold their last value.  Returns the pose
    stream plus per-frame reference targets (q_ref, p_ref).
    """
    if not commands:
        raise RolloutError("need at least one command")
    n_frames = len(commands) if n_frames is None else n_frames
    if n_frames < 1:
        raise RolloutError("n_frames must be >= 1")
    model = model or default_model()
    cur_std = decoder.standardize(m0.flat())
    result = RolloutResult(poses=[], raw=[])
    for t in range(n_frames):
        cmd = commands[min(t, len(commands) - 1)]
        z = encoder.encode_std(cmd.as_array()[None], cur_std[None])[0]
        cur_std, raw, fk = _advance(decoder, cur_std, z, model, t)
        result.raw.append(RobotPose.from_flat(raw))
        pose = RobotPose.from_flat(fk)
        result.poses.append(pose)
        result.references.append(
            ReferenceFrame(q_ref=fk[Q_JOINTS].copy(), p_ref=fk[P_KEY].reshape(8, 3).copy())
        )
    return result


def integrate_base(poses: list[RobotPose], fps: float, origin: np.ndarray | None = None,
                   yaw0: float = 0.0):
    """Integrate base-local velocities into a world trajectory.

    Returns (base_pos (T,3), yaw (T,)).  Heading integrates the local yaw
    rate; planar position integrates the rotated linear velocity; height is
    read directly from each pose.
    """
    T = len(poses)
    base_pos = np.zeros((T, 3))
    yaw = np.zeros(T)
    pos = np.zeros(3) if origin is None else np.asarray(origin, dtype=float).copy()
    heading = float(yaw0)
    dt = 1.0 / fps
    for t, pose in enumerate(poses):
        flat = pose.flat()
        pos = pos.copy()
        pos[2] = flat[H_BASE]
        base_pos[t] = pos
        yaw[t] = heading
        R = yaw_matrix(heading)
        pos = pos + R @ flat[V_BASE] * dt
        heading += flat[W_BASE][2] * dt
    return base_pos, yaw


def clip_from_rollout(result: RolloutResult, fps: float = 50.0,
                      model: RobotModel | None = None) -> "MotionClip":
    """Package generated poses as a motion clip with an integrated base path."""
    from .dataset import MotionClip, detect_foot_contacts
    from .rotations import matrix_to_quat

    model = model or default_model()
    base_pos, yaw = integrate_base(result.poses, fps)
    quat = np.stack([matrix_to_quat(yaw_matrix(h)) for h in yaw])
    q = np.stack([p.flat()[Q_JOINTS] for p in result.poses])
    clip = MotionClip(fps=fps, base_pos=base_pos, base_quat=quat, q=q)
    contacts = detect_foot_contacts(clip, model)
    return MotionClip(fps=fps, base_pos=base_pos, base_quat=quat, q=q, contacts=contacts)


def world_keypoints(pose: RobotPose, base_pos: np.ndarray, heading: float) -> np.ndarray:
    """(8,3) keypoints in world frame for rendering/streaming."""
    R = yaw_matrix(heading)
    return base_pos[None, :] + pose.flat()[P_KEY].reshape(8, 3) @ R.T


__all__ = [
    "MAX_LATENT_NORM",
    "ReferenceFrame",
    "RolloutError",
    "RolloutResult",
    "clip_from_rollout",
    "integrate_base",
    "rollout_commanded",
    "rollout_latents",
    "rollout_random",
    "step",
    "world_keypoints",
]
