"""Motion clips: file format, mirroring, contact labels, pose features, synthetic gait.

A clip stores base transforms plus joint angles at fixed fps.  Featurization
turns clips into the 76-dim pose vectors consumed by the motion generator:
base-local linear/angular velocity, joint angles, base-local keypoint
positions/velocities, and base height.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    DOF_COUNT,
    KEYPOINT_NAMES,
    RobotModel,
    default_model,
    fk_sites,
    keypoints_local_batch,
    mirror_maps,
)
from .rotations import matrix_to_quat, quat_to_matrix, so3_log, yaw_matrix

CLIP_FORMAT_VERSION = 1

POSE_DIM = 76
V_BASE = slice(0, 3)
W_BASE = slice(3, 6)
Q_JOINTS = slice(6, 27)
P_KEY = slice(27, 51)
V_KEY = slice(51, 75)
H_BASE = 75


class ClipError(ValueError):
    """Malformed or inconsistent motion clip."""


@dataclass
class MotionClip:
    """Time-indexed base transforms and joint angles at fixed fps."""

    fps: float
    base_pos: np.ndarray  # (T,3)
    base_quat: np.ndarray  # (T,4) w-first unit quaternions
    q: np.ndarray  # (T,21)
    contacts: np.ndarray | None = None  # (T,2) bool, columns (left, right)

    def __post_init__(self):
        self.base_pos = np.asarray(self.base_pos, dtype=float)
        self.base_quat = np.asarray(self.base_quat, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.fps <= 0:
            raise ClipError("fps must be positive")
        T = len(self.base_pos)
        if T < 2:
            raise ClipError("too short: a clip needs at least 2 frames")
        if self.base_pos.shape != (T, 3) or self.base_quat.shape != (T, 4):
            raise ClipError("base arrays must be (T,3) and (T,4)")
        if self.q.shape != (T, DOF_COUNT):
            raise ClipError(f"q must be (T,{DOF_COUNT}), got {self.q.shape}")
        if self.contacts is not None:
            self.contacts = np.asarray(self.contacts, dtype=bool)
            if self.contacts.shape != (T, 2):
                raise ClipError("contacts must be (T,2)")

    def __len__(self) -> int:
        return len(self.base_pos)

    @property
    def duration(self) -> float:
        return (len(self) - 1) / self.fps

    def rotations(self) -> np.ndarray:
        return np.stack([quat_to_matrix(quat) for quat in self.base_quat])


@dataclass(frozen=True)
class RobotPose:
    """One frame of the generator's state vector (flat dimension 76).

    Velocities and keypoints are base-local; h_base is the world height
    of the base.
    """

    v_base: np.ndarray  # (3,) m/s
    w_base: np.ndarray  # (3,) rad/s
    q: np.ndarray  # (21,) rad
    p_key: np.ndarray  # (8,3) m
    v_key: np.ndarray  # (8,3) m/s
    h_base: float  # m

    def flat(self) -> np.ndarray:
        out = np.empty(POSE_DIM)
        out[V_BASE] = self.v_base
        out[W_BASE] = self.w_base
        out[Q_JOINTS] = self.q
        out[P_KEY] = self.p_key.reshape(-1)
        out[V_KEY] = self.v_key.reshape(-1)
        out[H_BASE] = self.h_base
        return out

    @staticmethod
    def from_flat(vec: np.ndarray) -> "RobotPose":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (POSE_DIM,):
            raise ValueError(f"pose vector must have dimension {POSE_DIM}, got {vec.shape}")
        return RobotPose(
            v_base=vec[V_BASE].copy(),
            w_base=vec[W_BASE].copy(),
            q=vec[Q_JOINTS].copy(),
            p_key=vec[P_KEY].reshape(8, 3).copy(),
            v_key=vec[V_KEY].reshape(8, 3).copy(),
            h_base=float(vec[H_BASE]),
        )


@dataclass(frozen=True)
class FootState:
    """Height above flat-stance level and world velocity of one foot."""

    height: float
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))


def poses_to_array(poses) -> np.ndarray:
    return np.stack([p.flat() for p in poses])


# ---------------------------------------------------------------------------
# clip file format


def save_clip(path, clip: MotionClip) -> None:
    """Write the plain-text clip format (version, fps, joint order header)."""
    joints = ",".join(default_model().joint_names)
    with open(path, "w") as f:
        f.write(f"# gmpclip {CLIP_FORMAT_VERSION}\n")
        f.write(f"# fps {clip.fps!r}\n")
        f.write(f"# joints {joints}\n")
        cols = "base_pos(3) quat_wxyz(4) q(21)" + (" contacts(2)" if clip.contacts is not None else "")
        f.write(f"# columns {cols}\n")
        for t in range(len(clip)):
            row = np.concatenate([clip.base_pos[t], clip.base_quat[t], clip.q[t]])
            cells = [f"{x:.17g}" for x in row]
            if clip.contacts is not None:
                cells += [str(int(c)) for c in clip.contacts[t]]
            f.write(" ".join(cells) + "\n")


def load_clip(path) -> MotionClip:
    """Read a clip written by save_clip; bit-exact round trip."""
    path = Path(path)
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split(None, 1)
                if len(parts) == 2:
                    header[parts[0]] = parts[1]
                continue
            try:
                rows.append([float(x) for x in line.split()])
            except ValueError as e:
                raise ClipError(f"{path}:{lineno}: bad numeric row: {e}") from None
    if header.get("gmpclip") != str(CLIP_FORMAT_VERSION):
        raise ClipError(f"{path}: missing or unsupported gmpclip version header")
    try:
        fps = float(header["fps"])
    except KeyError:
        raise ClipError(f"{path}: missing fps header") from None
    if not rows:
        raise ClipError(f"{path}: no frames")
    widths = {len(r) for r in rows}
    if widths not in ({28}, {30}):
        raise ClipError(f"{path}: rows must have 28 (or 30 with contacts) columns, got {sorted(widths)}")
    data = np.array(rows)
    contacts = data[:, 28:30].astype(bool) if data.shape[1] == 30 else None
    return MotionClip(fps=fps, base_pos=data[:, 0:3], base_quat=data[:, 3:7], q=data[:, 7:28], contacts=contacts)


# ---------------------------------------------------------------------------
# mirroring


def mirror_x(clip: MotionClip, model: RobotModel | None = None) -> MotionClip:
    """Mirror a clip across the x-z plane (left/right swap); an involution."""
    model = model or default_model()
    perm, sign, _ = mirror_maps(model)
    base_pos = clip.base_pos * np.array([1.0, -1.0, 1.0])
    base_quat = clip.base_quat * np.array([1.0, -1.0, 1.0, -1.0])
    q = clip.q[:, perm] * sign
    contacts = clip.contacts[:, ::-1].copy() if clip.contacts is not None else None
    return MotionClip(fps=clip.fps, base_pos=base_pos, base_quat=base_quat, q=q, contacts=contacts)


def mirror_pose_signed_perm(model: RobotModel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Signed permutation mirroring flat pose vectors: mirrored = sign * flat[perm]."""
    model = model or default_model()
    jperm, jsign, kp_perm = mirror_maps(model)
    perm = np.arange(POSE_DIM)
    sign = np.ones(POSE_DIM)
    sign[V_BASE] = [1.0, -1.0, 1.0]
    sign[W_BASE] = [-1.0, 1.0, -1.0]
    perm[Q_JOINTS] = 6 + jperm
    sign[Q_JOINTS] = jsign
    for block_start in (P_KEY.start, V_KEY.start):
        for k in range(len(KEYPOINT_NAMES)):
            src = block_start + 3 * kp_perm[k]
            dst = block_start + 3 * k
            perm[dst : dst + 3] = np.arange(src, src + 3)
            sign[dst : dst + 3] = [1.0, -1.0, 1.0]
    return perm, sign


# ---------------------------------------------------------------------------
# velocities, contacts, features


def _central_diff(x: np.ndarray, dt: float) -> np.ndarray:
    """Central finite differences along axis 0, one-sided at the ends."""
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    v[0] = (x[1] - x[0]) / dt
    v[-1] = (x[-1] - x[-2]) / dt
    return v


def ankle_world_positions(clip: MotionClip, model: RobotModel) -> np.ndarray:
    """World ankle keypoints (T,2,3), columns (left, right)."""
    R = clip.rotations()
    pos = fk_sites(model, clip.q, clip.base_pos, R, model.keypoints)
    li, ri = KEYPOINT_NAMES.index("l_ankle"), KEYPOINT_NAMES.index("r_ankle")
    return pos[:, (li, ri), :]


def detect_foot_contacts(
    clip: MotionClip,
    model: RobotModel,
    h_thresh: float = 0.05,
    v_thresh: float = 0.2,
) -> np.ndarray:
    """Binary contact labels (T,2): foot height and speed both close to zero.

    Foot height is the ankle keypoint's clearance above its flat-stance level,
    so a flat standing pose reads as height 0.
    """
    if h_thresh <= 0 or v_thresh <= 0:
        raise ValueError("contact thresholds must be positive")
    ankles = ankle_world_positions(clip, model)
    heights = ankles[:, :, 2] - model.ankle_rest_height
    speeds = np.linalg.norm(_central_diff(ankles, 1.0 / clip.fps), axis=2)
    return (heights < h_thresh) & (speeds < v_thresh)


def foot_states(clip: MotionClip, model: RobotModel) -> list[tuple[FootState, FootState]]:
    """Per-frame (left, right) FootState pairs for a clip."""
    ankles = ankle_world_positions(clip, model)
    vel = _central_diff(ankles, 1.0 / clip.fps)
    heights = ankles[:, :, 2] - model.ankle_rest_height
    return [
        (FootState(heights[t, 0], vel[t, 0]), FootState(heights[t, 1], vel[t, 1]))
        for t in range(len(clip))
    ]


def featurize(clip: MotionClip, model: RobotModel) -> list[RobotPose]:
    """Pose vectors for every frame; velocities by central differences."""
    dt = 1.0 / clip.fps
    T = len(clip)
    R = clip.rotations()
    v_world = _central_diff(clip.base_pos, dt)
    v_base = np.einsum("tij,ti->tj", R, v_world)  # R^T v
    w_base = np.empty((T, 3))
    for t in range(T):
        lo, hi = max(t - 1, 0), min(t + 1, T - 1)
        w_base[t] = so3_log(R[lo].T @ R[hi]) / ((hi - lo) * dt)
    p_key = keypoints_local_batch(model, clip.q)
    v_key = _central_diff(p_key, dt)
    return [
        RobotPose(
            v_base=v_base[t],
            w_base=w_base[t],
            q=clip.q[t].copy(),
            p_key=p_key[t],
            v_key=v_key[t],
            h_base=float(clip.base_pos[t, 2]),
        )
        for t in range(T)
    ]


def standing_pose(model: RobotModel) -> RobotPose:
    """Motionless flat-stance reference pose."""
    q = np.zeros(DOF_COUNT)
    p_key = keypoints_local_batch(model, q[None])[0]
    return RobotPose(
        v_base=np.zeros(3),
        w_base=np.zeros(3),
        q=q,
        p_key=p_key,
        v_key=np.zeros((8, 3)),
        h_base=model.rest_base_height,
    )


# ---------------------------------------------------------------------------
# synthetic gait generator


def _smoothstep(s: np.ndarray) -> np.ndarray:
    return s * s * (3.0 - 2.0 * s)


def _leg_ik(delta: np.ndarray, l1: float, l2: float) -> tuple[float, float, float]:
    """(hip_roll, hip_pitch, knee_pitch) reaching a hip-frame ankle offset.

    Chain: R_x(roll) R_y(hip) [ (0,0,-l1) + R_y(knee) (0,0,-l2) ].
    Targets beyond reach are pulled onto the reachable sphere.
    """
    # roll aligns the leg plane with the target; rotate target back into it
    roll = np.arctan2(delta[1], -delta[2])
    ux = delta[0]
    uz = -np.sin(roll) * delta[1] + np.cos(roll) * delta[2]
    d = np.clip(np.hypot(ux, uz), abs(l1 - l2) + 1e-6, 0.995 * (l1 + l2))
    cos_knee = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    knee = np.arccos(np.clip(cos_knee, -1.0, 1.0))
    # R_y(h) rotates by -h in the (x,z) plane: h = angle(w) - angle(u)
    wx, wz = -l2 * np.sin(knee), -(l1 + l2 * np.cos(knee))
    hip = np.arctan2(wz, wx) - np.arctan2(uz, ux)
    hip = np.arctan2(np.sin(hip), np.cos(hip))
    return float(roll), float(hip), float(knee)


def _auto_cadence(speed):
    return 1.7 + 1.15 * speed


def _pelvis_height(speed):
    return 0.90 - 0.12 * np.minimum(speed, 1.5) / 1.5


def waypoint_profile(waypoints, duration: float, fps: float = 50.0, blend: float = 0.8) -> np.ndarray:
    """Per-frame profile from equally spaced plateaus with smoothstep blends.

    Transitions of width `blend` seconds are centered on segment boundaries,
    so the result is C1 and holds each waypoint value exactly mid-segment.
    """
    w = np.asarray(waypoints, dtype=float)
    T = int(round(duration * fps))
    t = np.arange(T) / fps
    prof = np.full(T, w[0] if w.size else 0.0)
    if w.size < 2:
        return prof
    seg = duration / w.size
    for k in range(1, w.size):
        s = np.clip((t - (k * seg - 0.5 * blend)) / blend, 0.0, 1.0)
        prof += (w[k] - w[k - 1]) * _smoothstep(s)
    return prof


def synth_gait(
    speed,
    cadence: float | None = None,
    duration: float = 10.0,
    stance_ratio: float = 0.6,
    fps: float = 50.0,
    seed: int = 0,
    lateral=0.0,
    turn_rate=0.0,
    model: RobotModel | None = None,
) -> MotionClip:
    """Kinematically consistent sinusoidal walk with an exact contact schedule.

    speed is the forward velocity in [0, 1.5] m/s; optional lateral drift
    (m/s) and turn rate (rad/s) curve the path.  Each of the three may also
    be a per-frame array (see waypoint_profile), giving walks that change
    speed and direction over time.  Deterministic per seed.
    """
    if not 0.0 < stance_ratio < 1.0:
        raise ValueError("stance_ratio must be in (0,1)")
    if duration <= 0 or fps <= 0:
        raise ValueError("duration and fps must be positive")
    model = model or default_model()
    rng = np.random.default_rng(seed)

    T = int(round(duration * fps))
    if T < 2:
        raise ValueError("duration too short for the requested fps")
    dt = 1.0 / fps
    times = np.arange(T) * dt

    def per_frame(x, name: str) -> np.ndarray:
        arr = np.full(T, float(x)) if np.ndim(x) == 0 else np.asarray(x, dtype=float)
        if arr.shape != (T,):
            raise ValueError(f"{name} must be a scalar or a ({T},) profile")
        return arr

    s_prof = per_frame(speed, "speed")
    l_prof = per_frame(lateral, "lateral")
    w_prof = per_frame(turn_rate, "turn_rate")
    if s_prof.min() < 0.0 or s_prof.max() > 1.5:
        raise ValueError("speed must be within [0, 1.5] m/s")

    l_hip = model.joints[model.joint_index(model.layout["left_leg"][0])].offset
    hip_dy = abs(l_hip[1])
    l1 = abs(model.joints[model.joint_index("l_knee_pitch")].offset[2])
    l2 = abs(model.joints[model.joint_index("l_ankle_pitch")].offset[2])

    arm_amp = (0.18 + 0.22 * s_prof) * (1.0 + 0.15 * rng.uniform(-1.0, 1.0))
    elbow_bend = -0.25 + 0.1 * rng.uniform(-1.0, 1.0)
    waist_amp = 0.04 * s_prof * (1.0 + 0.3 * rng.uniform(-1.0, 1.0))
    swing_h_prof = 0.05 + 0.05 * s_prof

    # base path and gait phase by trapezoid integration on an oversampled grid
    OV = 8
    n_f = (T - 1) * OV + 1
    tf = np.arange(n_f) * (dt / OV)
    sf = np.interp(tf, times, s_prof)
    lf = np.interp(tf, times, l_prof)
    wf = np.interp(tf, times, w_prof)

    def cumint(y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(y)
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1])) * (dt / OV)
        return out

    af = cumint(wf)  # heading
    xf = cumint(sf * np.cos(af) - lf * np.sin(af))
    yf = cumint(sf * np.sin(af) + lf * np.cos(af))

    yaw = af[::OV]
    base_pos = np.column_stack([xf[::OV], yf[::OV], _pelvis_height(s_prof)])
    base_R = np.stack([yaw_matrix(a) for a in yaw])
    base_quat = np.stack([matrix_to_quat(R) for R in base_R])

    moving = float(np.abs(sf).max() + np.abs(lf).max() + np.abs(wf).max()) > 1e-9
    # phase advances at half the step cadence (one stride = two steps)
    ff = np.full(n_f, cadence / 2.0) if cadence is not None else _auto_cadence(np.maximum(sf, 0.3)) / 2.0
    phi = cumint(ff)

    q = np.zeros((T, DOF_COUNT))
    contacts = np.ones((T, 2), dtype=bool)

    def base_xy_at(t: float) -> tuple[np.ndarray, float]:
        return np.array([np.interp(t, tf, xf), np.interp(t, tf, yf)]), float(np.interp(t, tf, af))

    def foot_target(side: int, t: float, ti: int) -> tuple[np.ndarray, bool]:
        """World ankle target and contact flag. side: 0 left, 1 right."""
        y_off = hip_dy if side == 0 else -hip_dy
        if not moving:
            xy, a = base_xy_at(t)
            p = xy + yaw_matrix(a)[:2, :2] @ np.array([0.0, y_off])
            return np.array([p[0], p[1], model.ankle_rest_height]), True

        offset = 0.0 if side == 0 else 0.5
        phase = float(np.interp(t, tf, phi)) + offset
        k = np.floor(phase)
        frac = phase - k

        def contact_point(cycle: float) -> np.ndarray:
            # foot is planted under the hip at the center of its stance phase
            t_center = float(np.interp(cycle + 0.5 * stance_ratio - offset, phi, tf))
            xy, a = base_xy_at(t_center)
            return xy + yaw_matrix(a)[:2, :2] @ np.array([0.0, y_off])

        if frac < stance_ratio:
            p = contact_point(k)
            return np.array([p[0], p[1], model.ankle_rest_height]), True
        s = (frac - stance_ratio) / (1.0 - stance_ratio)
        p0, p1 = contact_point(k), contact_point(k + 1.0)
        xy = p0 + float(_smoothstep(np.array([s]))[0]) * (p1 - p0)
        z = model.ankle_rest_height + swing_h_prof[ti] * np.sin(np.pi * s) ** 2
        return np.array([xy[0], xy[1], z]), False

    names = model.joint_names
    idx = {n: i for i, n in enumerate(names)}
    for t in range(T):
        Rb = base_R[t]
        pb = base_pos[t]
        phase_l = float(np.interp(times[t], tf, phi)) % 1.0 if moving else 0.0
        for side, prefix in ((0, "l"), (1, "r")):
            target, in_contact = foot_target(side, times[t], t)
            contacts[t, side] = in_contact
            hip_off = model.joints[idx[f"{prefix}_hip_roll"]].offset
            hip_world = pb + Rb @ hip_off
            delta = Rb.T @ (target - hip_world)
            roll, hip, knee = _leg_ik(delta, l1, l2)
            q[t, idx[f"{prefix}_hip_roll"]] = roll
            q[t, idx[f"{prefix}_hip_pitch"]] = hip
            q[t, idx[f"{prefix}_knee_pitch"]] = knee
            q[t, idx[f"{prefix}_ankle_pitch"]] = -(hip + knee)
            q[t, idx[f"{prefix}_ankle_roll"]] = -roll
        if moving:
            swing = np.sin(2.0 * np.pi * phase_l)
            q[t, idx["waist_yaw"]] = waist_amp[t] * swing
            q[t, idx["l_shoulder_pitch"]] = arm_amp[t] * swing
            q[t, idx["r_shoulder_pitch"]] = -arm_amp[t] * swing
        q[t, idx["l_elbow_pitch"]] = elbow_bend
        q[t, idx["r_elbow_pitch"]] = elbow_bend

    return MotionClip(fps=fps, base_pos=base_pos, base_quat=base_quat, q=q, contacts=contacts)
