"""Parametric humanoid kinematic model and forward kinematics.

The model is a rigid tree rooted at the floating base: 21 revolute joints
(6 per leg, 1 waist, 4 per arm) plus 8 named keypoint sites (elbows,
wrists, knees, ankles) whose world/base-local positions feed the rest of
the pipeline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .rotations import axis_angle_batch, hat_batch, quat_to_matrix

log = logging.getLogger("gmp.model")

DOF_COUNT = 21

# canonical keypoint ordering used by every pose vector in the pipeline
KEYPOINT_NAMES = (
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
)

# extra sites used for retargeting limb vectors (shoulders and hips)
LIMB_SITE_NAMES = (
    "l_shoulder",
    "r_shoulder",
    "l_hip",
    "r_hip",
) + KEYPOINT_NAMES

_LAYOUT_GROUPS = (("left_leg", 6), ("right_leg", 6), ("waist", 1), ("left_arm", 4), ("right_arm", 4))


class ModelError(ValueError):
    """Malformed robot descriptor."""


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int  # joint index, -1 for the base
    offset: np.ndarray  # (3,) translation in the parent frame
    axis: np.ndarray  # (3,) unit rotation axis
    limits: tuple[float, float]


@dataclass(frozen=True)
class Site:
    name: str
    joint: int  # frame the site is rigidly attached to
    offset: np.ndarray


@dataclass(frozen=True)
class BasePose:
    """World transform of the floating base (z up, x forward, y left)."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "quaternion", np.asarray(self.quaternion, dtype=float))
        if self.position.shape != (3,) or self.quaternion.shape != (4,):
            raise ValueError("BasePose expects position (3,) and quaternion (4,)")
        if abs(np.linalg.norm(self.quaternion) - 1.0) > 1e-9:
            raise ValueError("quaternion norm must be 1 within 1e-9")

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)


@dataclass(frozen=True)
class RobotModel:
    name: str
    joints: tuple[Joint, ...]
    keypoints: tuple[Site, ...]  # the 8 canonical sites, KEYPOINT_NAMES order
    limb_sites: tuple[Site, ...]  # LIMB_SITE_NAMES order (shoulders/hips + keypoints)
    layout: dict[str, tuple[str, ...]]
    standing_height: float
    rest_base_height: float
    ankle_rest_height: float  # ankle keypoint z when standing flat

    @property
    def dof_count(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)


def _as_vec3(raw, what: str) -> np.ndarray:
    v = np.asarray(raw, dtype=float)
    if v.shape != (3,):
        raise ModelError(f"{what} must be a 3-vector, got {raw!r}")
    return v


def load_model(descriptor) -> RobotModel:
    """Load and validate a robot descriptor (path to a YAML file or a dict)."""
    if isinstance(descriptor, (str, Path)):
        with open(descriptor) as f:
            doc = yaml.safe_load(f)
    else:
        doc = descriptor
    if not isinstance(doc, dict):
        raise ModelError("descriptor must be a mapping")
    for key in ("joints", "keypoints", "layout", "standing_height", "rest_base_height"):
        if key not in doc:
            raise ModelError(f"descriptor missing '{key}'")

    raw_joints = doc["joints"]
    if len(raw_joints) != DOF_COUNT:
        raise ModelError(f"dof count mismatch: expected {DOF_COUNT}, got {len(raw_joints)}")

    names: dict[str, int] = {}
    joints: list[Joint] = []
    for i, rj in enumerate(raw_joints):
        name = rj["name"]
        if name in names or name == "base":
            raise ModelError(f"duplicate joint name '{name}'")
        axis = _as_vec3(rj["axis"], f"axis of '{name}'")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ModelError(f"non-unit axis on joint '{name}'")
        lo, hi = float(rj["limits"][0]), float(rj["limits"][1])
        if not lo < hi:
            raise ModelError(f"limits of '{name}' must satisfy lo < hi")
        parent_name = rj["parent"]
        if parent_name == "base":
            parent = -1
        elif parent_name in names:
            parent = names[parent_name]
        else:
            raise ModelError(f"joint '{name}' references unknown parent '{parent_name}'")
        joints.append(Joint(name, parent, _as_vec3(rj["offset"], f"offset of '{name}'"), axis, (lo, hi)))
        names[name] = i

    layout = {}
    ordered: list[str] = []
    for group, size in _LAYOUT_GROUPS:
        members = tuple(doc["layout"].get(group, ()))
        if len(members) != size:
            raise ModelError(f"layout group '{group}' must list {size} joints")
        layout[group] = members
        ordered.extend(members)
    if tuple(ordered) != tuple(j.name for j in joints):
        raise ModelError("layout groups must cover the joints in declaration order")

    def make_site(rk) -> Site:
        if rk["parent"] not in names:
            raise ModelError(f"keypoint '{rk['name']}' bound to unknown link '{rk['parent']}'")
        return Site(rk["name"], names[rk["parent"]], _as_vec3(rk["offset"], f"keypoint '{rk['name']}'"))

    raw_keypoints = {rk["name"]: rk for rk in doc["keypoints"]}
    if tuple(raw_keypoints) != KEYPOINT_NAMES:
        raise ModelError(f"keypoints must be exactly {list(KEYPOINT_NAMES)} in order")
    keypoints = tuple(make_site(raw_keypoints[n]) for n in KEYPOINT_NAMES)

    # shoulders/hips are the origins of the first shoulder/hip joint frames
    def origin_site(name: str, joint_name: str) -> Site:
        return Site(name, names[joint_name], np.zeros(3))

    limb_sites = (
        origin_site("l_shoulder", layout["left_arm"][0]),
        origin_site("r_shoulder", layout["right_arm"][0]),
        origin_site("l_hip", layout["left_leg"][0]),
        origin_site("r_hip", layout["right_leg"][0]),
    ) + keypoints

    standing_height = float(doc["standing_height"])
    rest_base_height = float(doc["rest_base_height"])
    if standing_height <= 0 or rest_base_height <= 0:
        raise ModelError("heights must be positive")

    model = RobotModel(
        name=str(doc.get("name", "unnamed")),
        joints=tuple(joints),
        keypoints=keypoints,
        limb_sites=limb_sites,
        layout=layout,
        standing_height=standing_height,
        rest_base_height=rest_base_height,
        ankle_rest_height=0.0,
    )
    rest = fk_sites(
        model,
        np.zeros((1, DOF_COUNT)),
        np.array([[0.0, 0.0, rest_base_height]]),
        np.eye(3)[None],
        model.keypoints,
    )
    ankle_z = float(rest[0, KEYPOINT_NAMES.index("l_ankle"), 2])
    object.__setattr__(model, "ankle_rest_height", ankle_z)
    return model


def default_model() -> RobotModel:
    """The bundled 1.65 m humanoid."""
    with resources.files("gmp.data").joinpath("default_humanoid.yaml").open() as f:
        return load_model(yaml.safe_load(f))


def clamp_q(model: RobotModel, q: np.ndarray, warn: bool = False) -> np.ndarray:
    lo, hi = model.lower_limits, model.upper_limits
    clamped = np.clip(q, lo, hi)
    if warn and not np.array_equal(clamped, q):
        worst = np.argmax(np.abs(clamped - q).reshape(-1, DOF_COUNT).max(axis=0))
        log.warning("joint angles outside limits, clamped (worst: %s)", model.joints[worst].name)
    return clamped


def _frame_chain(model: RobotModel, joint: int) -> list[int]:
    chain = []
    while joint != -1:
        chain.append(joint)
        joint = model.joints[joint].parent
    chain.reverse()
    return chain


def fk_frames(
    model: RobotModel, Q: np.ndarray, base_pos: np.ndarray, base_R: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World joint frames for T configurations.

    Returns (origins (T,J,3), rotations (T,J,3,3), world_axes (T,J,3)).
    No limit clamping here; callers decide.
    """
    T = Q.shape[0]
    J = model.dof_count
    origins = np.empty((T, J, 3))
    rots = np.empty((T, J, 3, 3))
    axes = np.empty((T, J, 3))
    for j, joint in enumerate(model.joints):
        if joint.parent == -1:
            Rp, tp = base_R, base_pos
        else:
            Rp, tp = rots[:, joint.parent], origins[:, joint.parent]
        origins[:, j] = tp + np.einsum("tij,j->ti", Rp, joint.offset)
        axes[:, j] = np.einsum("tij,j->ti", Rp, joint.axis)
        rots[:, j] = np.einsum("tij,tjk->tik", Rp, axis_angle_batch(joint.axis, Q[:, j]))
    return origins, rots, axes


def fk_sites(
    model: RobotModel,
    Q: np.ndarray,
    base_pos: np.ndarray,
    base_R: np.ndarray,
    sites: tuple[Site, ...],
    want_jacobian: bool = False,
):
    """World positions of sites for T configurations, optionally with Jacobians.

    Positions have shape (T,S,3).  With want_jacobian=True also returns
    Jq (T,S,3,21) = dp/dq and Jw (T,S,3,3) = dp/d(world rotation of the
    base about its origin); dp/d(base translation) is the identity.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != model.dof_count:
        raise ValueError(f"q must be (T,{model.dof_count}), got {Q.shape}")
    origins, rots, axes = fk_frames(model, Q, base_pos, base_R)
    T, S = Q.shape[0], len(sites)
    pos = np.empty((T, S, 3))
    for s, site in enumerate(sites):
        pos[:, s] = origins[:, site.joint] + np.einsum("tij,j->ti", rots[:, site.joint], site.offset)
    if not want_jacobian:
        return pos

    Jq = np.zeros((T, S, 3, model.dof_count))
    for s, site in enumerate(sites):
        for j in _frame_chain(model, site.joint):
            # revolute joint: dp/dq_j = axis_j x (p - origin_j)
            Jq[:, s, :, j] = np.cross(axes[:, j], pos[:, s] - origins[:, j])
    Jw = -hat_batch(pos - base_pos[:, None, :])
    return pos, Jq, Jw


def forward_kinematics(model: RobotModel, q: np.ndarray, base: BasePose) -> np.ndarray:
    """World positions (8,3) of the canonical keypoints."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof_count,):
        raise ValueError(f"q must have shape ({model.dof_count},), got {q.shape}")
    q = clamp_q(model, q, warn=True)
    return fk_sites(model, q[None], base.position[None], base.rotation()[None], model.keypoints)[0]


def keypoints_local(model: RobotModel, q: np.ndarray) -> np.ndarray:
    """Keypoint positions (8,3) in the base frame (identity base pose)."""
    return forward_kinematics(model, q, BasePose())


def keypoints_local_batch(model: RobotModel, Q: np.ndarray) -> np.ndarray:
    """Base-local keypoints (T,8,3) for a whole trajectory, limits clamped."""
    Q = clamp_q(model, np.asarray(Q, dtype=float))
    T = Q.shape[0]
    return fk_sites(model, Q, np.zeros((T, 3)), np.broadcast_to(np.eye(3), (T, 3, 3)), model.keypoints)


_MIRROR_AXIS = np.diag([1.0, -1.0, 1.0])


def mirror_maps(model: RobotModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Left/right mirroring recipe for this model.

    Returns (joint_perm, joint_sign, keypoint_perm): mirrored q is
    joint_sign * q[joint_perm], mirrored keypoints are keypoints[keypoint_perm]
    with y negated.  Requires a left/right symmetric layout with
    coordinate-aligned axes.
    """
    perm = np.arange(model.dof_count)
    sign = np.empty(model.dof_count)
    pairs = list(zip(model.layout["left_leg"], model.layout["right_leg"]))
    pairs += list(zip(model.layout["left_arm"], model.layout["right_arm"]))
    paired = {}
    for l, r in pairs:
        paired[l] = r
        paired[r] = l
    for i, joint in enumerate(model.joints):
        other = model.joints[model.joint_index(paired[joint.name])] if joint.name in paired else joint
        if not np.allclose(other.axis, joint.axis, atol=1e-9):
            raise ModelError(f"mirroring needs matching axes on pair {joint.name}/{other.name}")
        if not np.allclose(other.offset, _MIRROR_AXIS @ joint.offset, atol=1e-9):
            raise ModelError(f"mirroring needs y-mirrored offsets on pair {joint.name}/{other.name}")
        perm[i] = model.joint_index(other.name)
        flipped = _MIRROR_AXIS @ joint.axis
        if np.allclose(flipped, -joint.axis, atol=1e-9):
            sign[i] = 1.0  # pitch-like axis
        elif np.allclose(flipped, joint.axis, atol=1e-9):
            sign[i] = -1.0  # roll/yaw-like axis
        else:
            raise ModelError(f"axis of '{joint.name}' is not mirror-compatible")
    kp_perm = np.array(
        [KEYPOINT_NAMES.index(("r" + n[1:]) if n.startswith("l") else ("l" + n[1:])) for n in KEYPOINT_NAMES]
    )
    return perm, sign, kp_perm
