"""Motion evaluation metrics: Frechet distances, DTW, and velocity tracking.

JFID/KFID fit Gaussians to pooled joint-angle (21-dim) and keypoint (24-dim)
frames and compare them with the Frechet distance.  JDTW/KDTW average dynamic
time warping costs over paired clips.  MELV scores command following as the
mean weighted linear-velocity reward per episode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import MotionClip
from .model import RobotModel, default_model, keypoints_local_batch

FEATURE_DIMS = {"joint": 21, "keypoint": 24}


class MetricError(ValueError):
    """Invalid metric input."""


@dataclass(frozen=True)
class FeatureSet:
    """Pooled per-frame feature matrix of one kind."""

    kind: str  # "joint" | "keypoint"
    samples: np.ndarray  # (N, d)

    def __post_init__(self):
        if self.kind not in FEATURE_DIMS:
            raise MetricError(f"unknown feature kind {self.kind!r}")
        d = FEATURE_DIMS[self.kind]
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != d:
            raise MetricError(f"{self.kind} features must be (N, {d}), got {samples.shape}")
        if samples.shape[0] < d + 1:
            raise MetricError(
                f"need at least {d + 1} samples for a {d}-dim covariance, got {samples.shape[0]}"
            )
        if not np.all(np.isfinite(samples)):
            raise MetricError("features must be finite")
        object.__setattr__(self, "samples", samples)


def joint_features(clips: list[MotionClip]) -> FeatureSet:
    return FeatureSet("joint", np.concatenate([c.q for c in clips], axis=0))


def keypoint_features(clips: list[MotionClip], model: RobotModel | None = None) -> FeatureSet:
    model = model or default_model()
    mats = [keypoints_local_batch(model, c.q).reshape(c.q.shape[0], -1) for c in clips]
    return FeatureSet("keypoint", np.concatenate(mats, axis=0))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _fit_gaussian(samples: np.ndarray, eps: float = 1e-6):
    mu = samples.mean(axis=0)
    sigma = np.cov(samples, rowvar=False) + eps * np.eye(samples.shape[1])
    return mu, sigma


def fid(a: FeatureSet, b: FeatureSet, eps: float = 1e-6) -> float:
    """Frechet distance between Gaussian fits of two feature populations."""
    if a.kind != b.kind:
        raise MetricError(f"feature kinds differ: {a.kind} vs {b.kind}")
    mu_a, sig_a = _fit_gaussian(a.samples, eps)
    mu_b, sig_b = _fit_gaussian(b.samples, eps)
    return fid_from_moments(mu_a, sig_a, mu_b, sig_b)


def fid_from_moments(mu_a, sig_a, mu_b, sig_b) -> float:
    """Closed-form Frechet distance between two Gaussians."""
    mu_a, mu_b = np.asarray(mu_a, dtype=float), np.asarray(mu_b, dtype=float)
    sig_a, sig_b = np.atleast_2d(np.asarray(sig_a, dtype=float)), np.atleast_2d(np.asarray(sig_b, dtype=float))
    root_a = _psd_sqrt(sig_a)
    cross = root_a @ sig_b @ root_a
    vals = np.linalg.eigvalsh(cross)
    tr_cross = float(np.sum(np.sqrt(np.clip(vals, 0.0, None))))
    value = float(np.sum((mu_a - mu_b) ** 2) + np.trace(sig_a) + np.trace(sig_b) - 2.0 * tr_cross)
    if value < -1e-9:
        raise MetricError(f"Frechet distance came out negative ({value}); degenerate covariance")
    return max(value, 0.0)


def _as_seq(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise MetricError(f"{name} must be a non-empty sequence of vectors")
    if not np.all(np.isfinite(arr)):
        raise MetricError(f"{name} must be finite")
    return arr


def dtw(a, b) -> float:
    """Cumulative cost of the optimal warping path (match/insert/delete)."""
    a, b = _as_seq(a, "a"), _as_seq(b, "b")
    if a.shape[1] != b.shape[1]:
        raise MetricError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    # (n, m) local Euclidean costs, then the classic O(nm) recurrence
    diff = a[:, None, :] - b[None, :, :]
    cost = np.sqrt(np.sum(diff**2, axis=2))
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    return float(acc[n, m])


def melv(episodes) -> float:
    """Mean over episodes of the per-step weighted linear tracking reward."""
    if not episodes:
        raise MetricError("need at least one episode")
    per_episode = []
    for k, ep in enumerate(episodes):
        v = np.asarray(ep["v_xy"], dtype=float)
        c = np.asarray(ep["c_xy"], dtype=float)
        if v.shape != c.shape or v.ndim != 2 or v.shape[1] != 2 or v.shape[0] == 0:
            raise MetricError(f"episode {k}: v_xy and c_xy must both be non-empty (T, 2)")
        rewards = 3.0 * np.exp(-4.0 * np.sum((v - c) ** 2, axis=1))
        per_episode.append(float(rewards.mean()))
    return float(np.mean(per_episode))


@dataclass(frozen=True)
class MetricReport:
    jfid: float
    kfid: float
    jdtw: float
    kdtw: float
    melv: float | None = None

    def as_table(self) -> str:
        cols = ["JFID", "KFID", "JDTW", "KDTW", "MELV"]
        vals = [self.jfid, self.kfid, self.jdtw, self.kdtw, self.melv]
        cells = ["-" if v is None else f"{v:.6g}" for v in vals]
        w = [max(len(c), len(s)) for c, s in zip(cols, cells)]
        header = "  ".join(f"{c:>{w[i]}}" for i, c in enumerate(cols))
        row = "  ".join(f"{s:>{w[i]}}" for i, s in enumerate(cells))
        note = "clips paired by matching command profile (index order)"
        return f"# {note}\n{header}\n{row}"


def evaluate(
    robot_clips: list[MotionClip],
    reference_clips: list[MotionClip],
    episodes=None,
    model: RobotModel | None = None,
) -> MetricReport:
    """Full metric panel; DTW pairs clips by index (matched command profiles)."""
    if not robot_clips or not reference_clips:
        raise MetricError("need at least one clip on each side")
    if len(robot_clips) != len(reference_clips):
        raise MetricError(
            f"clip lists must pair up: {len(robot_clips)} vs {len(reference_clips)}"
        )
    model = model or default_model()
    jfid = fid(joint_features(robot_clips), joint_features(reference_clips))
    kfid = fid(keypoint_features(robot_clips, model), keypoint_features(reference_clips, model))
    jd, kd = [], []
    for rc, fc in zip(robot_clips, reference_clips):
        jd.append(dtw(rc.q, fc.q))
        rk = keypoints_local_batch(model, rc.q).reshape(rc.q.shape[0], -1)
        fk = keypoints_local_batch(model, fc.q).reshape(fc.q.shape[0], -1)
        kd.append(dtw(rk, fk))
    return MetricReport(
        jfid=jfid,
        kfid=kfid,
        jdtw=float(np.mean(jd)),
        kdtw=float(np.mean(kd)),
        melv=None if episodes is None else melv(episodes),
    )


__all__ = [
    "FEATURE_DIMS",
    "FeatureSet",
    "MetricError",
    "MetricReport",
    "dtw",
    "evaluate",
    "fid",
    "fid_from_moments",
    "joint_features",
    "keypoint_features",
    "melv",
]
