"""Command encoder: maps (velocity command, pose) to a latent steering vector.

Trained by backpropagation through the frozen motion decoder over short
auto-regressive rollouts, minimizing velocity tracking error plus a latent
norm regularizer.  The decoder is never updated; this is asserted bit-exactly.
"""

from __future__ import annotations

import hashlib
import inspect
from dataclasses import dataclass

import numpy as np

from .cvae import Cvae
from .dataset import POSE_DIM, RobotPose
from .nn import Adam, Mlp, load_checkpoint, save_checkpoint

COMMAND_RANGES = {"vx": (0.0, 1.5), "vy": (-0.3, 0.3), "yaw_rate": (-0.3, 0.3)}
PSI_HIDDEN = (256, 256, 256)


class CommandError(ValueError):
    """Invalid command-encoder input or configuration."""


@dataclass(frozen=True)
class VelocityCommand:
    """Base-frame velocity target; construction clamps to the valid ranges."""

    vx: float = 0.0
    vy: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "yaw_rate"):
            lo, hi = COMMAND_RANGES[name]
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise CommandError(f"{name} must be finite")
            object.__setattr__(self, name, min(max(value, lo), hi))

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.yaw_rate])


def make_command(vx: float, vy: float = 0.0, yaw_rate: float = 0.0):
    """Clamping constructor that also reports which fields were clamped."""
    cmd = VelocityCommand(vx, vy, yaw_rate)
    requested = {"vx": float(vx), "vy": float(vy), "yaw_rate": float(yaw_rate)}
    clamped = {k: {"requested": v, "applied": getattr(cmd, k)}
               for k, v in requested.items() if v != getattr(cmd, k)}
    return cmd, clamped


def params_digest(params: dict[str, np.ndarray]) -> str:
    """SHA-256 over named tensors; order-independent."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    return h.hexdigest()


class CommandEncoder:
    """psi-network producing a 32-dim latent from (command, standardized pose)."""

    def __init__(self, latent: int = 32, rng: np.random.Generator | None = None,
                 mean: np.ndarray | None = None, std: np.ndarray | None = None):
        rng = rng or np.random.default_rng(0)
        self.latent = latent
        self.psi = Mlp([3 + POSE_DIM, *PSI_HIDDEN, latent], rng, name="psi", out_scale=0.1)
        self.mean = np.zeros(POSE_DIM) if mean is None else np.asarray(mean, dtype=float).copy()
        self.std = np.ones(POSE_DIM) if std is None else np.asarray(std, dtype=float).copy()

    def encode_std(self, commands: np.ndarray, cur_std: np.ndarray, cache: list | None = None) -> np.ndarray:
        return self.psi.forward(np.concatenate([commands, cur_std], axis=-1), cache)

    def encode_command(self, command: VelocityCommand, m: RobotPose) -> np.ndarray:
        cur_std = ((m.flat() - self.mean) / self.std)[None]
        return self.encode_std(command.as_array()[None], cur_std)[0]

    def save(self, path, meta: dict | None = None) -> None:
        tensors = dict(self.psi.params())
        tensors["norm.mean"] = self.mean
        tensors["norm.std"] = self.std
        save_checkpoint(path, tensors, {"kind": "gmp-cmd", "latent": self.latent, **(meta or {})})

    @classmethod
    def load(cls, path) -> "CommandEncoder":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "gmp-cmd":
            raise CommandError(f"{path}: not a command-encoder checkpoint (kind={meta.get('kind')!r})")
        enc = cls(latent=int(meta["latent"]), mean=tensors["norm.mean"], std=tensors["norm.std"])
        enc.psi.load_params(tensors)
        return enc


def uniform_command_sampler(rng: np.random.Generator, n: int) -> np.ndarray:
    """(n,3) commands uniform over the valid ranges."""
    cols = [rng.uniform(lo, hi, n) for lo, hi in COMMAND_RANGES.values()]
    return np.stack(cols, axis=1)


def hold_biased_command_sampler(hold_frac: float = 0.5, noise: float = 0.05):
    """Sampler mixing uniform commands with hold-current-velocity commands.

    Pure uniform sampling rarely pairs a start pose with its own velocity, so
    the steady-state "keep doing this" regime is undertrained; biasing part of
    each batch toward the pose's velocity (plus noise, clamped to the valid
    ranges) fixes that.  Falls back to uniform when no poses are supplied.
    """
    if not 0.0 <= hold_frac <= 1.0:
        raise CommandError("hold_frac must be within [0,1]")

    def sample(rng: np.random.Generator, n: int, poses: np.ndarray | None = None) -> np.ndarray:
        cmds = uniform_command_sampler(rng, n)
        if poses is None or hold_frac == 0.0:
            return cmds
        mask = rng.random(n) < hold_frac
        vel = poses[:, [0, 1, 5]] + rng.normal(0.0, noise, (n, 3))
        for i, (lo, hi) in enumerate(COMMAND_RANGES.values()):
            vel[:, i] = np.clip(vel[:, i], lo, hi)
        cmds[mask] = vel[mask]
        return cmds

    return sample


@dataclass(frozen=True)
class CommandTrainOpts:
    horizon: int = 25  # 0.5 s at 50 fps
    epochs: int = 30
    batches_per_epoch: int = 20
    batch: int = 32
    lr: float = 1e-3
    latent_reg: float = 0.01

    def __post_init__(self):
        if self.horizon < 1 or self.epochs < 1 or self.batch < 1:
            raise CommandError("horizon, epochs, and batch must be positive")


def train_command_encoder(
    decoder: Cvae,
    pose_sampler,
    command_sampler=None,
    opts: CommandTrainOpts = CommandTrainOpts(),
    seed: int = 0,
):
    """Fit psi by gradient descent through the frozen decoder.

    pose_sampler(rng, n) -> (n,76) raw initial poses; command_sampler(rng, n)
    -> (n,3) commands (defaults to uniform over the valid ranges); a sampler
    taking (rng, n, poses) also receives the raw start poses of the batch.
    Returns (CommandEncoder, curves).
    """
    command_sampler = command_sampler or uniform_command_sampler
    cmd_params = len(inspect.signature(command_sampler).parameters)
    ss = np.random.SeedSequence(seed)
    rng_init, rng_train = (np.random.default_rng(s) for s in ss.spawn(2))

    dec_digest_before = params_digest(decoder.params())
    enc = CommandEncoder(latent=decoder.config.latent, rng=rng_init,
                         mean=decoder.mean, std=decoder.std)
    psi_keys = set(enc.psi.params())
    opt = Adam(enc.psi.params(), lr=opts.lr)

    # gradient of the velocity readout wrt the standardized pose
    vel_dims = np.array([0, 1, 5])  # v_x, v_y, w_z in the flat pose layout
    vel_scale = decoder.std[vel_dims]
    zdim = decoder.config.latent
    curves: list[dict] = []

    for epoch in range(opts.epochs):
        ep_loss = ep_track = 0.0
        for _ in range(opts.batches_per_epoch):
            B = opts.batch
            raw = pose_sampler(rng_train, B)
            cur = (raw - decoder.mean) / decoder.std
            cmd = command_sampler(rng_train, B, raw) if cmd_params >= 3 else command_sampler(rng_train, B)
            caches = []
            grads: dict[str, np.ndarray] = {}
            loss = track = 0.0
            for _t in range(opts.horizon):
                pc, dc = [], []
                z = enc.encode_std(cmd, cur, pc)
                nxt = decoder.decode_std(z, cur, dc)
                vel = nxt[:, vel_dims] * vel_scale + decoder.mean[vel_dims]
                err = vel - cmd
                loss += float(np.mean(np.sum(err**2, axis=1))) + opts.latent_reg * float(
                    np.mean(np.sum(z**2, axis=1))
                )
                track += float(np.mean(np.linalg.norm(err[:, :2], axis=1)))
                caches.append((pc, dc, z, err, cur))
                cur = nxt
            # reverse pass: carry dL/d(pose) through the rollout
            dcur = np.zeros_like(cur)
            for pc, dc, z, err, _cur_in in reversed(caches):
                dnxt = dcur.copy()
                dnxt[:, vel_dims] += 2.0 * err / B * vel_scale
                ddec_in = decoder.dec.backward(dc, dnxt, grads)
                dz = ddec_in[:, :zdim] + 2.0 * opts.latent_reg * z / B
                dpsi_in = enc.psi.backward(pc, dz, grads)
                # residual skip + decoder conditioning + psi conditioning
                dcur = dnxt + ddec_in[:, zdim:] + dpsi_in[:, 3:]
            opt.step({k: v for k, v in grads.items() if k in psi_keys})
            ep_loss += loss / opts.horizon
            ep_track += track / opts.horizon
        n = opts.batches_per_epoch
        curves.append({"epoch": epoch, "loss": ep_loss / n, "track_err": ep_track / n})

    if params_digest(decoder.params()) != dec_digest_before:
        raise CommandError("frozen decoder was mutated during command training")
    return enc, curves
