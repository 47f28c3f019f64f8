"""Generative motion prior: a CVAE over consecutive pose pairs.

The encoder maps (next pose, current pose) to a 32-dim Gaussian; the decoder
reconstructs the next pose from (latent, current pose).  Poses are z-scored
with corpus statistics and the decoder predicts a residual on the current
pose, so an untrained model is close to the identity map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import POSE_DIM, RobotPose, poses_to_array
from .nn import Adam, Mlp, load_checkpoint, reparameterize, save_checkpoint

LATENT_DIM = 32


class CvaeError(ValueError):
    """Invalid CVAE configuration or training input."""


@dataclass(frozen=True)
class GaussianParams:
    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "logvar", np.asarray(self.logvar, dtype=float))
        if self.mu.shape != (LATENT_DIM,) or self.logvar.shape != (LATENT_DIM,):
            raise CvaeError(f"latent Gaussian must be {LATENT_DIM}-dim")
        if not (np.isfinite(self.mu).all() and np.isfinite(self.logvar).all()):
            raise CvaeError("non-finite Gaussian parameters")


@dataclass(frozen=True)
class CvaeConfig:
    hidden: tuple[int, ...] = (256, 256)
    latent: int = LATENT_DIM
    rec_weight: float = 1.0
    kl_weight: float = 1.0
    lr_start: float = 1e-5
    lr_end: float = 1e-7
    epochs: int = 240
    window: int = 8  # scheduled-sampling rollout length during training
    batch_windows: int = 16
    stride: int = 1
    val_fraction: float = 0.1
    ss_max: float = 0.5  # scheduled-sampling ceiling
    kl_anneal: bool = True  # ramp the KL weight 0 -> kl_weight across training
    kl_hold_frac: float = 0.25  # fraction of epochs with the KL pressure held at zero

    def __post_init__(self):
        if min(self.hidden) <= 0 or self.latent <= 0 or self.epochs <= 0 or self.window < 1:
            raise CvaeError("config sizes must be positive")
        if self.rec_weight < 0 or self.kl_weight < 0:
            raise CvaeError("loss weights must be non-negative")
        if not 0 < self.lr_end <= self.lr_start:
            raise CvaeError("lr schedule must decay: 0 < lr_end <= lr_start")
        if not 0.0 <= self.ss_max <= 1.0:
            raise CvaeError("ss_max must be within [0,1]")
        if not 0.0 <= self.kl_hold_frac < 1.0:
            raise CvaeError("kl_hold_frac must be within [0,1)")

    def lr_at(self, epoch: int) -> float:
        if self.epochs == 1:
            return self.lr_start
        frac = epoch / (self.epochs - 1)
        return self.lr_start * (self.lr_end / self.lr_start) ** frac

    def sampling_p(self, epoch: int) -> float:
        """Linear ramp to ss_max across the first half of training, then flat."""
        half = max(1, self.epochs // 2)
        return self.ss_max * min(1.0, epoch / half)

    def kl_weight_at(self, epoch: int) -> float:
        """KL weight schedule: held at zero early, then a linear ramp to full.

        The prior term can collapse the latent pathway long before it becomes
        load bearing, so the pressure is held off while the decoder learns to
        read z; the configured weight applies in full at the end of training.
        The hold length trades latent authority (longer) against prior-sample
        fidelity at generation time (shorter).
        """
        if not self.kl_anneal or self.epochs <= 1:
            return self.kl_weight
        hold = int(self.epochs * self.kl_hold_frac)
        if epoch < hold:
            return 0.0
        span = self.epochs - 1 - hold
        if span <= 0:
            return self.kl_weight
        return self.kl_weight * (epoch - hold) / span


class Cvae:
    """Encoder/decoder pair with stored feature standardization."""

    def __init__(self, config: CvaeConfig = CvaeConfig(), rng: np.random.Generator | None = None):
        rng = rng or np.random.default_rng(0)
        self.config = config
        d, z = POSE_DIM, config.latent
        self.enc = Mlp([2 * d, *config.hidden, 2 * z], rng, name="enc")
        # small head: an untrained decoder stays near the identity residual
        self.dec = Mlp([z + d, *config.hidden, d], rng, name="dec", out_scale=0.01)
        self.mean = np.zeros(d)
        self.std = np.ones(d)

    # -- standardization -----------------------------------------------------
    def set_norm(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.mean = np.asarray(mean, dtype=float).copy()
        self.std = np.maximum(np.asarray(std, dtype=float), 1e-6)

    def standardize(self, flat: np.ndarray) -> np.ndarray:
        return (flat - self.mean) / self.std

    def unstandardize(self, flat_std: np.ndarray) -> np.ndarray:
        return flat_std * self.std + self.mean

    # -- batched cores (standardized space) ----------------------------------
    def encode_std(self, next_std: np.ndarray, cur_std: np.ndarray, cache: list | None = None):
        out = self.enc.forward(np.concatenate([next_std, cur_std], axis=-1), cache)
        return out[:, : self.config.latent], out[:, self.config.latent :]

    def decode_std(self, z: np.ndarray, cur_std: np.ndarray, cache: list | None = None) -> np.ndarray:
        delta = self.dec.forward(np.concatenate([z, cur_std], axis=-1), cache)
        return cur_std + delta

    # -- public single-pose ops ----------------------------------------------
    def encode(self, m_next: RobotPose, m_cur: RobotPose) -> GaussianParams:
        nxt = self.standardize(m_next.flat())[None]
        cur = self.standardize(m_cur.flat())[None]
        mu, logvar = self.encode_std(nxt, cur)
        return GaussianParams(mu[0], logvar[0])

    def decode(self, z: np.ndarray, m_cur: RobotPose) -> RobotPose:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.config.latent,):
            raise CvaeError(f"latent must be {self.config.latent}-dim, got {z.shape}")
        cur = self.standardize(m_cur.flat())[None]
        out = self.decode_std(z[None], cur)[0]
        return RobotPose.from_flat(self.unstandardize(out))

    # -- persistence -----------------------------------------------------------
    def params(self) -> dict[str, np.ndarray]:
        return {**self.enc.params(), **self.dec.params()}

    def save(self, path, meta: dict | None = None) -> None:
        tensors = dict(self.params())
        tensors["norm.mean"] = self.mean
        tensors["norm.std"] = self.std
        full_meta = {
            "kind": "gmp-cvae",
            "hidden": list(self.config.hidden),
            "latent": self.config.latent,
            **(meta or {}),
        }
        save_checkpoint(path, tensors, full_meta)

    @classmethod
    def load(cls, path) -> "Cvae":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "gmp-cvae":
            raise CvaeError(f"{path}: not a motion-prior checkpoint (kind={meta.get('kind')!r})")
        config = CvaeConfig(hidden=tuple(meta["hidden"]), latent=int(meta["latent"]))
        model = cls(config, np.random.default_rng(0))
        model.enc.load_params(tensors)
        model.dec.load_params(tensors)
        model.set_norm(tensors["norm.mean"], tensors["norm.std"])
        return model


# ---------------------------------------------------------------------------
# losses


def rec_loss(m_hat, m_true) -> float:
    """Mean squared error, averaged over dimensions (and batch if present)."""
    a = m_hat.flat() if isinstance(m_hat, RobotPose) else np.asarray(m_hat, dtype=float)
    b = m_true.flat() if isinstance(m_true, RobotPose) else np.asarray(m_true, dtype=float)
    if a.shape != b.shape:
        raise CvaeError(f"reconstruction shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def kl_loss(params: GaussianParams) -> float:
    """KL(N(mu, sigma^2) || N(0, I)), summed over latent dimensions."""
    return float(_kl_batch(params.mu[None], params.logvar[None])[0])


def _kl_batch(mu: np.ndarray, logvar: np.ndarray) -> np.ndarray:
    return -0.5 * np.sum(1.0 + logvar - mu**2 - np.exp(logvar), axis=-1)


# ---------------------------------------------------------------------------
# training


def _as_sequences(dataset) -> list[np.ndarray]:
    seqs = []
    for item in dataset:
        arr = poses_to_array(item) if not isinstance(item, np.ndarray) else np.asarray(item, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != POSE_DIM:
            raise CvaeError(f"each sequence must be (T,{POSE_DIM})")
        seqs.append(arr)
    if not seqs:
        raise CvaeError("empty dataset")
    return seqs


def _window_stack(seqs: list[np.ndarray], window: int, stride: int) -> np.ndarray:
    """All (window+1)-frame slices, stacked (N, window+1, 76)."""
    out = []
    for arr in seqs:
        for start in range(0, len(arr) - window, stride):
            out.append(arr[start : start + window + 1])
    if not out:
        raise CvaeError("no training windows; sequences shorter than the window")
    return np.stack(out)


def train_cvae(dataset, config: CvaeConfig = CvaeConfig(), seed: int = 0):
    """Scheduled-sampling CVAE training; returns (model, loss curves).

    dataset: iterable of pose sequences (lists of RobotPose or (T,76) arrays).
    The returned model carries the best-validation parameters.
    """
    seqs = _as_sequences(dataset)
    n_frames = sum(map(len, seqs))
    if n_frames - len(seqs) < 1000:
        raise CvaeError(f"need at least 1000 training pairs, got {n_frames - len(seqs)}")
    ss = np.random.SeedSequence(seed)
    rng_init, rng_train = (np.random.default_rng(s) for s in ss.spawn(2))

    model = Cvae(config, rng_init)
    flat_all = np.concatenate(seqs)
    model.set_norm(flat_all.mean(axis=0), flat_all.std(axis=0))

    windows = _window_stack(seqs, config.window, config.stride)
    windows = (windows - model.mean) / model.std  # train in standardized space
    n_val = max(1, int(len(windows) * config.val_fraction))
    order = rng_train.permutation(len(windows))
    val_w, train_w = windows[order[:n_val]], windows[order[n_val:]]
    if len(train_w) == 0:
        raise CvaeError("dataset too small for the validation split")

    params = model.params()
    opt = Adam(params, lr=config.lr_start)
    K = config.window
    zdim = config.latent
    curves: list[dict] = []
    best_val = np.inf
    best_params = {k: v.copy() for k, v in params.items()}
    best_norm = (model.mean.copy(), model.std.copy())

    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        p_sub = config.sampling_p(epoch)
        kl_w = config.kl_weight_at(epoch)
        perm = rng_train.permutation(len(train_w))
        ep_rec = ep_kl = 0.0
        n_steps = 0
        for start in range(0, len(perm), config.batch_windows):
            batch = train_w[perm[start : start + config.batch_windows]]
            B = len(batch)
            grads: dict[str, np.ndarray] = {}
            prev_pred: np.ndarray | None = None
            batch_rec = batch_kl = 0.0
            try:
                for t in range(K):
                    cur = batch[:, t].copy()
                    if t > 0 and p_sub > 0.0:
                        # feed back own predictions (detached) where sampled
                        use_pred = rng_train.random(B) < p_sub
                        cur[use_pred] = prev_pred[use_pred]
                    nxt = batch[:, t + 1]
                    ec, dc = [], []
                    mu, logvar = model.encode_std(nxt, cur, ec)
                    z, eps = reparameterize(mu, logvar, rng_train)
                    pred = model.decode_std(z, cur, dc)
                    err = pred - nxt
                    batch_rec += float(np.mean(err**2))
                    batch_kl += float(np.mean(_kl_batch(mu, logvar)))
                    # reconstruction backward (through residual head)
                    dpred = config.rec_weight * 2.0 * err / (err.size * K)
                    ddec_in = model.dec.backward(dc, dpred, grads)
                    dz = ddec_in[:, :zdim]
                    # KL backward (annealed weight)
                    dmu = kl_w * mu / (B * K)
                    dlogvar = kl_w * 0.5 * (np.exp(logvar) - 1.0) / (B * K)
                    # reparameterization backward
                    dmu += dz
                    dlogvar += dz * eps * 0.5 * np.exp(0.5 * logvar)
                    model.enc.backward(ec, np.concatenate([dmu, dlogvar], axis=1), grads)
                    prev_pred = pred  # detached: no gradient through the feedback path
                opt.step(grads)
            except FloatingPointError as e:
                raise CvaeError(
                    f"training diverged at epoch {epoch} (lr {opt.lr:.3g}, "
                    f"batch rec {batch_rec:.4g}, kl {batch_kl:.4g}): {e}"
                ) from None
            ep_rec += batch_rec / K
            ep_kl += batch_kl / K
            n_steps += 1

        # deterministic validation: teacher forcing, z = posterior mean.
        # Selection uses the full configured weights (the end-of-schedule
        # objective) so the returned model reflects the stated loss, not a
        # transient of the anneal.
        val_rec, val_kl = _validate(model, val_w)
        val_total = config.rec_weight * val_rec + config.kl_weight * val_kl
        curves.append(
            {
                "epoch": epoch,
                "lr": opt.lr,
                "p_sample": p_sub,
                "kl_w": kl_w,
                "train_rec": ep_rec / n_steps,
                "train_kl": ep_kl / n_steps,
                "val_rec": val_rec,
                "val_kl": val_kl,
            }
        )
        if val_total < best_val:
            best_val = val_total
            best_params = {k: v.copy() for k, v in params.items()}
            best_norm = (model.mean.copy(), model.std.copy())

    model.enc.load_params(best_params)
    model.dec.load_params(best_params)
    model.set_norm(*best_norm)
    return model, curves


def _validate(model: Cvae, val_w: np.ndarray) -> tuple[float, float]:
    """One-step teacher-forced reconstruction with z = posterior mean."""
    cur = val_w[:, :-1].reshape(-1, POSE_DIM)
    nxt = val_w[:, 1:].reshape(-1, POSE_DIM)
    mu, logvar = model.encode_std(nxt, cur)
    pred = model.decode_std(mu, cur)
    rec = float(np.mean((pred - nxt) ** 2))
    kl = float(np.mean(_kl_batch(mu, logvar)))
    return rec, kl
