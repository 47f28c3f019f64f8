"""Minimal float64 MLP machinery: forward, hand-written backward, Adam, checkpoints.

Everything is numpy; gradients are exact reverse-mode through the fixed
layer structure.  Checkpoints are a single binary file with a JSON tensor
index and a trailing SHA-256 digest.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

CHECKPOINT_MAGIC = b"GMPC"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, truncated, or corrupted checkpoint file."""


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    return np.where(x > 0.0, 1.0, fx + 1.0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    return (x > 0.0).astype(float)


_ACTIVATIONS = {"elu": (elu, elu_grad), "relu": (relu, relu_grad)}


class Mlp:
    """Fully connected net; hidden activations are ELU or ReLU, head is linear."""

    def __init__(self, sizes, rng: np.random.Generator, name: str = "mlp",
                 activation: str = "elu", out_scale: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.name = name
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        last = len(sizes) - 2
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = np.sqrt(2.0 / n_in) * (out_scale if i == last else 1.0)
            self.weights.append(rng.normal(0.0, scale, (n_in, n_out)))
            self.biases.append(np.zeros(n_out))

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{self.name}.W{i}"] = W
            out[f"{self.name}.b{i}"] = b
        return out

    def load_params(self, tensors: dict[str, np.ndarray]) -> None:
        for i in range(len(self.weights)):
            W = tensors[f"{self.name}.W{i}"]
            b = tensors[f"{self.name}.b{i}"]
            if W.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise CheckpointError(f"tensor shape mismatch for {self.name} layer {i}")
            self.weights[i] = W.copy()
            self.biases[i] = b.copy()

    def forward(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"{self.name}: input dim {h.shape[1]} != {self.sizes[0]}")
        if cache is not None:
            cache.append(h)
        act = _ACTIVATIONS[self.activation][0]
        n_layers = len(self.weights)
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if i < n_layers - 1:
                h = act(z)
                if cache is not None:
                    cache.append((z, h))
            else:
                h = z
        if not np.isfinite(h).all():
            raise FloatingPointError(f"{self.name}: non-finite forward output")
        return h

    def backward(self, cache: list, dy: np.ndarray, grads: dict[str, np.ndarray]) -> np.ndarray:
        """Accumulate parameter grads for one forward cache; returns dL/dx."""
        dz = np.atleast_2d(dy)
        x0 = cache[0]
        act_grad = _ACTIVATIONS[self.activation][1]
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = x0 if i == 0 else cache[i][1]
            _accum(grads, f"{self.name}.W{i}", h_in.T @ dz)
            _accum(grads, f"{self.name}.b{i}", dz.sum(axis=0))
            dh = dz @ self.weights[i].T
            if i > 0:
                z_prev, h_prev = cache[i]
                dz = dh * act_grad(z_prev, h_prev)
            else:
                dz = dh
        return dz


def _accum(grads: dict[str, np.ndarray], key: str, value: np.ndarray) -> None:
    if key in grads:
        grads[key] += value
    else:
        grads[key] = value.copy()


def zero_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


class Adam:
    """Standard Adam over a named parameter dict; updates in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = zero_like_params(params)
        self.v = zero_like_params(params)
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            if not np.isfinite(g).all():
                raise FloatingPointError(f"non-finite gradient for {k}; step rejected")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def reparameterize(mu: np.ndarray, logvar: np.ndarray, rng: np.random.Generator):
    """Sample z = mu + sigma*eps with eps ~ N(0, I); returns (z, eps)."""
    eps = rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * logvar) * eps, eps


# ---------------------------------------------------------------------------
# checkpoint container


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 tensors plus JSON metadata; SHA-256 digest trailer."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8")  # tobytes() copies in C order
        blob = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    index = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode()
    body = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(index)) + index + b"".join(blobs)
    with open(path, "wb") as f:
        f.write(body)
        f.write(hashlib.sha256(body).digest())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; digest or structure problems raise CheckpointError."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(CHECKPOINT_MAGIC) + 8 + 32:
        raise CheckpointError(f"{path}: truncated checkpoint")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: digest mismatch, file is corrupted")
    if body[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, index_len = struct.unpack_from("<II", body, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    index_start = 12
    payload_start = index_start + index_len
    if payload_start > len(body):
        raise CheckpointError(f"{path}: index extends past end of file")
    try:
        index = json.loads(body[index_start:payload_start].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable tensor index: {e}") from None
    payload = body[payload_start:]
    tensors: dict[str, np.ndarray] = {}
    for entry in index["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} extends past end of payload")
        tensors[entry["name"]] = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
    return tensors, index.get("meta", {})
