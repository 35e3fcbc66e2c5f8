"""Encoder/decoder forward passes, parameter init, checkpoint I/O.

Two architectures share the same parameter layout (four bias-free weight
matrices):

* ``"gcn2-mlp2"``: Z = sigmoid(A_hat @ relu(A_hat @ X W_e0) W_e1), suited to
  the larger datasets.
* ``"mlp1-mlp1"``: Z = sigmoid(relu(X W_e0) W_e1), no adjacency factors.

The decoder is a 2-layer MLP in both cases: X_hat = head(relu(Z W_d0) W_d1),
with a sigmoid head for binary features and an identity head for continuous
ones. Dropout (inverted scaling) hits only the encoder's hidden activation
and only in training mode, so eval outputs need no rescale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .graphs import NormalizedAdjacency, spmm

ARCH_GCN = "gcn2-mlp2"
ARCH_MLP = "mlp1-mlp1"

FEATURES_BINARY = "binary"
FEATURES_CONTINUOUS = "continuous"

_TENSOR_ORDER = ("enc_w0", "enc_w1", "dec_w0", "dec_w1")


@dataclass(frozen=True)
class ModelDims:
    in_dim: int
    hidden: int = 256
    latent: int = 256
    dec_hidden: int = 256


@dataclass
class ModelParams:
    enc_w0: np.ndarray  # (F, H)
    enc_w1: np.ndarray  # (H, D)
    dec_w0: np.ndarray  # (D, H')
    dec_w1: np.ndarray  # (H', F)
    arch: str
    dropout_rate: float

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _TENSOR_ORDER}

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            in_dim=self.enc_w0.shape[0],
            hidden=self.enc_w0.shape[1],
            latent=self.enc_w1.shape[1],
            dec_hidden=self.dec_w0.shape[1],
        )


def _glorot(rng, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def init_params(seed: int, dims: ModelDims, arch: str, dropout_rate: float = 0.0,
                dtype=np.float32) -> ModelParams:
    """Glorot-uniform weights, bit-reproducible for a given seed."""
    if arch not in (ARCH_GCN, ARCH_MLP):
        raise ConfigError(f"unknown architecture {arch!r}")
    if min(dims.in_dim, dims.hidden, dims.latent, dims.dec_hidden) <= 0:
        raise ConfigError(f"all model dimensions must be positive, got {dims}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ConfigError("dropout_rate must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    return ModelParams(
        enc_w0=_glorot(rng, dims.in_dim, dims.hidden, dtype),
        enc_w1=_glorot(rng, dims.hidden, dims.latent, dtype),
        dec_w0=_glorot(rng, dims.latent, dims.dec_hidden, dtype),
        dec_w1=_glorot(rng, dims.dec_hidden, dims.in_dim, dtype),
        arch=arch,
        dropout_rate=float(dropout_rate),
    )


def _sigmoid(x):
    out = np.empty_like(x)
    np.negative(x, out=out)
    np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def make_dropout_scale(shape, rate: float, rng, dtype) -> np.ndarray:
    """Inverted-dropout multiplier: keep-mask already divided by keep prob."""
    keep = 1.0 - rate
    return ((rng.random(shape) < keep) / keep).astype(dtype)


def encode_with_cache(x_tilde, a_hat, p: ModelParams, drop_scale=None):
    """Encoder forward pass; returns (z, cache) with everything backward needs.

    drop_scale, when given, is a precomputed inverted-dropout multiplier for
    the hidden activation (training mode); None means eval mode.
    """
    x_tilde = np.asarray(x_tilde)
    if x_tilde.shape[1] != p.enc_w0.shape[0]:
        raise InputError(
            f"input has {x_tilde.shape[1]} features, encoder expects {p.enc_w0.shape[0]}"
        )
    use_adj = p.arch == ARCH_GCN
    if use_adj and a_hat is None:
        raise InputError("gcn architecture needs the normalized adjacency")
    h_pre = x_tilde @ p.enc_w0
    if use_adj:
        h_pre = spmm(a_hat, h_pre)
    h = np.maximum(h_pre, 0.0)
    if drop_scale is not None:
        h = h * drop_scale
    z_pre = h @ p.enc_w1
    if use_adj:
        z_pre = spmm(a_hat, z_pre)
    z = _sigmoid(z_pre)
    cache = {"h_pre": h_pre, "h": h, "drop_scale": drop_scale, "z": z}
    return z, cache


def encode(x_tilde, a_hat, p: ModelParams, train_mode=False, rng=None) -> np.ndarray:
    """Latent embedding Z; deterministic in eval mode."""
    drop_scale = None
    if train_mode and p.dropout_rate > 0.0:
        if rng is None:
            raise InputError("training-mode encode with dropout needs an rng")
        x_arr = np.asarray(x_tilde)
        hidden_shape = (x_arr.shape[0], p.enc_w0.shape[1])
        drop_scale = make_dropout_scale(hidden_shape, p.dropout_rate, rng, x_arr.dtype)
    z, _ = encode_with_cache(x_tilde, a_hat, p, drop_scale=drop_scale)
    return z


def decode_with_cache(z, p: ModelParams, feature_kind=FEATURES_BINARY):
    z = np.asarray(z)
    if z.shape[1] != p.dec_w0.shape[0]:
        raise InputError(
            f"embedding has {z.shape[1]} dims, decoder expects {p.dec_w0.shape[0]}"
        )
    if feature_kind not in (FEATURES_BINARY, FEATURES_CONTINUOUS):
        raise InputError(f"unknown feature kind {feature_kind!r}")
    g_pre = z @ p.dec_w0
    g = np.maximum(g_pre, 0.0)
    out_pre = g @ p.dec_w1
    x_hat = _sigmoid(out_pre) if feature_kind == FEATURES_BINARY else out_pre
    cache = {"g_pre": g_pre, "g": g, "x_hat": x_hat}
    return x_hat, cache


def decode(z, p: ModelParams, feature_kind=FEATURES_BINARY) -> np.ndarray:
    """Reconstructed attributes X_hat; in (0, 1) for the binary head."""
    x_hat, _ = decode_with_cache(z, p, feature_kind)
    return x_hat


# --- checkpoint file: one JSON header line, then float32 little-endian payload


def save_checkpoint(p: ModelParams, path):
    header = {
        "format": "gfck1",
        "arch": p.arch,
        "dropout_rate": p.dropout_rate,
        "tensors": [[name, list(getattr(p, name).shape)] for name in _TENSOR_ORDER],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for name in _TENSOR_ORDER:
            arr = np.ascontiguousarray(getattr(p, name), dtype="<f4")
            fh.write(arr.tobytes())


def load_checkpoint(path) -> ModelParams:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"unreadable checkpoint header: {exc}") from exc
        if header.get("format") != "gfck1":
            raise FormatError("not a checkpoint file (bad format tag)")
        tensors = {}
        for name, shape in header["tensors"]:
            count = int(np.prod(shape))
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise FormatError(
                    f"checkpoint truncated in tensor {name}: "
                    f"expected {count * 4} bytes, got {len(raw)}"
                )
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        if fh.read(1):
            raise FormatError("trailing bytes after checkpoint payload")
    missing = [n for n in _TENSOR_ORDER if n not in tensors]
    if missing:
        raise FormatError(f"checkpoint misses tensors {missing}")
    return ModelParams(
        enc_w0=tensors["enc_w0"],
        enc_w1=tensors["enc_w1"],
        dec_w0=tensors["dec_w0"],
        dec_w1=tensors["dec_w1"],
        arch=header["arch"],
        dropout_rate=float(header["dropout_rate"]),
    )
