"""Full-graph training loop: hand-derived reverse pass, Adam, history.

The gradient path mirrors the forward exactly, with three deliberate
stop-gradients in the embedding-augmentation branch: the confidence weights,
the dimension-correlation matrix and the column mean are treated as constants
of the current step, so gradient reaches Z only through the residual
(Z - mean) factor and through Z's direct appearance in E = Z + eps * B.

Determinism contract: (seed, config, inputs) fixes every number. Dropout is
the only per-epoch randomness and is drawn from a generator keyed by
(seed, epoch); the sampled non-link estimator, when active, is keyed by
(seed, epoch, 7).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import confidence, losses, metrics
from .errors import ConfigError, InputError, NumericError
from .graphs import Graph, NodeMask, NormalizedAdjacency, spmm
from .losses import LossConfig, LossReport
from .model import (
    ARCH_GCN,
    ARCH_MLP,
    FEATURES_BINARY,
    ModelDims,
    ModelParams,
    decode_with_cache,
    encode_with_cache,
    init_params,
    make_dropout_scale,
)
from .optim import AdamState, adam_step, init_adam

PROFILE_CITATION = "citation"
PROFILE_LARGE = "large"

_PROFILE_DEFAULTS = {
    PROFILE_CITATION: dict(lr=1e-3, epochs=1000, dropout=0.8, arch=ARCH_MLP),
    PROFILE_LARGE: dict(lr=1e-2, epochs=400, dropout=0.2, arch=ARCH_GCN),
}


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 1000
    seed: int = 72
    dataset_profile: str = PROFILE_CITATION
    dropout: float = 0.8
    arch: str = ARCH_MLP
    hidden: int = 256
    latent: int = 256
    dec_hidden: int = 256
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.dataset_profile not in _PROFILE_DEFAULTS:
            raise ConfigError(f"unknown dataset profile {self.dataset_profile!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be 'float32' or 'float64'")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @classmethod
    def from_profile(cls, profile: str, **overrides) -> "TrainConfig":
        if profile not in _PROFILE_DEFAULTS:
            raise ConfigError(f"unknown dataset profile {profile!r}")
        kwargs = dict(_PROFILE_DEFAULTS[profile], dataset_profile=profile)
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class TrainingInputs:
    """Everything the loss needs, fixed for the whole run."""

    x_tilde: np.ndarray  # (N, F) model input, refined attributes
    graph: Graph
    a_hat: NormalizedAdjacency | None
    mask: NodeMask
    feature_kind: str = FEATURES_BINARY
    conf_w: confidence.ConfidenceWeights | None = None
    epsilon: float = 0.01
    x0_known: np.ndarray | None = None  # originals, for recon_target="original"

    def recon_target(self, cfg: LossConfig) -> np.ndarray:
        if cfg.recon_target == "original":
            if self.x0_known is None:
                raise InputError("recon_target='original' needs x0_known")
            return self.x0_known
        return self.x_tilde[self.mask.known_idx]


@dataclass
class TrainResult:
    params: ModelParams
    history: list
    val_recall: list
    z: np.ndarray
    x_hat: np.ndarray


def _augment_forward(z, inputs: TrainingInputs):
    """E = Z + eps * (w * (Z - mean)) @ C with w, C, mean frozen constants."""
    if inputs.conf_w is None or inputs.epsilon == 0.0:
        return z, None
    corr = confidence.correlation_matrix(z)
    b = confidence.compute_correction(z, inputs.conf_w, corr)
    e = z + inputs.epsilon * b
    return e, corr


def forward_backward(params: ModelParams, inputs: TrainingInputs,
                     loss_cfg: LossConfig, drop_scale=None, nlsc_rng=None,
                     want_grads=True):
    """One loss evaluation, optionally with gradients for all four weights.

    Returns (LossReport, grads-or-None, aux) where aux carries z, x_hat and e.
    Loss terms with zero weight are skipped and reported as 0.
    """
    known = inputs.mask.known_idx
    if known.size == 0:
        raise InputError("training needs at least one known node")
    z, enc_cache = encode_with_cache(inputs.x_tilde, inputs.a_hat, params,
                                     drop_scale=drop_scale)
    e, corr = _augment_forward(z, inputs)
    x_hat, dec_cache = decode_with_cache(z, params, inputs.feature_kind)

    target = inputs.recon_target(loss_cfg)
    k = known.size
    diff = x_hat[known].astype(np.float64) - target.astype(np.float64)
    recon = float((diff * diff).sum() / k)

    need_pairs = loss_cfg.lambda1 != 0.0 or loss_cfg.lambda2 != 0.0
    nhs = nlsc = nhs_score = nlsc_score = 0.0
    grad_ehat = None
    e_hat = norms = None
    if need_pairs:
        e_hat, norms = losses.normalize_rows(e)
        if loss_cfg.lambda1 != 0.0:
            nhs, nhs_score, g1 = losses.nhs_terms(
                e_hat, inputs.graph.edge_array, loss_cfg.sign_mode,
                want_grad=want_grads)
            if want_grads:
                grad_ehat = loss_cfg.lambda1 * g1
        if loss_cfg.lambda2 != 0.0:
            nlsc, nlsc_score, g2 = losses.nlsc_terms(
                e_hat, inputs.graph, loss_cfg, rng=nlsc_rng,
                want_grad=want_grads)
            if want_grads:
                g2 = loss_cfg.lambda2 * g2
                grad_ehat = g2 if grad_ehat is None else grad_ehat + g2

    total = losses.total_loss(recon, nhs, nlsc, loss_cfg)
    report = LossReport(recon=recon, nhs=nhs, nlsc=nlsc, total=total,
                        nhs_score=nhs_score, nlsc_score=nlsc_score)
    aux = {"z": z, "x_hat": x_hat, "e": e}
    if not want_grads:
        return report, None, aux

    dtype = params.enc_w0.dtype
    # reconstruction head
    d_xhat = np.zeros_like(x_hat)
    d_xhat[known] = ((2.0 / k) * diff).astype(dtype)
    if inputs.feature_kind == FEATURES_BINARY:
        d_out_pre = d_xhat * x_hat * (1.0 - x_hat)
    else:
        d_out_pre = d_xhat
    g_hidden = dec_cache["g"]
    d_dec_w1 = g_hidden.T @ d_out_pre
    d_g = d_out_pre @ params.dec_w1.T
    d_g_pre = d_g * (dec_cache["g_pre"] > 0)
    d_dec_w0 = z.T @ d_g_pre
    d_z = d_g_pre @ params.dec_w0.T

    # pair losses flow into Z through the augmented embedding
    if grad_ehat is not None:
        # undo row normalization: e_hat = e / |e|, zero rows stay zero
        dot = np.einsum("ij,ij->i", grad_ehat, e_hat)
        safe = np.where(norms > 0, norms, 1.0).astype(dtype)
        d_e = (grad_ehat - dot[:, None] * e_hat) / safe[:, None]
        d_e[norms == 0] = 0.0
        if corr is not None:
            w_col = inputs.conf_w.w.astype(dtype)[:, None]
            d_z += d_e + inputs.epsilon * (w_col * (d_e @ corr.c.T))
        else:
            d_z += d_e

    d_z_pre = d_z * z * (1.0 - z)
    use_adj = params.arch == ARCH_GCN
    if use_adj:
        d_u = spmm(inputs.a_hat, d_z_pre)  # A_hat is symmetric
    else:
        d_u = d_z_pre
    h = enc_cache["h"]
    d_enc_w1 = h.T @ d_u
    d_h = d_u @ params.enc_w1.T
    if enc_cache["drop_scale"] is not None:
        d_h = d_h * enc_cache["drop_scale"]
    d_h_pre = d_h * (enc_cache["h_pre"] > 0)
    if use_adj:
        d_v = spmm(inputs.a_hat, d_h_pre)
    else:
        d_v = d_h_pre
    d_enc_w0 = inputs.x_tilde.T @ d_v

    grads = {
        "enc_w0": d_enc_w0,
        "enc_w1": d_enc_w1,
        "dec_w0": d_dec_w0,
        "dec_w1": d_dec_w1,
    }
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in tensor {name}")
    return report, grads, aux


def compute_gradients(params: ModelParams, inputs: TrainingInputs,
                      loss_cfg: LossConfig, drop_scale=None, nlsc_rng=None):
    """Gradients of the total loss w.r.t. every weight tensor."""
    _, grads, _ = forward_backward(params, inputs, loss_cfg,
                                   drop_scale=drop_scale, nlsc_rng=nlsc_rng)
    return grads


def forward_loss(params: ModelParams, inputs: TrainingInputs,
                 loss_cfg: LossConfig, drop_scale=None, nlsc_rng=None) -> LossReport:
    """Loss only; the finite-difference oracle evaluates this."""
    report, _, _ = forward_backward(params, inputs, loss_cfg,
                                    drop_scale=drop_scale, nlsc_rng=nlsc_rng,
                                    want_grads=False)
    return report


def train(inputs: TrainingInputs, cfg: TrainConfig, loss_cfg: LossConfig,
          val_idx=None, x_val_true=None) -> TrainResult:
    """Run the full training loop and return final-epoch everything.

    Final-epoch parameters are kept (no early stopping); when a validation
    split and its true attributes are supplied, recall@10 on it is recorded
    per epoch as a diagnostic only.
    """
    dtype = cfg.np_dtype
    x_tilde = np.ascontiguousarray(inputs.x_tilde, dtype=dtype)
    inputs = replace(inputs, x_tilde=x_tilde)
    n, f = x_tilde.shape
    dims = ModelDims(in_dim=f, hidden=cfg.hidden, latent=cfg.latent,
                     dec_hidden=cfg.dec_hidden)
    params = init_params(cfg.seed, dims, cfg.arch, cfg.dropout, dtype=dtype)
    tensors = params.tensors()
    adam = init_adam(tensors)
    history = []
    val_recall = []
    hidden_shape = (n, cfg.hidden)
    for epoch in range(1, cfg.epochs + 1):
        drop_scale = None
        if cfg.dropout > 0.0:
            rng = np.random.default_rng([cfg.seed, epoch])
            drop_scale = make_dropout_scale(hidden_shape, cfg.dropout, rng, dtype)
        nlsc_rng = np.random.default_rng([cfg.seed, epoch, 7])
        try:
            report, grads, aux = forward_backward(
                params, inputs, loss_cfg, drop_scale=drop_scale,
                nlsc_rng=nlsc_rng)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc
        adam_step(tensors, grads, adam, cfg.lr)
        history.append(report)
        if val_idx is not None and x_val_true is not None and len(val_idx):
            val_recall.append(metrics.mean_recall_at_k(
                aux["x_hat"][val_idx], x_val_true, 10))
        else:
            val_recall.append(float("nan"))
    report, _, aux = forward_backward(params, inputs, loss_cfg,
                                      want_grads=False)
    return TrainResult(params=params, history=history, val_recall=val_recall,
                       z=aux["z"], x_hat=aux["x_hat"])
