"""Training objective: reconstruction plus two topology-aligned penalties.

* recon  -- mean over known rows of the squared reconstruction error.
* nhs    -- neighborhood homogeneity score term over linked pairs. The score
  itself is sum(sigmoid(sim)) over edges; the loss in its default
  "intent-consistent" form is sum(softplus(-sim)), which falls as connected
  embeddings align. The "as-written" form is its exact negation, kept behind
  a flag for fidelity experiments.
* nlsc   -- non-link similarity calibration over non-adjacent pairs whose
  cosine similarity clears the threshold tau; pairs below tau contribute
  exactly zero. Intent-consistent form sums softplus(+sim) (pushes spurious
  similarity down); as-written sums softplus(-sim).

total = recon + lambda1 * nhs + lambda2 * nlsc.

The sign-mode choice is consequential enough that runs echo it in every
report. Non-adjacent pairs are enumerated exactly up to 5000 nodes and
estimated from a uniform sample (scaled to the full pair count) above that.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, InputError, NumericError
from .graphs import Graph

SIGN_INTENT = "intent-consistent"
SIGN_AS_WRITTEN = "as-written"

NLSC_AUTO = "auto"
NLSC_EXACT = "exact"
NLSC_SAMPLED = "sampled"

_EXACT_MAX_NODES = 5000


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 0.1
    lambda2: float = 0.1
    tau: float = 0.2
    sign_mode: str = SIGN_INTENT
    nlsc_mode: str = NLSC_AUTO
    nlsc_sample_count: int = 100_000
    recon_target: str = "refined"  # "refined" | "original"

    def __post_init__(self):
        if not -1.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [-1, 1]")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.sign_mode not in (SIGN_INTENT, SIGN_AS_WRITTEN):
            raise ConfigError(f"unknown sign_mode {self.sign_mode!r}")
        if self.nlsc_mode not in (NLSC_AUTO, NLSC_EXACT, NLSC_SAMPLED):
            raise ConfigError(f"unknown nlsc_mode {self.nlsc_mode!r}")
        if self.nlsc_sample_count <= 0:
            raise ConfigError("nlsc_sample_count must be positive")
        if self.recon_target not in ("refined", "original"):
            raise ConfigError(f"unknown recon_target {self.recon_target!r}")


@dataclass(frozen=True)
class LossReport:
    recon: float
    nhs: float
    nlsc: float
    total: float
    nhs_score: float
    nlsc_score: float


def recon_loss(target_known, x_hat_known) -> float:
    """Mean over known rows of the summed squared per-feature differences."""
    target_known = np.asarray(target_known)
    x_hat_known = np.asarray(x_hat_known)
    if target_known.shape != x_hat_known.shape:
        raise InputError(
            f"shape mismatch {target_known.shape} vs {x_hat_known.shape}"
        )
    k = target_known.shape[0]
    if k == 0:
        raise InputError("reconstruction loss needs at least one known row")
    diff = (target_known - x_hat_known).astype(np.float64)
    return float((diff * diff).sum() / k)


def cosine_similarity(a, b) -> float:
    """a.b / (|a||b|); zero-norm vectors are defined to have similarity 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def normalize_rows(e):
    """Unit-normalize rows; zero rows stay zero. Returns (e_hat, norms)."""
    e = np.asarray(e)
    norms = np.linalg.norm(e, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return e / safe[:, None], norms


def _embedding_matrix(e):
    return np.asarray(getattr(e, "e", e))


def nhs_terms(e_hat, edges, sign_mode, want_grad=False):
    """Loss/score over linked pairs given pre-normalized embeddings.

    Returns (loss, score, d_loss/d_e_hat or None). Each undirected edge
    counts once.
    """
    if edges.shape[0] == 0:
        grad = np.zeros_like(e_hat) if want_grad else None
        return 0.0, 0.0, grad
    ei, ej = edges[:, 0], edges[:, 1]
    s = np.einsum("ij,ij->i", e_hat[ei], e_hat[ej]).astype(np.float64)
    base = np.log1p(np.exp(-s))
    score = float((1.0 / (1.0 + np.exp(-s))).sum())
    sign = 1.0 if sign_mode == SIGN_INTENT else -1.0
    loss = sign * float(base.sum())
    grad = None
    if want_grad:
        dl_ds = (sign * (1.0 / (1.0 + np.exp(-s)) - 1.0)).astype(e_hat.dtype)
        grad = np.zeros_like(e_hat)
        np.add.at(grad, ei, dl_ds[:, None] * e_hat[ej])
        np.add.at(grad, ej, dl_ds[:, None] * e_hat[ei])
    return loss, score, grad


def nhs_loss(e, g: Graph, cfg: LossConfig):
    """Linked-pair loss and score (sum of sigmoid similarities over edges)."""
    e_mat = _embedding_matrix(e)
    if g.n_edges == 0:
        warnings.warn("graph has no edges; nhs term is 0", stacklevel=2)
        return 0.0, 0.0
    e_hat, _ = normalize_rows(e_mat)
    loss, score, _ = nhs_terms(e_hat, g.edge_array, cfg.sign_mode)
    return loss, score


def nonedge_pair_count(g: Graph) -> int:
    return g.n_nodes * (g.n_nodes - 1) // 2 - g.n_edges


def _sample_nonedges(g: Graph, count, rng):
    """Uniform sample (with replacement) of non-adjacent unordered pairs."""
    n = g.n_nodes
    enc_edges = np.sort(g.edge_array[:, 0].astype(np.int64) * n + g.edge_array[:, 1])
    out_i = np.empty(count, dtype=np.int64)
    out_j = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        m = (count - filled) * 2 + 16
        a = rng.integers(0, n, size=m)
        b = rng.integers(0, n, size=m)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        enc = lo * n + hi
        pos = np.searchsorted(enc_edges, enc)
        pos_c = np.minimum(pos, enc_edges.shape[0] - 1) if enc_edges.size else pos
        is_edge = enc_edges.size > 0
        hit = (enc_edges[pos_c] == enc) if is_edge else np.zeros(m, dtype=bool)
        ok = (lo != hi) & ~hit
        take = min(int(ok.sum()), count - filled)
        out_i[filled:filled + take] = lo[ok][:take]
        out_j[filled:filled + take] = hi[ok][:take]
        filled += take
    return out_i, out_j


def nlsc_terms(e_hat, g: Graph, cfg: LossConfig, rng=None, want_grad=False):
    """Loss/score over gated non-adjacent pairs given normalized embeddings.

    Exact mode scans every pair once through the fused kernel; sampled mode
    scales a uniform with-replacement sample up to the full non-edge count.
    Returns (loss, score, d_loss/d_e_hat or None).
    """
    n = g.n_nodes
    total = nonedge_pair_count(g)
    if total == 0:
        grad = np.zeros_like(e_hat) if want_grad else None
        return 0.0, 0.0, grad
    mode = cfg.nlsc_mode
    if mode == NLSC_AUTO:
        mode = NLSC_EXACT if n <= _EXACT_MAX_NODES else NLSC_SAMPLED
    intent = cfg.sign_mode == SIGN_INTENT
    if mode == NLSC_EXACT:
        sim = e_hat @ e_hat.T
        if not sim.flags.c_contiguous:
            sim = np.ascontiguousarray(sim)
        grad_s = np.zeros((n, n), dtype=e_hat.dtype) if want_grad else None
        loss, score, _ = _kernels.nonedge_scan(
            sim, g.indptr, g.indices, cfg.tau, intent, grad_s
        )
        grad = grad_s @ e_hat if want_grad else None
        return loss, score, grad
    if rng is None:
        raise InputError("sampled non-link mode needs an rng")
    count = min(cfg.nlsc_sample_count, total * 4)
    pi, pj = _sample_nonedges(g, count, rng)
    s = np.einsum("ij,ij->i", e_hat[pi], e_hat[pj]).astype(np.float64)
    gated = s >= cfg.tau
    sg = s[gated]
    sig = 1.0 / (1.0 + np.exp(-sg))
    scale = total / count
    if intent:
        loss = float(np.log1p(np.exp(sg)).sum()) * scale
        dl_ds = sig
    else:
        loss = float(np.log1p(np.exp(-sg)).sum()) * scale
        dl_ds = sig - 1.0
    score = float(sig.sum()) * scale
    grad = None
    if want_grad:
        grad = np.zeros_like(e_hat)
        gi, gj = pi[gated], pj[gated]
        gfac = (dl_ds * scale).astype(e_hat.dtype)
        np.add.at(grad, gi, gfac[:, None] * e_hat[gj])
        np.add.at(grad, gj, gfac[:, None] * e_hat[gi])
    return loss, score, grad


def nlsc_loss(e, g: Graph, cfg: LossConfig, rng=None):
    """Non-link calibration loss and score (sum of gated sigmoid sims)."""
    e_mat = _embedding_matrix(e)
    e_hat, _ = normalize_rows(e_mat)
    loss, score, _ = nlsc_terms(e_hat, g, cfg, rng=rng)
    return loss, score


def total_loss(recon, nhs, nlsc, cfg: LossConfig) -> float:
    for name, value in (("recon", recon), ("nhs", nhs), ("nlsc", nlsc)):
        if not np.isfinite(value):
            raise NumericError(f"loss component {name} is not finite: {value}")
    return float(recon + cfg.lambda1 * nhs + cfg.lambda2 * nlsc)
