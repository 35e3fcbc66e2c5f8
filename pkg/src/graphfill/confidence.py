"""Topology-derived confidence weighting of the embedding space.

Each node gets a scalar confidence weight from its position relative to the
known/unknown partition: unknown nodes decay geometrically with their hop
distance to the nearest known node, known nodes gain weight with the number
of unknown neighbors they feed. The weights, together with a correlation
matrix over embedding dimensions, produce a corrective term that is blended
into the embedding as E = Z + epsilon * B. E only ever feeds the auxiliary
losses; the decoder always consumes Z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .graphs import UNREACHABLE, Graph, NodeMask, multi_source_bfs


@dataclass(frozen=True)
class TopoPosition:
    """Per-node topological position relative to the known set.

    hops_to_known is 0 on known nodes and UNREACHABLE where no known node can
    be reached; unknown_neighbors is 0 on unknown nodes.
    """

    hops_to_known: np.ndarray  # (N,) int64
    unknown_neighbors: np.ndarray  # (N,) int64


@dataclass(frozen=True)
class ConfidenceWeights:
    w: np.ndarray  # (N,) float64, in [0, 2)
    gamma_decay: float


@dataclass(frozen=True)
class EmbeddingCorrelation:
    c: np.ndarray  # (D, D) float, symmetric, zero diagonal


@dataclass(frozen=True)
class AugmentedEmbedding:
    e: np.ndarray  # (N, D)
    epsilon: float


def topo_position(g: Graph, mask: NodeMask) -> TopoPosition:
    """One multi-source BFS from the known set plus a neighbor scan."""
    if mask.n_known == 0:
        raise InputError("topo_position needs at least one known node")
    hops = multi_source_bfs(g, mask.known_idx)
    rows = np.repeat(np.arange(g.n_nodes), g.degrees)
    unknown_flag = (~mask.known).astype(np.float64)
    counts = np.bincount(rows, weights=unknown_flag[g.indices], minlength=g.n_nodes)
    counts = counts.astype(np.int64)
    counts[~mask.known] = 0
    return TopoPosition(hops_to_known=hops, unknown_neighbors=counts)


def confidence_weights(tp: TopoPosition, gamma_decay: float) -> ConfidenceWeights:
    """w = gamma^hops for unknown nodes, 2 - gamma^unknown_neighbors for known.

    Unreachable unknown nodes get weight 0, the gamma^inf limit.
    """
    if not 0.0 < gamma_decay < 1.0:
        raise ConfigError("gamma_decay must lie strictly inside (0, 1)")
    hops = tp.hops_to_known
    w = np.empty(hops.shape[0], dtype=np.float64)
    known = hops == 0
    w[known] = 2.0 - gamma_decay ** tp.unknown_neighbors[known]
    reachable = ~known & (hops != UNREACHABLE)
    w[reachable] = gamma_decay ** hops[reachable].astype(np.float64)
    w[hops == UNREACHABLE] = 0.0
    return ConfidenceWeights(w=w, gamma_decay=gamma_decay)


def correlation_matrix(z) -> EmbeddingCorrelation:
    """Pearson correlation between embedding dimensions, across nodes.

    The diagonal is forced to zero and any zero-variance dimension yields a
    zero row/column. Output is exactly symmetric with entries in [-1, 1].
    """
    z = np.asarray(z)
    if z.ndim != 2 or z.shape[0] < 2:
        raise InputError("correlation_matrix needs an (N >= 2, D) matrix")
    zc = z - z.mean(axis=0)
    cov = zc.T @ zc
    sd = np.sqrt(np.diag(cov).copy())
    denom = np.outer(sd, sd)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(denom > 0, cov / np.where(denom > 0, denom, 1.0), 0.0)
    c = np.clip(c, -1.0, 1.0)
    c = (c + c.T) / 2
    np.fill_diagonal(c, 0.0)
    return EmbeddingCorrelation(c=c.astype(z.dtype, copy=False))


def augment_embedding(z, w: ConfidenceWeights, c: EmbeddingCorrelation,
                      epsilon: float) -> AugmentedEmbedding:
    """Blend the confidence-weighted corrective term: E = Z + epsilon * B.

    B = (w per-node, broadcast over dimensions) * (Z - column mean) @ C.
    With epsilon = 0 the result is Z exactly.
    """
    z = np.asarray(z)
    n, d = z.shape
    if w.w.shape[0] != n:
        raise InputError(f"weights cover {w.w.shape[0]} nodes, embedding has {n}")
    if c.c.shape != (d, d):
        raise InputError(f"correlation is {c.c.shape}, embedding dimension is {d}")
    if epsilon == 0.0:
        return AugmentedEmbedding(e=z.copy(), epsilon=0.0)
    b = compute_correction(z, w, c)
    return AugmentedEmbedding(e=z + epsilon * b, epsilon=float(epsilon))


def compute_correction(z, w: ConfidenceWeights, c: EmbeddingCorrelation) -> np.ndarray:
    """The corrective term B; split out because the trainer needs it raw."""
    zc = z - z.mean(axis=0)
    return (w.w.astype(z.dtype)[:, None] * zc) @ c.c
