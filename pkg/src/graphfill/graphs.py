"""Sparse graph core: CSR adjacency, symmetric normalization, multi-source BFS.

Graphs are undirected, unweighted, without self-loops. Adjacency is stored
once in CSR form with both directions present and columns sorted per row;
the known/unknown sub-blocks are never materialized, callers mask rows of
full products instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import InputError

UNREACHABLE = -1  # BFS sentinel standing in for an infinite hop count


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph in CSR form.

    indptr/indices hold the symmetric adjacency structure (each undirected
    edge is stored in both directions), n_edges counts undirected edges.
    """

    n_nodes: int
    indptr: np.ndarray  # (n_nodes+1,) int64
    indices: np.ndarray  # (2*n_edges,) int32, sorted within each row
    n_edges: int

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (n_edges, 2) array with u < v."""
        rows = np.repeat(np.arange(self.n_nodes), self.degrees)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


@dataclass(frozen=True)
class NormalizedAdjacency:
    """Symmetrically normalized adjacency: value(i,j) = 1/sqrt(deg_i * deg_j).

    Shares the CSR structure of the graph it was built from. The associated
    Laplacian I - A_hat is implied, never materialized. Rows of isolated
    nodes are empty.
    """

    n_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray  # (nnz,) float64


@dataclass(frozen=True)
class NodeMask:
    """Partition of nodes into attribute-known and attribute-unknown sets."""

    known: np.ndarray  # (n_nodes,) bool

    @cached_property
    def known_idx(self) -> np.ndarray:
        return np.flatnonzero(self.known)

    @cached_property
    def unknown_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.known)

    @property
    def n_known(self) -> int:
        return int(self.known.sum())

    @property
    def n_unknown(self) -> int:
        return self.known.shape[0] - self.n_known


def build_graph(edge_list, n_nodes: int) -> Graph:
    """Build a Graph from an edge list, dropping self-loops and duplicates.

    Endpoints must lie in [0, n_nodes). The input may contain either or both
    directions of an edge; the result is symmetric either way.
    """
    if n_nodes <= 0:
        raise InputError("graph needs at least one node")
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n_nodes):
        raise InputError(
            f"edge endpoint out of range for n_nodes={n_nodes}: "
            f"min={edges.min()}, max={edges.max()}"
        )
    edges = edges[edges[:, 0] != edges[:, 1]]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    und = np.unique(np.stack([lo, hi], axis=1), axis=0) if lo.size else np.empty((0, 2), np.int64)
    # store both directions, sort by (row, col) to get CSR with sorted columns
    rows = np.concatenate([und[:, 0], und[:, 1]])
    cols = np.concatenate([und[:, 1], und[:, 0]])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_nodes), out=indptr[1:])
    return Graph(
        n_nodes=n_nodes,
        indptr=indptr,
        indices=cols.astype(np.int32),
        n_edges=int(und.shape[0]),
    )


def sym_normalize(g: Graph) -> NormalizedAdjacency:
    """Scale each stored entry (i, j) by 1/sqrt(deg_i * deg_j).

    Degree-0 nodes simply keep their empty row; no renormalization happens.
    """
    deg = g.degrees.astype(np.float64)
    rows = np.repeat(np.arange(g.n_nodes), g.degrees)
    values = 1.0 / np.sqrt(deg[rows] * deg[g.indices])
    return NormalizedAdjacency(
        n_nodes=g.n_nodes, indptr=g.indptr, indices=g.indices, values=values
    )


def multi_source_bfs(g: Graph, sources) -> np.ndarray:
    """Hop distance from the nearest source, UNREACHABLE where no path exists.

    Level-synchronous frontier expansion; distance 0 exactly on the sources.
    """
    src = np.unique(np.asarray(sources, dtype=np.int64))
    if src.size == 0:
        raise InputError("multi_source_bfs needs at least one source node")
    if src.min() < 0 or src.max() >= g.n_nodes:
        raise InputError("source node id out of range")
    dist = np.full(g.n_nodes, UNREACHABLE, dtype=np.int64)
    dist[src] = 0
    frontier = src
    d = 0
    while frontier.size:
        starts = g.indptr[frontier]
        counts = g.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        cum = np.concatenate([[0], np.cumsum(counts)[:-1]])
        pos = np.arange(total) - np.repeat(cum, counts) + np.repeat(starts, counts)
        neigh = g.indices[pos]
        fresh = np.unique(neigh[dist[neigh] == UNREACHABLE])
        d += 1
        dist[fresh] = d
        frontier = fresh
    return dist


def spmm(m: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product m @ x; rows of isolated nodes come out zero."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != m.n_nodes:
        raise InputError(
            f"spmm expects a ({m.n_nodes}, F) matrix, got shape {x.shape}"
        )
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    if not x.flags.c_contiguous:
        x = np.ascontiguousarray(x)
    values = m.values.astype(x.dtype, copy=False)
    return _kernels.csr_spmm(m.indptr, m.indices, values, x)
