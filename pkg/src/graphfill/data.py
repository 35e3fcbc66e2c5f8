"""Dataset ingestion, splits/masking, and the synthetic block-model fixture.

On-disk formats:

* content/cites text pair -- the classic citation-network distribution:
  each content line is ``<id> <v1> ... <vF> <label>`` with binary values,
  each cites line names two ids. Ids are remapped to 0..N-1 in first
  appearance order; citations to unknown ids are skipped and counted.
* native binary dataset directory --
  ``graph.edges`` (``u<TAB>v`` per line, 0-indexed),
  ``features.bin`` (magic ``AMG1``, u32 N, u32 F, u8 kind {0=binary,
  1=continuous}, then N*F little-endian float32, row-major),
  ``labels.txt`` (one integer per line). Round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .graphs import Graph, NodeMask, build_graph

KIND_BINARY = "binary"
KIND_CONTINUOUS = "continuous"

_MAGIC = b"AMG1"


@dataclass
class Dataset:
    graph: Graph
    features: np.ndarray  # (N, F) float32
    labels: np.ndarray  # (N,) int64
    name: str
    feature_kind: str = KIND_BINARY
    n_skipped_edges: int = 0

    def __post_init__(self):
        n = self.graph.n_nodes
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise InputError(
                f"feature rows ({self.features.shape[0]}) and labels "
                f"({self.labels.shape[0]}) must match n_nodes ({n})"
            )
        if self.feature_kind == KIND_BINARY:
            vals = np.unique(self.features)
            if not np.isin(vals, (0.0, 1.0)).all():
                raise InputError("binary dataset contains values outside {0, 1}")


@dataclass(frozen=True)
class SplitMask:
    """Known/val/test partition of nodes; val and test get attribute-masked."""

    mask: NodeMask
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    known_fraction: float
    val_fraction: float
    test_fraction: float
    masked_train_idx: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def load_content_format(content_path, cites_path) -> Dataset:
    """Parse the content/cites text pair into a Dataset."""
    ids = {}
    rows = []
    labels_raw = []
    n_features = None
    with open(content_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise FormatError(
                    f"{content_path}:{lineno}: expected id, values, label"
                )
            node_id, values, label = parts[0], parts[1:-1], parts[-1]
            if n_features is None:
                n_features = len(values)
            elif len(values) != n_features:
                raise FormatError(
                    f"{content_path}:{lineno}: {len(values)} values, "
                    f"expected {n_features}"
                )
            if node_id in ids:
                raise FormatError(f"{content_path}:{lineno}: duplicate id {node_id}")
            try:
                row = np.array(values, dtype=np.float32)
            except ValueError as exc:
                raise FormatError(f"{content_path}:{lineno}: {exc}") from exc
            ids[node_id] = len(rows)
            rows.append(row)
            labels_raw.append(label)
    if not rows:
        raise FormatError(f"{content_path}: no content lines")
    features = np.stack(rows)
    label_ids = {}
    labels = np.array([label_ids.setdefault(l, len(label_ids)) for l in labels_raw],
                      dtype=np.int64)
    edges = []
    skipped = 0
    with open(cites_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError(f"{cites_path}:{lineno}: expected two ids")
            a, b = parts
            if a not in ids or b not in ids:
                skipped += 1
                continue
            edges.append((ids[a], ids[b]))
    graph = build_graph(edges, n_nodes=len(rows))
    kind = KIND_BINARY if np.isin(np.unique(features), (0.0, 1.0)).all() else KIND_CONTINUOUS
    return Dataset(graph=graph, features=features, labels=labels,
                   name=Path(content_path).stem, feature_kind=kind,
                   n_skipped_edges=skipped)


def save_binary_dataset(ds: Dataset, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "graph.edges", "w", encoding="utf-8") as fh:
        for u, v in ds.graph.edge_array:
            fh.write(f"{u}\t{v}\n")
    n, f = ds.features.shape
    kind_byte = 0 if ds.feature_kind == KIND_BINARY else 1
    with open(directory / "features.bin", "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIB", n, f, kind_byte))
        fh.write(np.ascontiguousarray(ds.features, dtype="<f4").tobytes())
    with open(directory / "labels.txt", "w", encoding="utf-8") as fh:
        for label in ds.labels:
            fh.write(f"{label}\n")


def write_feature_matrix(x, path, kind=KIND_CONTINUOUS):
    """Standalone features.bin writer (used for x_tilde / x_hat / z exports)."""
    x = np.asarray(x)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIB", x.shape[0], x.shape[1],
                             0 if kind == KIND_BINARY else 1))
        fh.write(np.ascontiguousarray(x, dtype="<f4").tobytes())


def read_feature_matrix(path):
    """Read a features.bin file; returns (matrix float32, kind)."""
    with open(path, "rb") as fh:
        head = fh.read(13)
        if len(head) < 13 or head[:4] != _MAGIC:
            raise FormatError(f"{path}: bad magic, not a feature matrix file")
        n, f, kind_byte = struct.unpack("<IIB", head[4:])
        if kind_byte not in (0, 1):
            raise FormatError(f"{path}: unknown feature kind byte {kind_byte}")
        payload = fh.read(n * f * 4 + 1)
    if len(payload) != n * f * 4:
        raise FormatError(
            f"{path}: expected {n * f * 4} payload bytes, got {len(payload)}"
        )
    x = np.frombuffer(payload, dtype="<f4").reshape(n, f).copy()
    kind = KIND_BINARY if kind_byte == 0 else KIND_CONTINUOUS
    if kind == KIND_BINARY and not np.isin(np.unique(x), (0.0, 1.0)).all():
        raise FormatError(f"{path}: binary kind but values outside {{0, 1}}")
    return x, kind


def load_binary_dataset(directory) -> Dataset:
    directory = Path(directory)
    features, kind = read_feature_matrix(directory / "features.bin")
    labels = []
    with open(directory / "labels.txt", "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise FormatError(f"labels.txt:{lineno}: {exc}") from exc
    edges = []
    with open(directory / "graph.edges", "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError(f"graph.edges:{lineno}: expected two endpoints")
            edges.append((int(parts[0]), int(parts[1])))
    graph = build_graph(edges, n_nodes=features.shape[0])
    return Dataset(graph=graph, features=features,
                   labels=np.asarray(labels, dtype=np.int64),
                   name=directory.name, feature_kind=kind)


def fractions_for_missing_rate(missing_rate: float):
    """known = 1 - rate; the masked remainder keeps the 1:5 val:test ratio."""
    if not 0.0 < missing_rate < 1.0:
        raise ConfigError("missing rate must lie strictly inside (0, 1)")
    return (1.0 - missing_rate, missing_rate / 6.0, missing_rate * 5.0 / 6.0)


def make_split_mask(n_nodes, fractions, seed, known_within_train=False) -> SplitMask:
    """Seeded uniform shuffle, then contiguous slicing into known/val/test.

    Sizes floor the known and val fractions and give the remainder to test.
    With known_within_train, only the leading known_fraction share of the
    train slice is actually known; the rest is masked but belongs to no
    evaluation bucket.
    """
    kf, vf, tf = (float(x) for x in fractions)
    if abs(kf + vf + tf - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {kf + vf + tf}")
    if min(kf, vf, tf) < 0:
        raise ConfigError("split fractions must be non-negative")
    perm = np.random.default_rng(seed).permutation(n_nodes)
    n_train = int(np.floor(kf * n_nodes))
    n_val = int(np.floor(vf * n_nodes))
    train_idx = perm[:n_train]
    val_idx = np.sort(perm[n_train:n_train + n_val])
    test_idx = np.sort(perm[n_train + n_val:])
    masked_train = np.empty(0, dtype=np.int64)
    if known_within_train:
        n_known = int(np.floor(kf * n_train))
        masked_train = np.sort(train_idx[n_known:])
        train_idx = train_idx[:n_known]
    known = np.zeros(n_nodes, dtype=bool)
    known[train_idx] = True
    return SplitMask(mask=NodeMask(known=known), val_idx=val_idx,
                     test_idx=test_idx, seed=int(seed), known_fraction=kf,
                     val_fraction=vf, test_fraction=tf,
                     masked_train_idx=masked_train)


def gen_sbm(blocks, per_block, p_in, p_out, feature_dim, seed, noise=0.05) -> Dataset:
    """Stochastic block model with block-indicator-plus-noise binary features."""
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ConfigError("block model probabilities must lie in [0, 1]")
    if feature_dim < blocks:
        raise ConfigError("feature_dim must be at least the number of blocks")
    n = blocks * per_block
    labels = np.repeat(np.arange(blocks), per_block).astype(np.int64)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.shape[0]) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    graph = build_graph(edges, n_nodes=n)
    slice_size = feature_dim // blocks
    features = np.zeros((n, feature_dim), dtype=np.float32)
    for b in range(blocks):
        rows = labels == b
        features[rows, b * slice_size:(b + 1) * slice_size] = 1.0
    flips = rng.random(features.shape) < noise
    features = np.where(flips, 1.0 - features, features).astype(np.float32)
    return Dataset(graph=graph, features=features, labels=labels,
                   name=f"sbm-{blocks}x{per_block}-s{seed}",
                   feature_kind=KIND_BINARY)
