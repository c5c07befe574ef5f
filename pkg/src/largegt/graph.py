"""Immutable CSR graph storage, node features, labels and splits.

The graph is held as plain numpy CSR arrays (sorted, deduplicated rows,
no self-loops). Self-loops from raw input are stripped at ingest and only
reappear through the +I term of the symmetric normalization, so they are
never double counted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import BoundsError, ContractViolation, ParseError, ValidationError
from . import fileio


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GraphCSR:
    """Compressed sparse row adjacency with per-node degrees.

    Rows are sorted, deduplicated and free of self-loops; the structure is
    validated at construction and the arrays are frozen, so instances can
    be shared across threads.
    """

    num_nodes: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        n, e = self.num_nodes, self.num_edges
        off, col, deg = self.row_offsets, self.col_indices, self.degrees
        if off.shape != (n + 1,) or col.shape != (e,) or deg.shape != (n,):
            raise ValidationError("CSR array lengths inconsistent with N/E")
        if off[0] != 0 or off[-1] != e or np.any(np.diff(off) < 0):
            raise ValidationError("row_offsets must be non-decreasing from 0 to E")
        if e and (col.min() < 0 or col.max() >= n):
            raise BoundsError("col_indices entry out of [0, N)")
        if np.any(deg != np.diff(off)):
            raise ValidationError("degrees do not match row_offsets")
        if e > 1:
            d = np.diff(col)
            same_row = np.ones(e - 1, dtype=bool)
            same_row[off[1:-1] - 1] = False
            if np.any(d[same_row] <= 0):
                raise ValidationError("col_indices must be strictly increasing per row")
        _freeze(off), _freeze(col), _freeze(deg)

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def to_scipy(self, dtype=np.float64) -> sp.csr_matrix:
        """Zero-fill-in scipy view of the adjacency (data all ones)."""
        data = np.ones(self.num_edges, dtype=dtype)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.num_nodes, self.num_nodes))


def build_csr(src: np.ndarray, dst: np.ndarray, num_nodes: int,
              symmetrize: bool = True) -> GraphCSR:
    """Build a GraphCSR from parallel edge arrays.

    Self-loops are dropped, duplicates removed, rows sorted. With
    symmetrize=True the edge set is closed under reversal.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.size and (min(src.min(), dst.min()) < 0
                     or max(src.max(), dst.max()) >= num_nodes):
        raise BoundsError(f"edge endpoint out of [0, {num_nodes})")
    keep = src != dst
    src, dst = src[keep], dst[keep]
    if symmetrize:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    # sort by (src, dst) then dedup
    key = src * num_nodes + dst
    key = np.unique(key)
    src = key // num_nodes
    dst = key % num_nodes
    degrees = np.bincount(src, minlength=num_nodes).astype(np.int64)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_offsets[1:])
    return GraphCSR(num_nodes=num_nodes, num_edges=int(src.size),
                    row_offsets=row_offsets, col_indices=dst.astype(np.int64),
                    degrees=degrees)


_EDGE_LINE = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def ingest_edge_list(path: str | Path, num_nodes: int,
                     symmetrize: bool = True) -> GraphCSR:
    """Parse a whitespace-separated "src dst" text file into a GraphCSR."""
    srcs: list[int] = []
    dsts: list[int] = []
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            m = _EDGE_LINE.match(raw)
            if m is None:
                raise ParseError(f"expected 'src dst', got {raw.strip()!r}", line=lineno)
            u, v = int(m.group(1)), int(m.group(2))
            if u >= num_nodes or v >= num_nodes:
                raise BoundsError(f"line {lineno}: node id out of [0, {num_nodes})")
            srcs.append(u)
            dsts.append(v)
    return build_csr(np.array(srcs, dtype=np.int64), np.array(dsts, dtype=np.int64),
                     num_nodes, symmetrize=symmetrize)


def write_edge_list(g: GraphCSR, path: str | Path) -> None:
    """Dump every adjacency entry as a directed "src dst" line.

    Re-ingesting with symmetrize=False reproduces the CSR exactly.
    """
    src = np.repeat(np.arange(g.num_nodes, dtype=np.int64), g.degrees)
    with open(path, "w") as f:
        for u, v in zip(src, g.col_indices):
            f.write(f"{u} {v}\n")


def normalized_adjacency_apply(g: GraphCSR, m: np.ndarray,
                               block_size: int = 16384) -> np.ndarray:
    """Compute D^(-1/2) (A+I) D^(-1/2) @ m row-block-wise.

    Accumulates in float64 regardless of the input dtype; the dense
    normalized matrix is never materialized. Isolated nodes reduce to the
    unit self-loop, so their rows pass through unchanged.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != g.num_nodes:
        raise ContractViolation(
            f"matrix shape {m.shape} incompatible with {g.num_nodes} graph nodes")
    s = 1.0 / np.sqrt(g.degrees.astype(np.float64) + 1.0)
    x = s[:, None] * m.astype(np.float64, copy=False)
    a = g.to_scipy(dtype=np.float64)
    out = np.empty((g.num_nodes, m.shape[1]), dtype=np.float64)
    for start in range(0, g.num_nodes, block_size):
        stop = min(start + block_size, g.num_nodes)
        block = a[start:stop] @ x + x[start:stop]
        out[start:stop] = s[start:stop, None] * block
    return out


def two_hop_neighbors(g: GraphCSR, i: int) -> np.ndarray:
    """Sorted ids of all nodes at distance 1 or 2 from i, excluding i."""
    if not 0 <= i < g.num_nodes:
        raise BoundsError(f"node id {i} out of [0, {g.num_nodes})")
    nbrs = g.neighbors(i)
    if nbrs.size == 0:
        return nbrs.copy()
    hops = [nbrs] + [g.neighbors(int(j)) for j in nbrs]
    out = np.unique(np.concatenate(hops))
    return out[out != i]


def two_hop_structure(g: GraphCSR) -> tuple[np.ndarray, np.ndarray]:
    """CSR (offsets, columns) of the distance-{1,2} neighborhood of every node.

    Computed once via sparse boolean A + A@A with the diagonal removed;
    used by the offline sampler so it never loops BFS per node.
    """
    a = g.to_scipy(dtype=np.float32)
    u = (a + a @ a).tocsr()
    u.setdiag(0)
    u.eliminate_zeros()
    u.sort_indices()
    return u.indptr.astype(np.int64), u.indices.astype(np.int64)


def _first_nonfinite_row(data: np.ndarray) -> int | None:
    bad = ~np.isfinite(data)
    if not bad.any():
        return None
    return int(np.nonzero(bad.any(axis=1))[0][0])


@dataclass(frozen=True)
class NodeFeatures:
    """Dense N x D_in float32 feature matrix, finite and immutable."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValidationError("features must be a 2-D matrix")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        bad = _first_nonfinite_row(data)
        if bad is not None:
            raise ValidationError(f"non-finite feature value at node {bad}")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def num_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def with_appended_columns(self, extra: np.ndarray) -> "NodeFeatures":
        """Features with e.g. precomputed positional encodings appended."""
        if extra.shape[0] != self.num_nodes:
            raise ValidationError(
                f"appended columns have {extra.shape[0]} rows, expected {self.num_nodes}")
        return NodeFeatures(np.concatenate(
            [self.data, extra.astype(np.float32)], axis=1))


def save_features(nf: NodeFeatures, path: str | Path) -> None:
    with open(path, "wb") as f:
        fileio.write_magic(f, fileio.MAGIC_FEATURES)
        fileio.write_u32(f, nf.num_nodes)
        fileio.write_u32(f, nf.dim)
        f.write(np.ascontiguousarray(nf.data, dtype="<f4").tobytes())


def load_features(path: str | Path) -> NodeFeatures:
    with open(path, "rb") as f:
        fileio.check_magic(f, fileio.MAGIC_FEATURES)
        n = fileio.read_u32(f, "num_nodes")
        d = fileio.read_u32(f, "dim")
        data = fileio.read_array(f, "<f4", n * d, "feature payload")
        fileio.expect_eof(f, str(path))
    return NodeFeatures(data.reshape(n, d))


def load_features_csv(path: str | Path) -> NodeFeatures:
    """Comma-separated text loader, one node per row. Test convenience."""
    data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return NodeFeatures(data)


@dataclass(frozen=True)
class LabelsAndSplits:
    """Per-node class ids (-1 = unlabeled) plus disjoint train/valid/test sets."""

    labels: np.ndarray
    num_classes: int
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        labeled = labels[labels != -1]
        if labeled.size and (labeled.min() < 0 or labeled.max() >= self.num_classes):
            raise BoundsError("label outside [0, num_classes)")
        n = labels.shape[0]
        splits = []
        for name in ("train", "valid", "test"):
            idx = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise BoundsError(f"{name} split contains node id out of [0, {n})")
            if np.unique(idx).size != idx.size:
                raise ValidationError(f"{name} split contains duplicates")
            splits.append(idx)
        combined = np.concatenate(splits)
        if np.unique(combined).size != combined.size:
            raise ValidationError("train/valid/test splits are not disjoint")
        object.__setattr__(self, "labels", _freeze(labels))
        for name, idx in zip(("train", "valid", "test"), splits):
            object.__setattr__(self, name, _freeze(idx))

    @property
    def num_nodes(self) -> int:
        return self.labels.shape[0]

    def split(self, name: str) -> np.ndarray:
        if name not in ("train", "valid", "test"):
            raise ContractViolation(f"unknown split {name!r}")
        return getattr(self, name)


def save_labels(ls: LabelsAndSplits, labels_path: str | Path,
                splits_dir: str | Path) -> None:
    np.savetxt(labels_path, ls.labels, fmt="%d")
    d = Path(splits_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name in ("train", "valid", "test"):
        np.savetxt(d / f"{name}.txt", ls.split(name), fmt="%d")


def load_labels(labels_path: str | Path, splits_dir: str | Path,
                num_classes: int | None = None) -> LabelsAndSplits:
    try:
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise ParseError(f"labels file {labels_path}: {exc}") from exc
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 0
    d = Path(splits_dir)
    parts = {}
    for name in ("train", "valid", "test"):
        p = d / f"{name}.txt"
        if not p.exists():
            raise ValidationError(f"missing split file {p}")
        raw = np.loadtxt(p, dtype=np.int64, ndmin=1)
        parts[name] = raw
    return LabelsAndSplits(labels=labels, num_classes=num_classes, **parts)
