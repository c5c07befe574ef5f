"""Precomputed 1-hop and 2-hop context features.

hop1 is the normalized adjacency applied to the raw features, hop2 is the
same operator applied to hop1. The squared operator is never materialized
(it densifies badly on power-law graphs); storage is float32 with float64
accumulation inside the sparse products.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import GraphCSR, NodeFeatures, _first_nonfinite_row, _freeze, \
    normalized_adjacency_apply
from . import fileio


@dataclass(frozen=True)
class ContextFeatures:
    """N x D_in context matrices: hop1 = A_norm @ H, hop2 = A_norm @ hop1."""

    hop1: np.ndarray
    hop2: np.ndarray

    def __post_init__(self):
        hop1 = np.ascontiguousarray(self.hop1, dtype=np.float32)
        hop2 = np.ascontiguousarray(self.hop2, dtype=np.float32)
        if hop1.shape != hop2.shape or hop1.ndim != 2:
            raise ValidationError("hop1/hop2 must be equal-shape 2-D matrices")
        for name, arr in (("hop1", hop1), ("hop2", hop2)):
            bad = _first_nonfinite_row(arr)
            if bad is not None:
                raise ValidationError(f"non-finite {name} value at node {bad}")
        object.__setattr__(self, "hop1", _freeze(hop1))
        object.__setattr__(self, "hop2", _freeze(hop2))

    @property
    def num_nodes(self) -> int:
        return self.hop1.shape[0]

    @property
    def dim(self) -> int:
        return self.hop1.shape[1]


def precompute_context(g: GraphCSR, h: NodeFeatures,
                       block_size: int = 16384) -> ContextFeatures:
    """Compute both context matrices for every node of g."""
    if h.num_nodes != g.num_nodes:
        raise ValidationError(
            f"features have {h.num_nodes} rows, graph has {g.num_nodes} nodes")
    bad = _first_nonfinite_row(h.data)
    if bad is not None:
        raise ValidationError(f"non-finite feature value at node {bad}")
    hop1 = normalized_adjacency_apply(g, h.data, block_size).astype(np.float32)
    hop2 = normalized_adjacency_apply(g, hop1, block_size).astype(np.float32)
    return ContextFeatures(hop1=hop1, hop2=hop2)


def save_context(c: ContextFeatures, path: str | Path) -> None:
    with open(path, "wb") as f:
        fileio.write_magic(f, fileio.MAGIC_CONTEXT)
        fileio.write_u32(f, c.num_nodes)
        fileio.write_u32(f, c.dim)
        f.write(np.ascontiguousarray(c.hop1, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(c.hop2, dtype="<f4").tobytes())


def load_context(path: str | Path,
                 num_nodes: int | None = None) -> ContextFeatures:
    """Load a context file, optionally checking it against a known graph size."""
    with open(path, "rb") as f:
        fileio.check_magic(f, fileio.MAGIC_CONTEXT)
        n = fileio.read_u32(f, "num_nodes")
        d = fileio.read_u32(f, "dim")
        hop1 = fileio.read_array(f, "<f4", n * d, "hop1 payload")
        hop2 = fileio.read_array(f, "<f4", n * d, "hop2 payload")
        fileio.expect_eof(f, str(path))
    if num_nodes is not None and n != num_nodes:
        raise ValidationError(
            f"context file has {n} nodes, expected {num_nodes}")
    return ContextFeatures(hop1=hop1.reshape(n, d), hop2=hop2.reshape(n, d))
