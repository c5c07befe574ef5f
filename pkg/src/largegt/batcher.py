"""Mini-batch token assembly for the local encoder.

Each batch row holds 3K tokens: for every sampled local node j of the
seed node, the triple (H[j], hop1[j], hop2[j]) in consecutive slots.
Slot 0 is always the seed node's own triple because the sampled multiset
starts with the node itself. Assembly is a pure gather; no normalization
or augmentation happens here.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .context import ContextFeatures
from .errors import BoundsError, ContractViolation
from .graph import NodeFeatures, _freeze
from .sampler import LocalNodeSets


@dataclass(frozen=True)
class TokenBatch:
    """M x 3K x D_in input tokens plus the seed node id of every row."""

    node_ids: np.ndarray
    data: np.ndarray
    k: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        ids = np.ascontiguousarray(self.node_ids, dtype=np.int64)
        if data.ndim != 3 or data.shape[0] != ids.shape[0]:
            raise ContractViolation("token tensor must be [M, 3K, D] with M node ids")
        if data.shape[1] != 3 * self.k:
            raise ContractViolation(f"token axis {data.shape[1]} != 3*k with k={self.k}")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "node_ids", _freeze(ids))

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]

    @property
    def tokens_per_node(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def build_token_batch(batch_nodes: np.ndarray, s: LocalNodeSets,
                      h: NodeFeatures, c: ContextFeatures) -> TokenBatch:
    """Gather the [M, 3K, D_in] token tensor for the given seed nodes."""
    if not (s.num_nodes == h.num_nodes == c.num_nodes):
        raise ContractViolation(
            f"inconsistent node counts: sets={s.num_nodes} "
            f"features={h.num_nodes} context={c.num_nodes}")
    if h.dim != c.dim:
        raise ContractViolation(
            f"feature dim {h.dim} != context dim {c.dim}")
    ids = np.ascontiguousarray(batch_nodes, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= s.num_nodes):
        raise BoundsError(f"batch node id out of [0, {s.num_nodes})")
    sel = s.sets[ids].astype(np.int64)                      # [M, K]
    stacked = np.stack([h.data[sel], c.hop1[sel], c.hop2[sel]], axis=2)
    data = stacked.reshape(ids.shape[0], 3 * s.k, h.dim)
    return TokenBatch(node_ids=ids, data=data, k=s.k)


def dump_batch_csv(tb: TokenBatch, path: str | Path) -> None:
    """Debug dump: one CSV row per token (seed id, slot, values...)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["seed_node", "slot"] + [f"x{j}" for j in range(tb.dim)])
        for i in range(tb.batch_size):
            for slot in range(tb.tokens_per_node):
                w.writerow([int(tb.node_ids[i]), slot]
                           + [format(v, ".8g") for v in tb.data[i, slot]])
