"""Offline sampling of a K-sized multiset of local nodes per node.

For every node i the multiset starts with i itself followed by K-1 draws
from its distance-{1,2} neighborhood T:

  * |T| >= K-1: K-1 distinct members of T
  * 0 < |T| < K-1: every member of T once, padded to K-1 with uniform
    with-replacement draws from T (pad_strategy="include-all", default),
    or K-1 plain with-replacement draws (pad_strategy="pure-replacement")
  * |T| == 0: K-1 uniform draws from all node ids; i itself and
    duplicates are allowed since the result is a multiset

Each node gets its own RNG stream keyed by (seed, node id), so any
parallel partition of the node range produces output identical to the
serial run. This is a one-time offline step; nothing here resamples
during training.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BoundsError, ContractViolation, ValidationError
from .graph import GraphCSR, two_hop_structure
from . import fileio

PAD_STRATEGIES = ("include-all", "pure-replacement")


@dataclass(frozen=True)
class LocalNodeSets:
    """N x K matrix of sampled local-node multisets; row i starts with i."""

    k: int
    seed: int
    sets: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ContractViolation("k must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ContractViolation("seed must fit in 64 unsigned bits")
        sets = np.ascontiguousarray(self.sets, dtype=np.uint32)
        if sets.ndim != 2 or sets.shape[1] != self.k:
            raise ValidationError(f"sets shape {sets.shape} does not match k={self.k}")
        n = sets.shape[0]
        if np.any(sets[:, 0] != np.arange(n, dtype=np.uint32)):
            raise ValidationError("sets[i][0] must equal i")
        if sets.size and sets.max() >= n:
            raise BoundsError("sampled node id out of [0, N)")
        sets.flags.writeable = False
        object.__setattr__(self, "sets", sets)

    @property
    def num_nodes(self) -> int:
        return self.sets.shape[0]


def _sample_rows(sets: np.ndarray, two_off: np.ndarray, two_col: np.ndarray,
                 lo: int, hi: int, k: int, seed: int, num_nodes: int,
                 pad_strategy: str) -> None:
    k1 = k - 1
    if k1 == 0:
        return
    for i in range(lo, hi):
        rng = np.random.default_rng((seed, i))
        t = two_col[two_off[i]:two_off[i + 1]]
        if t.size >= k1:
            sets[i, 1:] = t[rng.choice(t.size, size=k1, replace=False)]
        elif t.size > 0:
            if pad_strategy == "include-all":
                sets[i, 1:1 + t.size] = t
                sets[i, 1 + t.size:] = t[rng.integers(0, t.size, size=k1 - t.size)]
            else:
                sets[i, 1:] = t[rng.integers(0, t.size, size=k1)]
        else:
            sets[i, 1:] = rng.integers(0, num_nodes, size=k1)


def sample_local_nodes(g: GraphCSR, k: int, seed: int, parallelism: int = 1,
                       pad_strategy: str = "include-all") -> LocalNodeSets:
    """Run the offline local-node sampling for every node of g."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    if parallelism < 1:
        raise ContractViolation("parallelism must be >= 1")
    if pad_strategy not in PAD_STRATEGIES:
        raise ContractViolation(f"pad_strategy must be one of {PAD_STRATEGIES}")
    n = g.num_nodes
    sets = np.empty((n, k), dtype=np.uint32)
    sets[:, 0] = np.arange(n, dtype=np.uint32)
    if k > 1 and n > 0:
        two_off, two_col = two_hop_structure(g)
        if parallelism == 1:
            _sample_rows(sets, two_off, two_col, 0, n, k, seed, n, pad_strategy)
        else:
            # output rows are disjoint per chunk, so no synchronization needed
            bounds = np.linspace(0, n, parallelism + 1, dtype=np.int64)
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                futures = [
                    pool.submit(_sample_rows, sets, two_off, two_col,
                                int(lo), int(hi), k, seed, n, pad_strategy)
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if lo < hi
                ]
                for fut in futures:
                    fut.result()
    return LocalNodeSets(k=k, seed=seed, sets=sets)


def save_local_nodes(s: LocalNodeSets, path: str | Path) -> None:
    with open(path, "wb") as f:
        fileio.write_magic(f, fileio.MAGIC_LOCAL_NODES)
        fileio.write_u32(f, s.num_nodes)
        fileio.write_u32(f, s.k)
        fileio.write_u64(f, s.seed)
        f.write(np.ascontiguousarray(s.sets, dtype="<u4").tobytes())


def load_local_nodes(path: str | Path) -> LocalNodeSets:
    with open(path, "rb") as f:
        fileio.check_magic(f, fileio.MAGIC_LOCAL_NODES)
        n = fileio.read_u32(f, "num_nodes")
        k = fileio.read_u32(f, "k")
        if k < 1:
            raise ContractViolation(f"{path}: header k={k}, must be >= 1")
        seed = fileio.read_u64(f, "seed")
        sets = fileio.read_array(f, "<u4", n * k, "local-node payload")
        fileio.expect_eof(f, str(path))
    return LocalNodeSets(k=k, seed=seed, sets=sets.reshape(n, k))
