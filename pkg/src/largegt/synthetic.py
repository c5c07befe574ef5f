"""Deterministic desk-scale test-graph generators.

Stochastic block models (exact G(n,p) per block pair, features = label
one-hot + Gaussian noise), paths, stars, and planted parity tasks over a
bounded radius. All generators are pure functions of their spec/seed and
emit structures that satisfy the graph-store invariants.

Real-world datasets are out of scope here: a converter would only need to
emit the same artifacts these generators produce, i.e. an edge list
("src dst" per line), an LGTF feature file, a labels text file (-1 for
unlabeled) and three split files of node ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation
from .graph import GraphCSR, LabelsAndSplits, NodeFeatures, build_csr


@dataclass(frozen=True)
class SbmSpec:
    blocks: int
    nodes_per_block: int
    p_intra: float
    p_inter: float
    feature_noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.blocks < 1 or self.nodes_per_block < 1:
            raise ContractViolation("blocks and nodes_per_block must be >= 1")
        for name in ("p_intra", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ContractViolation(f"{name}={p} outside [0, 1]")

    @property
    def num_nodes(self) -> int:
        return self.blocks * self.nodes_per_block


def _sample_unique_codes(rng: np.random.Generator, high: int, m: int) -> np.ndarray:
    """m distinct uniform integers from [0, high) without materializing the range."""
    if m == 0:
        return np.empty(0, dtype=np.int64)
    if m > high:
        raise ContractViolation(f"cannot draw {m} distinct values from {high}")
    if m * 4 >= high:
        return rng.permutation(high)[:m].astype(np.int64)
    out = np.unique(rng.integers(0, high, size=m + m // 8 + 16, dtype=np.int64))
    while out.size < m:
        extra = rng.integers(0, high, size=(m - out.size) * 2 + 16, dtype=np.int64)
        out = np.unique(np.concatenate([out, extra]))
    return rng.permutation(out)[:m]


def _decode_triangle(code: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices of the strict upper triangle of an n x n grid to (u, v)."""
    c = code.astype(np.float64)
    b = 2 * n - 1
    u = np.floor((b - np.sqrt(b * b - 8.0 * c)) / 2.0).astype(np.int64)
    # float sqrt can land one row off near boundaries
    starts = u * n - u * (u + 1) // 2
    u -= code < starts
    starts = u * n - u * (u + 1) // 2
    u += code >= starts + (n - 1 - u)
    starts = u * n - u * (u + 1) // 2
    v = code - starts + u + 1
    return u, v


def generate_sbm(spec: SbmSpec) -> tuple[GraphCSR, NodeFeatures, LabelsAndSplits]:
    """Sample an SBM graph with block-id labels and noisy one-hot features."""
    rng = np.random.default_rng(spec.seed)
    n, npb = spec.num_nodes, spec.nodes_per_block
    srcs, dsts = [], []
    for bi in range(spec.blocks):
        for bj in range(bi, spec.blocks):
            if bi == bj:
                possible = npb * (npb - 1) // 2
                p = spec.p_intra
            else:
                possible = npb * npb
                p = spec.p_inter
            m = int(rng.binomial(possible, p)) if possible else 0
            codes = _sample_unique_codes(rng, possible, m)
            if bi == bj:
                u, v = _decode_triangle(codes, npb)
            else:
                u, v = codes // npb, codes % npb
            srcs.append(u + bi * npb)
            dsts.append(v + bj * npb)
    src = np.concatenate(srcs) if srcs else np.empty(0, np.int64)
    dst = np.concatenate(dsts) if dsts else np.empty(0, np.int64)
    g = build_csr(src, dst, n, symmetrize=True)

    labels = np.repeat(np.arange(spec.blocks, dtype=np.int64), npb)
    feats = np.eye(spec.blocks, dtype=np.float64)[labels]
    feats += spec.feature_noise * rng.standard_normal((n, spec.blocks))
    nf = NodeFeatures(feats)
    ls = make_splits(labels, spec.blocks, rng)
    return g, nf, ls


def make_splits(labels: np.ndarray, num_classes: int,
                rng: np.random.Generator) -> LabelsAndSplits:
    """Random 60/20/20 split over all nodes."""
    n = labels.shape[0]
    perm = rng.permutation(n)
    a, b = int(0.6 * n), int(0.8 * n)
    return LabelsAndSplits(labels=labels, num_classes=num_classes,
                           train=np.sort(perm[:a]), valid=np.sort(perm[a:b]),
                           test=np.sort(perm[b:]))


def generate_distance_label_task(g: GraphCSR, radius: int, seed: int = 0,
                                 mark_fraction: float = 0.5) -> LabelsAndSplits:
    """Parity-of-marked-nodes-within-radius labels for a given graph.

    Node i is labeled by the parity of the number of marked nodes at
    distance <= radius from i (i itself included), so the task is solvable
    only by a model whose receptive field reaches `radius` hops.
    """
    if not 0 <= radius <= 4:
        raise ContractViolation("radius must be in 0..4")
    rng = np.random.default_rng(seed)
    marks = (rng.random(g.num_nodes) < mark_fraction).astype(np.int64)
    reach = sp.identity(g.num_nodes, dtype=bool, format="csr")
    a = g.to_scipy(dtype=bool)
    for _ in range(radius):
        reach = ((reach + a @ reach) > 0).tocsr()
    counts = reach.astype(np.int64) @ marks
    labels = counts % 2
    return make_splits(labels, 2, rng)


def path_graph(n: int) -> GraphCSR:
    idx = np.arange(n - 1, dtype=np.int64)
    return build_csr(idx, idx + 1, n, symmetrize=True)


def star_graph(leaves: int) -> GraphCSR:
    """Node 0 is the hub; leaves are 1..leaves."""
    src = np.zeros(leaves, dtype=np.int64)
    dst = np.arange(1, leaves + 1, dtype=np.int64)
    return build_csr(src, dst, leaves + 1, symmetrize=True)


def random_graph(num_nodes: int, avg_degree: float, seed: int = 0) -> GraphCSR:
    """Uniform random undirected graph with the given expected degree."""
    rng = np.random.default_rng(seed)
    m = int(num_nodes * avg_degree / 2)
    src = rng.integers(0, num_nodes, size=m)
    dst = rng.integers(0, num_nodes, size=m)
    return build_csr(src, dst, num_nodes, symmetrize=True)
