"""Codebook attention for global context.

Every node in a batch attends over B centroid vectors maintained by a
streaming EMA k-means. Attention is single-head, scaled by sqrt(D), with
an additive log-population bias so that heavily assigned centroids weigh
more. Centroids are never updated by gradients: training-mode forwards
refresh them with the batch's MLP_a outputs after the outputs are
computed, eval-mode forwards leave the codebook untouched.

The population bias uses the EMA-estimated assignment counts rescaled to
the graph's node count (exact global counts are unavailable mid-training),
floored at 1e-3 so empty centroids keep a finite weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, StateError, ValidationError
from .nn import (ParamStore, Tensor, add, constant, gelu, linear, matmul,
                 mul, softmax, transpose, xavier_uniform)

BIAS_FLOOR = 1e-3
COUNT_EPS = 1e-6


@dataclass
class Codebook:
    """B centroids with EMA counts/sums and the latest batch assignments."""

    centroids: np.ndarray
    ema_counts: np.ndarray
    ema_sums: np.ndarray
    decay: float
    population: int
    assignments: np.ndarray | None = None
    assignment_nodes: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def validate(self) -> None:
        b, d = self.centroids.shape
        if self.ema_counts.shape != (b,) or self.ema_sums.shape != (b, d):
            raise ValidationError("codebook EMA buffers shape mismatch")
        if np.any(self.ema_counts < 0):
            raise ValidationError("negative EMA count")
        if self.assignments is not None and self.assignments.size:
            if self.assignments.min() < 0 or self.assignments.max() >= b:
                raise ValidationError("assignment index out of [0, B)")

    def copy(self) -> "Codebook":
        return Codebook(
            centroids=self.centroids.copy(), ema_counts=self.ema_counts.copy(),
            ema_sums=self.ema_sums.copy(), decay=self.decay,
            population=self.population,
            assignments=None if self.assignments is None else self.assignments.copy(),
            assignment_nodes=(None if self.assignment_nodes is None
                              else self.assignment_nodes.copy()))


def init_codebook(size: int, sample_x: np.ndarray, seed: int,
                  decay: float = 0.99, population: int | None = None,
                  dtype=np.float32) -> Codebook:
    """Seed the codebook with `size` distinct sampled rows of sample_x."""
    sample_x = np.asarray(sample_x)
    n = sample_x.shape[0]
    if n < size:
        raise ContractViolation(f"need at least {size} sample rows, got {n}")
    if not 0.0 <= decay < 1.0:
        raise ContractViolation(f"decay {decay} outside [0, 1)")
    rng = np.random.default_rng(seed)
    rows = rng.choice(n, size=size, replace=False)
    centroids = sample_x[rows].astype(dtype, copy=True)
    return Codebook(centroids=centroids,
                    ema_counts=np.ones(size, dtype=dtype),
                    ema_sums=centroids.copy(),
                    decay=decay,
                    population=n if population is None else population)


def ema_update(cb: Codebook, x: np.ndarray) -> None:
    """Assign rows of x to nearest centroids and fold them into the EMA."""
    x = np.asarray(x, dtype=cb.centroids.dtype)
    d2 = ((x * x).sum(axis=1, keepdims=True)
          - 2.0 * x @ cb.centroids.T
          + (cb.centroids * cb.centroids).sum(axis=1)[None, :])
    assign = np.argmin(d2, axis=1)
    counts = np.bincount(assign, minlength=cb.size).astype(cb.centroids.dtype)
    sums = np.zeros_like(cb.ema_sums)
    np.add.at(sums, assign, x)
    a = cb.decay
    cb.ema_counts = a * cb.ema_counts + (1.0 - a) * counts
    cb.ema_sums = a * cb.ema_sums + (1.0 - a) * sums
    cb.centroids = cb.ema_sums / np.maximum(cb.ema_counts, COUNT_EPS)[:, None]
    cb.assignments = assign
    cb.assignment_nodes = None


def population_bias(cb: Codebook) -> np.ndarray:
    """log of per-centroid population estimates, floored to stay finite."""
    total = float(cb.ema_counts.sum())
    if total <= 0.0:
        est = np.zeros_like(cb.ema_counts)
    else:
        est = cb.ema_counts * (cb.population / total)
    return np.log(np.maximum(est, BIAS_FLOOR))


@dataclass
class GlobalEncoderParams:
    mlp_a_w1: Tensor
    mlp_a_b1: Tensor
    mlp_a_w2: Tensor
    mlp_a_b2: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    mlp_b_w1: Tensor
    mlp_b_b1: Tensor
    mlp_b_w2: Tensor
    mlp_b_b2: Tensor


def init_global_encoder(store: ParamStore, rng: np.random.Generator,
                        d_in: int, d: int, prefix: str = "global",
                        dtype=np.float32) -> GlobalEncoderParams:
    zeros = lambda *shape: np.zeros(shape, dtype=dtype)
    xav = lambda fi, fo: xavier_uniform(rng, fi, fo, dtype)
    return GlobalEncoderParams(
        mlp_a_w1=store.add(f"{prefix}.mlpa.w1", xav(d_in, d)),
        mlp_a_b1=store.add(f"{prefix}.mlpa.b1", zeros(d)),
        mlp_a_w2=store.add(f"{prefix}.mlpa.w2", xav(d, d)),
        mlp_a_b2=store.add(f"{prefix}.mlpa.b2", zeros(d)),
        wq=store.add(f"{prefix}.attn.wq", xav(d, d)),
        bq=store.add(f"{prefix}.attn.bq", zeros(d)),
        wk=store.add(f"{prefix}.attn.wk", xav(d, d)),
        bk=store.add(f"{prefix}.attn.bk", zeros(d)),
        wv=store.add(f"{prefix}.attn.wv", xav(d, d)),
        bv=store.add(f"{prefix}.attn.bv", zeros(d)),
        mlp_b_w1=store.add(f"{prefix}.mlpb.w1", xav(d, d)),
        mlp_b_b1=store.add(f"{prefix}.mlpb.b1", zeros(d)),
        mlp_b_w2=store.add(f"{prefix}.mlpb.w2", xav(d, d)),
        mlp_b_b2=store.add(f"{prefix}.mlpb.b2", zeros(d)),
    )


def codebook_attention(x: Tensor, p: GlobalEncoderParams,
                       cb: Codebook) -> tuple[Tensor, Tensor]:
    """Single-head attention of queries x over the centroids.

    Returns (attended values, attention weights); scores are scaled by
    sqrt(D) and biased by the log population estimate per centroid.
    """
    d = x.shape[-1]
    mu = constant(cb.centroids.astype(x.dtype))
    q = linear(x, p.wq, p.bq)
    k = linear(mu, p.wk, p.bk)
    v = linear(mu, p.wv, p.bv)
    scores = mul(matmul(q, transpose(k, (1, 0))), 1.0 / np.sqrt(d))
    scores = add(scores, constant(population_bias(cb).astype(x.dtype)))
    attn = softmax(scores, axis=-1)
    return matmul(attn, v), attn


def global_forward(h_in: np.ndarray, p: GlobalEncoderParams, cb: Codebook | None,
                   training: bool = False) -> Tensor:
    """Global representations for a [M, D_in] batch of raw node features."""
    if cb is None:
        raise StateError("codebook not initialized; call init_codebook first")
    h = np.asarray(h_in)
    if h.ndim != 2:
        raise ContractViolation("global encoder expects a [M, D_in] matrix")
    x = linear(gelu(linear(constant(h), p.mlp_a_w1, p.mlp_a_b1)),
               p.mlp_a_w2, p.mlp_a_b2)
    attended, _ = codebook_attention(x, p, cb)
    out = linear(gelu(linear(attended, p.mlp_b_w1, p.mlp_b_b1)),
                 p.mlp_b_w2, p.mlp_b_b2)
    if training:
        ema_update(cb, x.data)
    return out
