"""Neural layers composed from the autodiff primitives.

Shapes follow the transformer convention [batch, tokens, dim]; linear
flattens leading axes so every projection is a single 2-D GEMM.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .tensor import (Tensor, add, concat, constant, gelu, layer_norm, matmul,
                     mul, reshape, softmax, transpose, _scope)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: [..., in] -> [..., out]."""
    if x.shape[-1] != w.shape[0]:
        raise ContractViolation(
            f"linear: input dim {x.shape[-1]} != weight fan-in {w.shape[0]}")
    lead = x.shape[:-1]
    x2 = reshape(x, (-1, w.shape[0])) if x.ndim != 2 else x
    y = matmul(x2, w)
    if b is not None:
        y = add(y, b)
    if x.ndim != 2:
        y = reshape(y, lead + (w.shape[1],))
    return y


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, heads: int,
                         w_out: Tensor, b_out: Tensor,
                         bias: Tensor | None = None) -> Tensor:
    """Scaled dot-product attention with head split/merge and output projection.

    q, k, v are already-projected [B, T, D] tensors. The optional bias is
    added to every pre-softmax score row and must broadcast over keys,
    e.g. shape [Tk] or [B, 1, 1, Tk].
    """
    if q.ndim != 3 or k.ndim != 3 or v.ndim != 3:
        raise ContractViolation("attention expects [batch, tokens, dim] inputs")
    d = q.shape[-1]
    if d % heads != 0:
        raise ContractViolation(f"model dim {d} not divisible by {heads} heads")
    dh = d // heads
    bsz, tq = q.shape[0], q.shape[1]
    tk = k.shape[1]

    def split(t: Tensor, tlen: int) -> Tensor:
        t = reshape(t, (bsz, tlen, heads, dh))
        return transpose(t, (0, 2, 1, 3))

    qh, kh, vh = split(q, tq), split(k, tk), split(v, tk)
    with _scope("attention"):
        scores = mul(matmul(qh, transpose(kh, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        if bias is not None:
            if bias.ndim == 1:
                bias = reshape(bias, (1, 1, 1, tk))
            scores = add(scores, bias)
        attn = softmax(scores, axis=-1)
        out = matmul(attn, vh)
    out = reshape(transpose(out, (0, 2, 1, 3)), (bsz, tq, d))
    return linear(out, w_out, b_out)


def ffn(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Two-layer position-wise feed-forward with GELU nonlinearity."""
    return linear(gelu(linear(x, w1, b1)), w2, b2)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None,
            training: bool) -> Tensor:
    """Standard inverted dropout; identity when eval or p == 0."""
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ContractViolation(f"dropout rate {p} outside [0, 1)")
    if rng is None:
        raise ContractViolation("training-mode dropout needs an RNG")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, constant(mask))


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
