"""Transformer encoder over each node's 3K local tokens.

Pre-norm layers with full self-attention across the token set; no
positional encodings, the token multiset is unordered. A readout reduces
the 3K token outputs to one vector per node: mean over all tokens
(default, permutation invariant) or the seed token at slot 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .batcher import TokenBatch
from .errors import ContractViolation
from .nn import (ParamStore, Tensor, constant, dropout, ffn, layer_norm,
                 linear, mean, multi_head_attention, select_index,
                 xavier_uniform)

READOUTS = ("mean", "seed-token")


@dataclass
class EncoderLayerParams:
    ln1_gain: Tensor
    ln1_shift: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln2_gain: Tensor
    ln2_shift: Tensor
    ffn_w1: Tensor
    ffn_b1: Tensor
    ffn_w2: Tensor
    ffn_b2: Tensor


@dataclass
class LocalEncoderParams:
    w_in: Tensor
    b_in: Tensor
    heads: int
    readout: str
    layers: list[EncoderLayerParams] = field(default_factory=list)


def init_local_encoder(store: ParamStore, rng: np.random.Generator,
                       d_in: int, d: int, heads: int, num_layers: int,
                       ffn_mult: int = 2, readout: str = "mean",
                       prefix: str = "local", dtype=np.float32) -> LocalEncoderParams:
    if d % heads != 0:
        raise ContractViolation(f"model dim {d} not divisible by {heads} heads")
    if readout not in READOUTS:
        raise ContractViolation(f"readout must be one of {READOUTS}")
    zeros = lambda *shape: np.zeros(shape, dtype=dtype)
    ones = lambda *shape: np.ones(shape, dtype=dtype)
    xav = lambda fi, fo: xavier_uniform(rng, fi, fo, dtype)
    p = LocalEncoderParams(
        w_in=store.add(f"{prefix}.in.w", xav(d_in, d)),
        b_in=store.add(f"{prefix}.in.b", zeros(d)),
        heads=heads, readout=readout)
    h = ffn_mult * d
    for i in range(num_layers):
        lp = f"{prefix}.layer{i}"
        p.layers.append(EncoderLayerParams(
            ln1_gain=store.add(f"{lp}.ln1.g", ones(d)),
            ln1_shift=store.add(f"{lp}.ln1.b", zeros(d)),
            wq=store.add(f"{lp}.attn.wq", xav(d, d)),
            bq=store.add(f"{lp}.attn.bq", zeros(d)),
            wk=store.add(f"{lp}.attn.wk", xav(d, d)),
            bk=store.add(f"{lp}.attn.bk", zeros(d)),
            wv=store.add(f"{lp}.attn.wv", xav(d, d)),
            bv=store.add(f"{lp}.attn.bv", zeros(d)),
            wo=store.add(f"{lp}.attn.wo", xav(d, d)),
            bo=store.add(f"{lp}.attn.bo", zeros(d)),
            ln2_gain=store.add(f"{lp}.ln2.g", ones(d)),
            ln2_shift=store.add(f"{lp}.ln2.b", zeros(d)),
            ffn_w1=store.add(f"{lp}.ffn.w1", xav(d, h)),
            ffn_b1=store.add(f"{lp}.ffn.b1", zeros(h)),
            ffn_w2=store.add(f"{lp}.ffn.w2", xav(h, d)),
            ffn_b2=store.add(f"{lp}.ffn.b2", zeros(d)),
        ))
    return p


def local_forward(x: TokenBatch | np.ndarray, p: LocalEncoderParams,
                  training: bool = False, dropout_p: float = 0.0,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Encode a [M, 3K, D_in] token tensor into one [M, D] vector per node."""
    tokens = x.data if isinstance(x, TokenBatch) else np.asarray(x)
    if tokens.ndim != 3:
        raise ContractViolation("local encoder expects a [M, tokens, dim] tensor")
    h = linear(constant(tokens), p.w_in, p.b_in)
    for lp in p.layers:
        u = layer_norm(h, lp.ln1_gain, lp.ln1_shift)
        attn = multi_head_attention(
            linear(u, lp.wq, lp.bq), linear(u, lp.wk, lp.bk),
            linear(u, lp.wv, lp.bv), p.heads, lp.wo, lp.bo)
        h = h + dropout(attn, dropout_p, rng, training)
        u = layer_norm(h, lp.ln2_gain, lp.ln2_shift)
        f = ffn(u, lp.ffn_w1, lp.ffn_b1, lp.ffn_w2, lp.ffn_b2)
        h = h + dropout(f, dropout_p, rng, training)
    if p.readout == "mean":
        return mean(h, axis=1)
    return select_index(h, axis=1, index=0)
