"""The fused node-update model: local + global encoders, fusion FFN,
normalized residual, and a linear classification head.

One fused layer is applied (stacking hurt in every configuration we care
about); the residual is taken after the shared input projection so it is
well defined when the raw feature width differs from the hidden width.
The "local" variant drops the global branch entirely; zeroing the global
MLP output projection of a "full" model makes the two coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .batcher import TokenBatch
from .errors import ContractViolation, FormatError, ValidationError
from .global_encoder import (Codebook, GlobalEncoderParams, global_forward,
                             init_codebook, init_global_encoder)
from .local_encoder import (READOUTS, LocalEncoderParams, init_local_encoder,
                            local_forward)
from .nn import (ParamStore, Tensor, add, concat, constant, dropout, ffn,
                 layer_norm, linear, load_named_tensors, save_named_tensors,
                 xavier_uniform)

VARIANTS = ("local", "full")


@dataclass
class ModelConfig:
    num_classes: int
    d_in: int
    variant: str = "full"
    d: int = 256
    heads: int = 2
    k: int = 100
    b_centroids: int = 4096
    l_local: int = 1
    dropout: float = 0.5
    readout: str = "mean"
    ffn_mult: int = 2
    codebook_decay: float = 0.99

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractViolation(f"variant must be one of {VARIANTS}")
        if self.readout not in READOUTS:
            raise ContractViolation(f"readout must be one of {READOUTS}")
        if self.d % self.heads != 0:
            raise ContractViolation(
                f"hidden dim {self.d} not divisible by {self.heads} heads")
        if self.k < 1:
            raise ContractViolation("k must be >= 1")
        if self.variant == "full" and self.b_centroids < 1:
            raise ContractViolation("full variant needs b_centroids >= 1")
        if self.num_classes < 2:
            raise ContractViolation("need at least 2 classes")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractViolation("dropout must be in [0, 1)")


@dataclass
class ModelParams:
    local: LocalEncoderParams
    global_: GlobalEncoderParams | None
    codebook: Codebook | None
    fusion_w1: Tensor
    fusion_b1: Tensor
    fusion_w2: Tensor
    fusion_b2: Tensor
    norm_gain: Tensor
    norm_shift: Tensor
    cls_w: Tensor
    cls_b: Tensor


def init_model(cfg: ModelConfig, seed: int,
               dtype=np.float32) -> tuple[ParamStore, ModelParams]:
    """Build a fresh parameter store for the config. The codebook of a
    full-variant model starts unset; attach one via attach_codebook."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    local = init_local_encoder(store, rng, cfg.d_in, cfg.d, cfg.heads,
                               cfg.l_local, cfg.ffn_mult, cfg.readout,
                               dtype=dtype)
    glob = None
    if cfg.variant == "full":
        glob = init_global_encoder(store, rng, cfg.d_in, cfg.d, dtype=dtype)
    fuse_in = 2 * cfg.d if cfg.variant == "full" else cfg.d
    hidden = cfg.ffn_mult * cfg.d
    zeros = lambda *shape: np.zeros(shape, dtype=dtype)
    params = ModelParams(
        local=local, global_=glob, codebook=None,
        fusion_w1=store.add("fusion.w1", xavier_uniform(rng, fuse_in, hidden, dtype)),
        fusion_b1=store.add("fusion.b1", zeros(hidden)),
        fusion_w2=store.add("fusion.w2", xavier_uniform(rng, hidden, cfg.d, dtype)),
        fusion_b2=store.add("fusion.b2", zeros(cfg.d)),
        norm_gain=store.add("norm.g", np.ones(cfg.d, dtype=dtype)),
        norm_shift=store.add("norm.b", zeros(cfg.d)),
        cls_w=store.add("cls.w", xavier_uniform(rng, cfg.d, cfg.num_classes, dtype)),
        cls_b=store.add("cls.b", zeros(cfg.num_classes)),
    )
    return store, params


def attach_codebook(params: ModelParams, cfg: ModelConfig, sample_x: np.ndarray,
                    seed: int, population: int) -> None:
    params.codebook = init_codebook(cfg.b_centroids, sample_x, seed,
                                    decay=cfg.codebook_decay,
                                    population=population)


def mlp_a_apply(h_in: np.ndarray, p: GlobalEncoderParams) -> np.ndarray:
    """Plain forward through MLP_a, used to draw codebook init samples."""
    x = linear(gelu(linear(constant(np.asarray(h_in)), p.mlp_a_w1, p.mlp_a_b1)),
               p.mlp_a_w2, p.mlp_a_b2)
    return x.data


def model_forward(batch_nodes: np.ndarray, token_batch: TokenBatch | np.ndarray,
                  h_in_batch: np.ndarray, params: ModelParams, cfg: ModelConfig,
                  training: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Class logits for a batch: [M, num_classes]."""
    h_local = local_forward(token_batch, params.local, training,
                            cfg.dropout, rng)
    if cfg.variant == "full":
        h_global = global_forward(h_in_batch, params.global_, params.codebook,
                                  training)
        if training and params.codebook is not None:
            params.codebook.assignment_nodes = np.asarray(batch_nodes,
                                                          dtype=np.int64)
        fused_in = concat([h_local, h_global], axis=-1)
    else:
        fused_in = h_local
    hhat = ffn(fused_in, params.fusion_w1, params.fusion_b1,
               params.fusion_w2, params.fusion_b2)
    resid = linear(constant(np.asarray(h_in_batch)),
                   params.local.w_in, params.local.b_in)
    h_out = add(resid, layer_norm(hhat, params.norm_gain, params.norm_shift))
    h_out = dropout(h_out, cfg.dropout, rng, training)
    return linear(h_out, params.cls_w, params.cls_b)


# --- checkpoint serialization -------------------------------------------

_CODEBOOK_KEYS = ("codebook.centroids", "codebook.ema_counts", "codebook.ema_sums")


def _config_to_kv(cfg: ModelConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)!r}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def _config_from_kv(text: str) -> ModelConfig:
    import ast
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        values[key.strip()] = ast.literal_eval(raw.strip())
    names = {f.name for f in fields(ModelConfig)}
    unknown = set(values) - names
    if unknown:
        raise FormatError(f"unknown config keys {sorted(unknown)}")
    try:
        return ModelConfig(**values)  # type: ignore[arg-type]
    except TypeError as exc:
        raise FormatError(f"incomplete model config: {exc}") from exc


def save_checkpoint(dir_path: str | Path, cfg: ModelConfig, store: ParamStore,
                    codebook: Codebook | None) -> None:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    tensors = dict(store.arrays())
    extra = [f"codebook_present = {codebook is not None!r}"]
    if codebook is not None:
        tensors["codebook.centroids"] = codebook.centroids
        tensors["codebook.ema_counts"] = codebook.ema_counts
        tensors["codebook.ema_sums"] = codebook.ema_sums
        extra.append(f"codebook_decay = {codebook.decay!r}")
        extra.append(f"codebook_population = {codebook.population!r}")
    save_named_tensors(d / "tensors", tensors)
    (d / "config.kv").write_text(_config_to_kv(ModelConfig(**{
        f.name: getattr(cfg, f.name) for f in fields(cfg)})) +
        "\n".join(extra) + "\n")


def load_checkpoint(dir_path: str | Path) -> tuple[ModelConfig, ParamStore, ModelParams]:
    d = Path(dir_path)
    cfg_path = d / "config.kv"
    if not cfg_path.exists():
        raise FormatError(f"{d}: missing config.kv")
    text = cfg_path.read_text()
    cfg_lines, extra = [], {}
    for line in text.splitlines():
        key = line.split("=")[0].strip()
        if key.startswith("codebook_"):
            import ast
            extra[key] = ast.literal_eval(line.partition("=")[2].strip())
        else:
            cfg_lines.append(line)
    cfg = _config_from_kv("\n".join(cfg_lines))
    tensors = load_named_tensors(d / "tensors")
    store, params = init_model(cfg, seed=0)
    store.load_arrays({k: v for k, v in tensors.items()
                       if not k.startswith("codebook.")})
    if extra.get("codebook_present"):
        missing = [k for k in _CODEBOOK_KEYS if k not in tensors]
        if missing:
            raise FormatError(f"{d}: missing codebook tensors {missing}")
        params.codebook = Codebook(
            centroids=tensors["codebook.centroids"],
            ema_counts=tensors["codebook.ema_counts"],
            ema_sums=tensors["codebook.ema_sums"],
            decay=float(extra["codebook_decay"]),
            population=int(extra["codebook_population"]))
    elif cfg.variant == "full":
        raise ValidationError(f"{d}: full-variant checkpoint lacks a codebook")
    return cfg, store, params
