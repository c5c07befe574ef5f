from .tensor import (Tensor, OpCounter, add, concat, constant, count_flops,
                     gelu, layer_norm, matmul, mean, mul, reshape, select_index,
                     softmax, softmax_cross_entropy, sum_, transpose)
from .layers import dropout, ffn, linear, multi_head_attention, xavier_uniform
from .optim import ParamStore, adam_step
from .checkpoint import digest_dir, load_named_tensors, save_named_tensors

__all__ = [
    "Tensor", "OpCounter", "add", "concat", "constant", "count_flops", "gelu",
    "layer_norm", "matmul", "mean", "mul", "reshape", "select_index", "softmax",
    "softmax_cross_entropy", "sum_", "transpose",
    "dropout", "ffn", "linear", "multi_head_attention", "xavier_uniform",
    "ParamStore", "adam_step",
    "digest_dir", "load_named_tensors", "save_named_tensors",
]
