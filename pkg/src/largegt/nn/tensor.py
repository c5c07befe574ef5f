"""Reverse-mode autodiff over numpy arrays.

A Tensor wraps a row-major numpy array plus an optional gradient buffer of
the same shape. Ops build a graph of parent links and backward closures;
backward() walks it in reverse topological order from a scalar loss.
Everything runs at the dtype of the inputs, so float64 inputs give a
double-precision graph for gradient checking while training stays float32.

One process-global op counter can be armed to measure matmul FLOPs by
scope (used to verify the attention cost scaling).
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import BoundsError, ContractViolation


class OpCounter:
    """Accumulates matmul FLOPs per named scope while armed."""

    def __init__(self):
        self.flops: dict[str, int] = {}
        self._scope = "default"

    def add(self, n: int) -> None:
        self.flops[self._scope] = self.flops.get(self._scope, 0) + n

    @contextmanager
    def scope(self, name: str):
        prev, self._scope = self._scope, name
        try:
            yield
        finally:
            self._scope = prev

    def total(self) -> int:
        return sum(self.flops.values())


_counter: OpCounter | None = None


@contextmanager
def count_flops():
    """Arm a fresh OpCounter for the duration of the block and yield it."""
    global _counter
    prev, _counter = _counter, OpCounter()
    try:
        yield _counter
    finally:
        _counter = prev


def _scope(name: str):
    if _counter is not None:
        return _counter.scope(name)
    return _null_scope()


@contextmanager
def _null_scope():
    yield


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _backward_fn=None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, grad={self.requires_grad})"

    def backward(self) -> None:
        if self.data.size != 1:
            raise ContractViolation("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def item(self) -> float:
        return float(self.data.reshape(()))

    # operator sugar so layer code reads like math
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=False)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _node(data, parents, backward_fn) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=tuple(parents),
                  _backward_fn=backward_fn if req else None)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _node(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ContractViolation("matmul requires tensors of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ContractViolation(f"matmul inner dims {a.shape} x {b.shape}")
    out_data = a.data @ b.data
    if _counter is not None:
        _counter.add(2 * out_data.size * a.shape[-1])

    def backward(g):
        _accum(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
        _accum(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))

    return _node(out_data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _node(out_data, (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a)
    inv = np.argsort(axes)
    out_data = a.data.transpose(axes)

    def backward(g):
        _accum(a, g.transpose(inv))

    return _node(out_data, (a,), backward)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape).copy())

    return _node(out_data, (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g / count, a.shape).copy())

    return _node(out_data, (a,), backward)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            _accum(t, piece)

    return _node(out_data, tuple(tensors), backward)


def select_index(a: Tensor, axis: int, index: int) -> Tensor:
    """Take one slice along an axis (e.g. the seed token at slot 0)."""
    a = _as_tensor(a)
    out_data = np.take(a.data, index, axis=axis)

    def backward(g):
        buf = np.zeros_like(a.data)
        sl = [slice(None)] * a.ndim
        sl[axis] = index
        buf[tuple(sl)] = g
        _accum(a, buf)

    return _node(out_data, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        _accum(a, out_data * (g - dot))

    return _node(out_data, (a,), backward)


_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    u = _GELU_C * (x + _GELU_A * x ** 3)
    t = np.tanh(u)
    out_data = 0.5 * x * (1.0 + t)

    def backward(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x ** 2)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du
        _accum(a, g * local)

    return _node(out_data, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, shift: Tensor,
               eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then rescale."""
    a, gain, shift = _as_tensor(a), _as_tensor(gain), _as_tensor(shift)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = gain.data * xhat + shift.data

    def backward(g):
        _accum(gain, _unbroadcast(g * xhat, gain.shape))
        _accum(shift, _unbroadcast(g, shift.shape))
        if a.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _accum(a, inv * (dxhat - m1 - xhat * m2))

    return _node(out_data, (a, gain, shift), backward)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood over [M, C] logits, log-sum-exp stabilized."""
    logits = _as_tensor(logits)
    if logits.ndim != 2:
        raise ContractViolation("cross entropy expects [M, C] logits")
    labels = np.asarray(labels, dtype=np.int64)
    m, c = logits.shape
    if labels.shape != (m,):
        raise ContractViolation(f"labels shape {labels.shape} != ({m},)")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise BoundsError(f"label out of [0, {c})")
    x = logits.data
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    out_data = np.asarray(-logp[np.arange(m), labels].mean(), dtype=x.dtype)

    def backward(g):
        p = np.exp(logp)
        p[np.arange(m), labels] -= 1.0
        _accum(logits, g * p / m)

    return _node(out_data, (logits,), backward)
