"""Named parameter store with Adam state."""

from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .tensor import Tensor


class ParamStore:
    """Registry of named trainable tensors plus Adam moment buffers."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.moment1: dict[str, np.ndarray] = {}
        self.moment2: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ContractViolation(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(data), requires_grad=True)
        self.params[name] = t
        self.moment1[name] = np.zeros_like(t.data)
        self.moment2[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}

    def load_arrays(self, mapping: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place, shapes must match."""
        for name, t in self.params.items():
            if name not in mapping:
                raise ContractViolation(f"checkpoint missing parameter {name!r}")
            arr = np.asarray(mapping[name], dtype=t.data.dtype)
            if arr.shape != t.data.shape:
                raise ContractViolation(
                    f"parameter {name!r} shape {arr.shape} != {t.data.shape}")
            t.data = arr.copy()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}


def adam_step(store: ParamStore, lr: float,
              betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> None:
    """One Adam update with bias correction over all params holding a grad."""
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in store.params.items():
        g = p.grad
        if g is None:
            continue
        m = store.moment1[name]
        v = store.moment2[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
