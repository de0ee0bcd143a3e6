"""Parameter store, Adam, global-norm clipping, and L2 penalty terms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, parameter, scale, square, sum_all


class ParamStore:
    """Ordered name -> parameter tensor map with paired gradient slots."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = parameter(data)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def count_params(self) -> int:
        return sum(t.size for t in self._params.values())

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore()
        for name, t in self._params.items():
            out.add(name, t.data.astype(dtype))
        return out

    def copy_data(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_data(self, data: dict[str, np.ndarray]) -> None:
        for name, arr in data.items():
            t = self._params[name]
            if t.data.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: {t.data.shape} vs {arr.shape}")
            t.data = arr.astype(t.data.dtype, copy=True)


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1.5625e-7
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, beta1: float = 0.9, beta2: float = 0.99,
                   eps: float = 1.5625e-7) -> "AdamState":
        state = cls(beta1=beta1, beta2=beta2, eps=eps)
        for name, tensor in params.items():
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        return state


def adam_step(params: ParamStore, state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update from the gradients stored in params.

    Parameters without a gradient slot are treated as zero-gradient (moments
    still decay). Non-finite gradients fail fast.
    """
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, tensor in params.items():
        g = tensor.grad
        if g is None:
            g = np.zeros_like(tensor.data)
        elif not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        tensor.data = tensor.data - lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def global_grad_norm(params: ParamStore) -> float:
    total = 0.0
    for tensor in params.tensors():
        if tensor.grad is not None:
            total += float(np.sum(np.square(tensor.grad, dtype=np.float64)))
    return float(np.sqrt(total))


def clip_global_norm(params: ParamStore, max_norm: float = 2.5e-4) -> float:
    """Scale all gradients by max_norm/||g|| when the global norm exceeds it.

    Returns the pre-clip norm.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / norm
        for tensor in params.tensors():
            if tensor.grad is not None:
                tensor.grad *= factor
    return norm


def l2_penalty(tensors: list[Tensor], coefficient: float) -> Tensor:
    """coefficient * mean of squared entries over all given tensors."""
    if coefficient < 0:
        raise ValueError("coefficient must be >= 0")
    total = None
    count = 0
    for t in tensors:
        term = sum_all(square(t))
        total = term if total is None else _add_scalar(total, term)
        count += t.size
    if total is None or count == 0:
        raise ValueError("l2_penalty needs at least one non-empty tensor")
    return scale(total, coefficient / count)


def _add_scalar(a: Tensor, b: Tensor) -> Tensor:
    from .tensor import add

    return add(a, b)
