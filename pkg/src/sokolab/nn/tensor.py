"""Reverse-mode autodiff over dense numpy arrays.

Each primitive records an explicit backward closure; there is no general
taping of arbitrary code. f32 is the compute dtype, f64 is used by the
gradient-check harness.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    """A dense array plus an optional gradient slot and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar tensor through the recorded graph."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr)


def constant(x, dtype=None) -> Tensor:
    arr = np.asarray(x, dtype=dtype)
    return Tensor(arr, requires_grad=False)


def parameter(x, dtype=None) -> Tensor:
    arr = np.array(x, dtype=dtype, copy=True)
    return Tensor(arr, requires_grad=True)


def _make(out_data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Wrap an op result, recording the graph edge only when grads are live."""
    track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=track)
    if track:
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# elementwise and shape primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g)

    return _make(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(-g)

    return _make(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * b_data)
        if b.requires_grad:
            b.accumulate_grad(g * a_data)

    return _make(a_data * b_data, (a, b), backward)


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * k)

    return _make(a.data * k, (a,), backward)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return _make(a.data * mask, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    from scipy.special import expit

    out_data = expit(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward)


def square(a: Tensor) -> Tensor:
    a_data = a.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * 2.0 * a_data)

    return _make(a_data * a_data, (a,), backward)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    in_shape = a.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(in_shape))

    return _make(a.data.reshape(shape), (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    in_shape = a.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.broadcast_to(g, in_shape))

    return _make(a.data.sum(), (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.size)


def slice_channels(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice along axis 1 of an [N, C, ...] tensor."""
    in_shape = a.shape

    def backward(g):
        if a.requires_grad:
            full = np.zeros(in_shape, dtype=g.dtype)
            full[:, start:stop] = g
            a.accumulate_grad(full)

    return _make(np.ascontiguousarray(a.data[:, start:stop]), (a,), backward)


def pad_spatial(a: Tensor, pads: tuple[int, int, int, int]) -> Tensor:
    """Zero-pad the last two axes of an [N, C, H, W] tensor by (top, bottom, left, right)."""
    pt, pb, pl, pr = pads

    def backward(g):
        if a.requires_grad:
            h, w = a.shape[-2], a.shape[-1]
            a.accumulate_grad(g[..., pt:pt + h, pl:pl + w])

    padded = np.pad(a.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    return _make(padded, (a,), backward)
