"""Deterministic parameter initializers.

Weight matrices use a normal truncated at 2 standard deviations, rescaled
so the realized standard deviation is sqrt(1/fan_in). Policy/value head
weights use orthonormal rows of norm 1. Biases are zero except the LSTM
forget-gate slice, which gets +1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

# std of a standard normal truncated at +/-2
_TRUNC = 2.0
_PHI2 = float(ndtr(_TRUNC))
_TRUNC_STD = float(np.sqrt(1.0 - 2.0 * _TRUNC * np.exp(-0.5 * _TRUNC**2) / np.sqrt(2 * np.pi) / (2 * _PHI2 - 1)))


@dataclass(frozen=True)
class InitSpec:
    """scheme: 'truncated_normal' | 'orthogonal' | 'zeros' | 'forget_gate_plus_one'."""

    scheme: str
    fan_in: int | None = None
    forget_slice: tuple[int, int] | None = None


def fan_in_of(shape: tuple[int, ...]) -> int:
    """Receptive-field size: C*kh*kw for conv kernels [O,C,kh,kw], in-dim for [O,I]."""
    if len(shape) == 4:
        return shape[1] * shape[2] * shape[3]
    if len(shape) == 2:
        return shape[1]
    raise ValueError(f"no fan-in convention for shape {shape}")


def truncated_normal(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """N(0,1) truncated at +/-2 via inverse CDF, scaled to std sqrt(1/fan_in)."""
    lo, hi = 1.0 - _PHI2, _PHI2
    u = rng.random(size=shape)
    z = ndtri(lo + u * (hi - lo))
    target = np.sqrt(1.0 / fan_in)
    return z * (target / _TRUNC_STD)


def orthogonal_rows(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Rows are orthonormal (norm 1). Requires rows <= cols."""
    rows, cols = shape
    if rows > cols:
        raise ValueError(f"orthogonal init needs rows <= cols, got {shape}")
    a = rng.standard_normal((cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix sign ambiguity for determinism
    return q.T.copy()


def init(spec: InitSpec, shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Materialize a parameter array; deterministic given (spec, shape, seed)."""
    rng = np.random.default_rng(seed)
    if spec.scheme == "truncated_normal":
        fan_in = spec.fan_in if spec.fan_in is not None else fan_in_of(shape)
        return truncated_normal(shape, fan_in, rng)
    if spec.scheme == "orthogonal":
        if len(shape) != 2:
            raise ValueError(f"orthogonal init needs a rank-2 shape, got {shape}")
        return orthogonal_rows(shape, rng)
    if spec.scheme == "zeros":
        return np.zeros(shape)
    if spec.scheme == "forget_gate_plus_one":
        if spec.forget_slice is None:
            raise ValueError("forget_gate_plus_one needs forget_slice")
        out = np.zeros(shape)
        lo, hi = spec.forget_slice
        out[lo:hi] = 1.0
        return out
    raise ValueError(f"unknown init scheme {spec.scheme!r}")
