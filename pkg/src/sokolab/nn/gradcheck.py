"""Finite-difference gradient checking for every differentiable primitive.

Analytic gradients are compared against central differences at f64. Large
tensors are checked on a seed-pinned random subset of coordinates.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import ops
from .tensor import Tensor, constant, mean_all, mul, parameter, relu, sigmoid, square, sum_all, tanh


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: dict[str, Tensor],
    eps: float = 1e-5,
    max_coords: int = 200,
    seed: int = 0,
) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients.

    `fn` must be a deterministic scalar function of the tensors in `inputs`
    (closed over them); every input must be f64.
    """
    for name, t in inputs.items():
        if t.dtype != np.float64:
            raise ValueError(f"gradcheck input {name!r} must be float64")
        t.grad = None
    out = fn()
    out.backward()
    analytic = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for name, t in inputs.items()}

    rng = np.random.default_rng(seed)
    errors: dict[str, float] = {}
    for name, t in inputs.items():
        flat = t.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        worst = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = fn().item()
            flat[idx] = orig - eps
            f_minus = fn().item()
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            a = analytic[name].reshape(-1)[idx]
            denom = max(1e-6, abs(a) + abs(numeric))
            worst = max(worst, abs(a - numeric) / denom)
        errors[name] = worst
    return errors


def _rand(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape)


def primitive_check_suite(seed: int = 0) -> dict[str, float]:
    """Run the per-primitive harness; returns op -> max relative error."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}

    def weighted(out: Tensor, rng: np.random.Generator) -> Tensor:
        w = constant(rng.standard_normal(out.shape))
        return sum_all(mul(out, w))

    # conv2d: valid and asymmetric same padding for the 4-wide kernel
    x = parameter(_rand(rng, 2, 3, 6, 6))
    w = parameter(_rand(rng, 4, 3, 3, 3) * 0.5)
    b = parameter(_rand(rng, 4))
    cw = constant(rng.standard_normal((2, 4, 6, 6)))
    results["conv2d_same3"] = max(check_gradients(
        lambda: sum_all(mul(ops.conv2d(x, w, b, (1, 1, 1, 1)), cw)),
        {"x": x, "w": w, "b": b}).values())

    x4 = parameter(_rand(rng, 2, 2, 6, 6))
    w4 = parameter(_rand(rng, 3, 2, 4, 4) * 0.5)
    b4 = parameter(_rand(rng, 3))
    cw4 = constant(rng.standard_normal((2, 3, 6, 6)))
    results["conv2d_same4"] = max(check_gradients(
        lambda: sum_all(mul(ops.conv2d(x4, w4, b4, (1, 2, 1, 2)), cw4)),
        {"x": x4, "w": w4, "b": b4}).values())

    xv = parameter(_rand(rng, 2, 3, 7, 7))
    wv = parameter(_rand(rng, 4, 3, 3, 3) * 0.5)
    bv = parameter(_rand(rng, 4))
    cwv = constant(rng.standard_normal((2, 4, 5, 5)))
    results["conv2d_valid"] = max(check_gradients(
        lambda: sum_all(mul(ops.conv2d(xv, wv, bv), cwv)),
        {"x": xv, "w": wv, "b": bv}).values())

    xa = parameter(_rand(rng, 5, 7))
    wa = parameter(_rand(rng, 4, 7))
    ba = parameter(_rand(rng, 4))
    cwa = constant(rng.standard_normal((5, 4)))
    results["affine"] = max(check_gradients(
        lambda: sum_all(mul(ops.affine(xa, wa, ba), cwa)),
        {"x": xa, "w": wa, "b": ba}).values())

    for name, unary in (("relu", relu), ("tanh", tanh), ("sigmoid", sigmoid), ("square", square)):
        xu = parameter(_rand(rng, 4, 6) + 0.1)  # keep clear of the relu kink
        cwu = constant(rng.standard_normal((4, 6)))
        results[name] = max(check_gradients(
            lambda u=unary, xt=xu, c=cwu: sum_all(mul(u(xt), c)),
            {"x": xu}).values())

    xs = parameter(_rand(rng, 6, 4))
    cws = constant(rng.standard_normal((6, 4)))
    results["softmax"] = max(check_gradients(
        lambda: sum_all(mul(ops.softmax(xs), cws)), {"x": xs}).values())
    results["log_softmax"] = max(check_gradients(
        lambda: sum_all(mul(ops.log_softmax(xs), cws)), {"x": xs}).values())

    xe = parameter(_rand(rng, 6, 4))
    cwe = constant(rng.standard_normal(6))
    results["categorical_entropy"] = max(check_gradients(
        lambda: sum_all(mul(ops.categorical_entropy(xe), cwe)), {"x": xe}).values())

    xt = parameter(_rand(rng, 5, 4))
    idx = rng.integers(0, 4, size=5)
    cwt = constant(rng.standard_normal(5))
    results["take_rows"] = max(check_gradients(
        lambda: sum_all(mul(ops.take_rows(xt, idx), cwt)), {"x": xt}).values())

    xp = parameter(_rand(rng, 3, 4, 5, 5))
    cpool = constant(rng.standard_normal((3, 4)))
    results["global_max_pool"] = max(check_gradients(
        lambda: sum_all(mul(ops.global_max_pool(xp), cpool)), {"x": xp}).values())
    results["global_mean_pool"] = max(check_gradients(
        lambda: sum_all(mul(ops.global_mean_pool(xp), cpool)), {"x": xp}).values())

    xc1 = parameter(_rand(rng, 2, 3, 4, 4))
    xc2 = parameter(_rand(rng, 2, 2, 4, 4))
    cwc = constant(rng.standard_normal((2, 5, 4, 4)))
    results["channel_concat"] = max(check_gradients(
        lambda: sum_all(mul(ops.channel_concat([xc1, xc2]), cwc)),
        {"a": xc1, "b": xc2}).values())

    xb = parameter(_rand(rng, 3, 4))
    cwb = constant(rng.standard_normal((3, 4, 5, 6)))
    results["broadcast_spatial"] = max(check_gradients(
        lambda: sum_all(mul(ops.broadcast_spatial(xb, 5, 6), cwb)), {"x": xb}).values())

    xcs = parameter(_rand(rng, 4, 6))
    wcs = parameter(_rand(rng, 6))
    cwcs = constant(rng.standard_normal((4, 6)))
    results["channel_scale"] = max(check_gradients(
        lambda: sum_all(mul(ops.channel_scale(xcs, wcs), cwcs)),
        {"x": xcs, "w": wcs}).values())

    from .tensor import pad_spatial, slice_channels

    xpd = parameter(_rand(rng, 2, 3, 4, 4))
    cwpd = constant(rng.standard_normal((2, 3, 7, 7)))
    results["pad_spatial"] = max(check_gradients(
        lambda: sum_all(mul(pad_spatial(xpd, (1, 2, 1, 2)), cwpd)), {"x": xpd}).values())

    xsc = parameter(_rand(rng, 2, 6, 3, 3))
    cwsc = constant(rng.standard_normal((2, 3, 3, 3)))
    results["slice_channels"] = max(check_gradients(
        lambda: sum_all(mul(slice_channels(xsc, 2, 5), cwsc)), {"x": xsc}).values())

    xm = parameter(_rand(rng, 4, 5))
    results["mean_all"] = max(check_gradients(lambda: mean_all(square(xm)), {"x": xm}).values())

    return results
