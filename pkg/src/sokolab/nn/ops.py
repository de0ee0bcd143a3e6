"""Neural-net primitives (forward + backward) on top of the Tensor core.

Shapes follow the NCHW convention. conv2d is a stride-1 cross-correlation
with explicit per-side padding; same-size padding for even kernels is
asymmetric (1 before, 2 after).
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, _make


def same_padding(k: int) -> tuple[int, int]:
    """(before, after) padding that keeps H/W unchanged for a k-wide kernel."""
    if k == 3:
        return (1, 1)
    if k == 4:
        return (1, 2)
    before = (k - 1) // 2
    return (before, k - 1 - before)


def _im2col(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """[N,C,Hp,Wp] -> [N*Ho*Wo, C*kh*kw] patch matrix (copies)."""
    n, c, hp, wp = xp.shape
    ho, wo = hp - kh + 1, wp - kw + 1
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, shape=(n, ho, wo, c, kh, kw), strides=(s0, s2, s3, s1, s2, s3)
    )
    return np.ascontiguousarray(view).reshape(n * ho * wo, c * kh * kw)


def conv2d(x: Tensor, w: Tensor, b: Tensor, padding: tuple[int, int, int, int] = (0, 0, 0, 0)) -> Tensor:
    """Stride-1 cross-correlation. x:[N,C,H,W], w:[O,C,kh,kw], b:[O] -> [N,O,Ho,Wo]."""
    n, c, h, wd = x.shape
    o, cw, kh, kw = w.shape
    if cw != c:
        raise ValueError(f"conv2d channel mismatch: input {c}, kernel {cw}")
    if b.shape != (o,):
        raise ValueError(f"conv2d bias shape {b.shape}, expected ({o},)")
    pt, pb, pl, pr = padding
    if any(p > 0 for p in padding):
        xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    else:
        xp = x.data
    ho, wo = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
    cols = _im2col(xp, kh, kw)                       # [N*Ho*Wo, C*kh*kw]
    w_mat = w.data.reshape(o, c * kh * kw)
    out = cols @ w_mat.T + b.data                    # [N*Ho*Wo, O]
    out_data = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    out_data = np.ascontiguousarray(out_data)

    def backward(g):
        gr = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, o)
        if b.requires_grad:
            b.accumulate_grad(gr.sum(axis=0))
        if w.requires_grad:
            w.accumulate_grad((gr.T @ cols).reshape(o, c, kh, kw))
        if x.requires_grad:
            dcols = gr @ w_mat                       # [N*Ho*Wo, C*kh*kw]
            dcols = dcols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + ho, j:j + wo] += dcols[:, :, i, j]
            x.accumulate_grad(dxp[:, :, pt:pt + h, pl:pl + wd])

    return _make(out_data, (x, w, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x:[B,I] @ w:[O,I]^T + b:[O] -> [B,O]."""
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"affine shape mismatch: x {x.shape}, w {w.shape}")
    x_data, w_data = x.data, w.data
    out_data = x_data @ w_data.T + b.data

    def backward(g):
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0))
        if w.requires_grad:
            w.accumulate_grad(g.T @ x_data)
        if x.requires_grad:
            x.accumulate_grad(g @ w_data)

    return _make(out_data, (x, w, b), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * p).sum(axis=-1, keepdims=True)
            x.accumulate_grad(p * (g - dot))

    return _make(p, (x,), backward)


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out_data = z - lse
    p = np.exp(out_data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g - p * g.sum(axis=-1, keepdims=True))

    return _make(out_data, (x,), backward)


def categorical_entropy(logits: Tensor) -> Tensor:
    """Entropy of softmax(logits) over the last axis, one value per row."""
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    p = np.exp(logp)
    ent = -(p * logp).sum(axis=-1)

    def backward(g):
        if logits.requires_grad:
            # dH/dz_j = -p_j (log p_j + H)
            logits.accumulate_grad(g[..., None] * (-p * (logp + ent[..., None])))

    return _make(ent, (logits,), backward)


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Select x[i, index[i]] per row of a [B, A] tensor -> [B]."""
    idx = np.asarray(index, dtype=np.int64)
    rows = np.arange(x.shape[0])
    out_data = x.data[rows, idx]

    def backward(g):
        if x.requires_grad:
            full = np.zeros(x.shape, dtype=g.dtype)
            full[rows, idx] = g
            x.accumulate_grad(full)

    return _make(out_data, (x,), backward)


def global_max_pool(x: Tensor) -> Tensor:
    """[N,C,H,W] -> [N,C] per-channel spatial max."""
    n, c, h, w = x.shape
    flat = x.data.reshape(n, c, h * w)
    arg = flat.argmax(axis=2)
    out_data = np.take_along_axis(flat, arg[..., None], axis=2)[..., 0]

    def backward(g):
        if x.requires_grad:
            full = np.zeros((n, c, h * w), dtype=g.dtype)
            np.put_along_axis(full, arg[..., None], g[..., None], axis=2)
            x.accumulate_grad(full.reshape(n, c, h, w))

    return _make(out_data, (x,), backward)


def global_mean_pool(x: Tensor) -> Tensor:
    """[N,C,H,W] -> [N,C] per-channel spatial mean."""
    n, c, h, w = x.shape
    out_data = x.data.mean(axis=(2, 3))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.broadcast_to(g[..., None, None] / (h * w), (n, c, h, w)))

    return _make(out_data, (x,), backward)


def channel_concat(parts: list[Tensor]) -> Tensor:
    """Concatenate [N,C_i,H,W] tensors along the channel axis."""
    sizes = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + sizes)
    out_data = np.concatenate([p.data for p in parts], axis=1)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p.accumulate_grad(g[:, lo:hi])

    return _make(out_data, tuple(parts), backward)


def boundary_concat(parts_before: list[Tensor], boundary: np.ndarray,
                    parts_after: list[Tensor]) -> Tensor:
    """Zero-pad [N,C,H,W] parts by 1 per side and concat with a native-size
    boundary channel between the groups (single allocation)."""
    n, _, h, w = parts_before[0].shape
    parts = list(parts_before) + list(parts_after)
    sizes = [p.shape[1] for p in parts_before] + [1] + [p.shape[1] for p in parts_after]
    total = sum(sizes)
    out_data = np.zeros((n, total, h + 2, w + 2), dtype=parts[0].dtype)
    offsets = np.cumsum([0] + sizes)
    slots = list(zip(parts_before, offsets[:len(parts_before)])) + \
        list(zip(parts_after, offsets[len(parts_before) + 1:]))
    for p, lo in slots:
        out_data[:, lo:lo + p.shape[1], 1:-1, 1:-1] = p.data
    b_idx = offsets[len(parts_before)]
    out_data[:, b_idx] = boundary

    def backward(g):
        for p, lo in slots:
            if p.requires_grad:
                p.accumulate_grad(g[:, lo:lo + p.shape[1], 1:-1, 1:-1])

    return _make(out_data, tuple(parts), backward)


def broadcast_spatial(x: Tensor, h: int, w: int) -> Tensor:
    """[N,C] -> [N,C,H,W] by tiling each per-channel scalar."""
    out_data = np.broadcast_to(x.data[..., None, None], x.shape + (h, w)).copy()

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g.sum(axis=(2, 3)))

    return _make(out_data, (x,), backward)


def channel_scale(x: Tensor, w: Tensor) -> Tensor:
    """Scale [N,C] rows by a per-channel weight vector [C]."""
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"channel_scale mismatch: x {x.shape}, w {w.shape}")
    x_data, w_data = x.data, w.data

    def backward(g):
        if w.requires_grad:
            w.accumulate_grad((g * x_data).sum(axis=0))
        if x.requires_grad:
            x.accumulate_grad(g * w_data)

    return _make(x_data * w_data, (x, w), backward)
