"""LPW1 flat weight files and LPP1 parity probes.

LPW1 layout (little-endian): magic "LPW1"; u32 tensor count; per tensor a
header of (u16 name length, UTF-8 name, u8 rank, rank x u32 dims, u8 dtype
with 0 = IEEE-754 f32); then payloads in header order, row-major, unpadded.

LPP1 is a sequence of length-prefixed named f32 blobs used to compare this
implementation against an externally produced forward pass.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .nn import ParamStore

LPW1_MAGIC = b"LPW1"
LPP1_MAGIC = b"LPP1"
DTYPE_F32 = 0


class WeightFormatError(ValueError):
    pass


def save_weights(params: ParamStore | dict[str, np.ndarray], path: str | Path) -> None:
    items = list(params.items())
    header = bytearray()
    header += LPW1_MAGIC
    header += struct.pack("<I", len(items))
    payload = bytearray()
    for name, tensor in items:
        data = tensor.data if hasattr(tensor, "data") else tensor
        arr = np.ascontiguousarray(np.asarray(data), dtype="<f4")
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise WeightFormatError(f"name too long: {name!r}")
        header += struct.pack("<H", len(name_bytes))
        header += name_bytes
        header += struct.pack("<B", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)
        header += struct.pack("<B", DTYPE_F32)
        payload += arr.tobytes()
    Path(path).write_bytes(bytes(header) + bytes(payload))


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != LPW1_MAGIC:
        raise WeightFormatError(f"{path}: bad magic {buf[:4]!r}")
    count = struct.unpack_from("<I", buf, 4)[0]
    off = 8
    entries: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", buf, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", buf, off)
        off += 4 * rank
        (dtype,) = struct.unpack_from("<B", buf, off)
        off += 1
        if dtype != DTYPE_F32:
            raise WeightFormatError(f"{path}: unsupported dtype {dtype} for {name!r}")
        entries.append((name, dims))
    out: dict[str, np.ndarray] = {}
    for name, dims in entries:
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(buf, dtype="<f4", count=n, offset=off).reshape(dims)
        off += 4 * n
        if name in out:
            raise WeightFormatError(f"{path}: duplicate tensor name {name!r}")
        out[name] = arr.copy()
    if off != len(buf):
        raise WeightFormatError(f"{path}: {len(buf) - off} trailing bytes")
    return out


def load_into(params: ParamStore, path: str | Path) -> None:
    """Load a weight file into an existing store; reports every mismatch."""
    loaded = load_weights(path)
    problems = []
    for name in params.names():
        if name not in loaded:
            problems.append(f"missing tensor: {name}")
        elif loaded[name].shape != params[name].shape:
            problems.append(
                f"shape mismatch for {name}: file {loaded[name].shape}, model {params[name].shape}")
    for name in loaded:
        if name not in params:
            problems.append(f"unexpected tensor: {name}")
    if problems:
        raise WeightFormatError(f"{path}: " + "; ".join(problems))
    params.load_data(loaded)


def weights_info(path: str | Path) -> dict:
    loaded = load_weights(path)
    return {
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in loaded.items()],
        "count": int(sum(v.size for v in loaded.values())),
    }


# ---------------------------------------------------------------------------
# LPP1 probes


def save_probe(blobs: dict[str, np.ndarray], path: str | Path) -> None:
    out = bytearray(LPP1_MAGIC)
    out += struct.pack("<I", len(blobs))
    for name, arr in blobs.items():
        arr = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
        name_bytes = name.encode("utf-8")
        out += struct.pack("<H", len(name_bytes))
        out += name_bytes
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += struct.pack("<Q", arr.nbytes)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


def load_probe(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != LPP1_MAGIC:
        raise WeightFormatError(f"{path}: bad probe magic {buf[:4]!r}")
    (count,) = struct.unpack_from("<I", buf, 4)
    off = 8
    blobs: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", buf, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", buf, off)
        off += 4 * rank
        (nbytes,) = struct.unpack_from("<Q", buf, off)
        off += 8
        arr = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=off).reshape(dims)
        off += nbytes
        blobs[name] = arr.copy()
    return blobs


def run_probe(weights_path: str | Path, probe_path: str | Path,
              logit_tol: float = 1e-4, summary_tol: float = 1e-3) -> dict:
    """Check a weight file against an externally generated probe.

    The probe carries an observation, expected logits/value, per-tick state
    summaries [N, D, 4] = (mean h, mean |h|, mean c, mean |c|), and the level
    encoded as ASCII codes so the renderer can be cross-checked byte-for-byte.
    """
    from .engine import render, reset
    from .levels import parse_level
    from .models import DRCConfig, DRCModel, obs_to_input
    from . import nn as _nn

    probe = load_probe(probe_path)
    obs = probe["observation"]
    n_ticks, depth, _ = probe["tick_summaries"].shape

    model = DRCModel(DRCConfig(depth=int(depth), ticks=int(n_ticks)))
    load_into(model.params, weights_path)

    report: dict = {"checks": {}}
    if "level_chars" in probe:
        text = "\n".join(
            "".join(chr(int(c)) for c in row) for row in probe["level_chars"])
        level = parse_level(text)
        state, rendered = reset(level, mode="eval")
        report["checks"]["render_bitwise"] = bool(
            rendered.tobytes() == np.asarray(obs, dtype=np.float32).tobytes())

    with _nn.no_grad():
        x = _nn.constant(obs_to_input(obs))
        encoded = model.encode_obs(x)
        hs = [h for h, _ in model.initial_state(1)]
        cs = [c for _, c in model.initial_state(1)]
        summaries = np.zeros((n_ticks, depth, 4), dtype=np.float32)
        for tick in range(n_ticks):
            for layer in range(depth):
                below = hs[layer - 1] if layer > 0 else hs[depth - 1]
                hs[layer], cs[layer] = model._cell(layer, encoded, below, hs[layer], cs[layer], 1)
                hd, cd = hs[layer].data, cs[layer].data
                summaries[tick, layer] = (hd.mean(), np.abs(hd).mean(), cd.mean(), np.abs(cd).mean())
        flat = _nn.reshape(hs[depth - 1], (1, model.cfg.channels * model.cfg.height * model.cfg.width))
        logits, value = model._heads(flat, 1)

    logit_err = float(np.max(np.abs(logits.data[0] - probe["logits"])))
    value_err = float(np.abs(value.data[0] - probe["value"][0]))
    summary_err = float(np.max(np.abs(summaries - probe["tick_summaries"])))
    report["logit_abs_err"] = logit_err
    report["value_abs_err"] = value_err
    report["tick_summary_abs_err"] = summary_err
    report["checks"]["logits"] = logit_err <= logit_tol
    report["checks"]["value"] = value_err <= logit_tol
    report["checks"]["tick_summaries"] = summary_err <= summary_tol
    report["pass"] = all(report["checks"].values())
    return report
