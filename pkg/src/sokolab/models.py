"""The DRC(D,N) recurrent architecture and the feed-forward ResNet baseline.

Gate-conv wiring is fixed at 129 input channels for the default width:
32 encoded obs + 32 h-below + 32 pool-inject + 1 boundary + 32 own-h.
The fused gate output is ordered (f, i, g, o); this ordering and the
canonical parameter names are part of the weight-file contract.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import InitSpec, ParamStore, Tensor, init


@dataclass(frozen=True)
class DRCConfig:
    depth: int = 3          # D convolutional LSTM layers
    ticks: int = 3          # N repeats per environment step
    channels: int = 32
    hidden: int = 256
    height: int = 10
    width: int = 10

    def __post_init__(self):
        if self.depth < 1 or self.ticks < 1:
            raise ValueError("depth and ticks must be >= 1")


@dataclass(frozen=True)
class ResNetConfig:
    blocks: tuple[int, ...] = (32, 32, 64, 64, 64, 64, 64, 64, 64)
    kernel: int = 4
    hidden: int = 256
    height: int = 10
    width: int = 10


def _seed_for(root_seed: int, name: str) -> int:
    import zlib

    return int(np.random.SeedSequence([root_seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def _add(store: ParamStore, name: str, spec: InitSpec, shape, seed: int, dtype) -> None:
    store.add(name, init(spec, tuple(shape), _seed_for(seed, name)).astype(dtype))


def _trunc(fan_in: int | None = None) -> InitSpec:
    return InitSpec("truncated_normal", fan_in=fan_in)


_ZEROS = InitSpec("zeros")
_ORTHO = InitSpec("orthogonal")


def _encoder_params(store: ParamStore, channels: int, seed: int, dtype) -> None:
    _add(store, "encoder.conv0.w", _trunc(), (channels, 3, 4, 4), seed, dtype)
    _add(store, "encoder.conv0.b", _ZEROS, (channels,), seed, dtype)
    _add(store, "encoder.conv1.w", _trunc(), (channels, channels, 4, 4), seed, dtype)
    _add(store, "encoder.conv1.b", _ZEROS, (channels,), seed, dtype)


def _head_params(store: ParamStore, flat: int, hidden: int, seed: int, dtype) -> None:
    _add(store, "heads.hidden.w", _trunc(), (hidden, flat), seed, dtype)
    _add(store, "heads.hidden.b", _ZEROS, (hidden,), seed, dtype)
    _add(store, "heads.actor.w", _ORTHO, (4, hidden), seed, dtype)
    _add(store, "heads.actor.b", _ZEROS, (4,), seed, dtype)
    _add(store, "heads.critic.w", _ORTHO, (1, hidden), seed, dtype)
    _add(store, "heads.critic.b", _ZEROS, (1,), seed, dtype)


def build_drc_params(cfg: DRCConfig, seed: int = 0, dtype=np.float32) -> ParamStore:
    store = ParamStore()
    c = cfg.channels
    _encoder_params(store, c, seed, dtype)
    gate_in = 4 * c + 1  # obs + below + pool-inject + own-h, plus the boundary channel
    for layer in range(cfg.depth):
        _add(store, f"drc.l{layer}.gates.w", _trunc(), (4 * c, gate_in, 3, 3), seed, dtype)
        _add(store, f"drc.l{layer}.gates.b", InitSpec("forget_gate_plus_one", forget_slice=(0, c)),
             (4 * c,), seed, dtype)
        _add(store, f"drc.l{layer}.pool.w", _trunc(fan_in=2), (c, 2), seed, dtype)
    _head_params(store, c * cfg.height * cfg.width, cfg.hidden, seed, dtype)
    return store


def build_resnet_params(cfg: ResNetConfig, seed: int = 0, dtype=np.float32) -> ParamStore:
    store = ParamStore()
    k = cfg.kernel
    c_in = 3
    for b, c_out in enumerate(cfg.blocks):
        _add(store, f"resnet.b{b}.conv.w", _trunc(), (c_out, c_in, k, k), seed, dtype)
        _add(store, f"resnet.b{b}.conv.b", _ZEROS, (c_out,), seed, dtype)
        for s in range(2):
            _add(store, f"resnet.b{b}.sub{s}.w", _trunc(), (c_out, c_out, k, k), seed, dtype)
            _add(store, f"resnet.b{b}.sub{s}.b", _ZEROS, (c_out,), seed, dtype)
        c_in = c_out
    _head_params(store, cfg.blocks[-1] * cfg.height * cfg.width, cfg.hidden, seed, dtype)
    return store


def _boundary_map(height: int, width: int, dtype) -> np.ndarray:
    """(H+2)x(W+2) channel: ones on the border, zeros inside; fed unpadded."""
    m = np.zeros((height + 2, width + 2), dtype=dtype)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = 1
    return m


def obs_to_input(obs: np.ndarray, dtype=np.float32) -> np.ndarray:
    """[H,W,3] or [B,H,W,3] observation -> [B,3,H,W] network input."""
    arr = np.asarray(obs, dtype=dtype)
    if arr.ndim == 3:
        arr = arr[None]
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2))


_SAME4 = (1, 2, 1, 2)  # asymmetric same-padding for 4-wide kernels
_PAD1 = (1, 1, 1, 1)


class DRCModel:
    """Stateful recurrent policy; forward runs N ticks over D layers."""

    def __init__(self, cfg: DRCConfig = DRCConfig(), seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.params = build_drc_params(cfg, seed=seed, dtype=dtype)
        self._boundary = nn.constant(
            np.broadcast_to(_boundary_map(cfg.height, cfg.width, dtype), (1, 1, cfg.height + 2, cfg.width + 2)))

    def initial_state(self, batch: int) -> list[tuple[Tensor, Tensor]]:
        c, h, w = self.cfg.channels, self.cfg.height, self.cfg.width
        zeros = lambda: nn.constant(np.zeros((batch, c, h, w), dtype=self.dtype))
        return [(zeros(), zeros()) for _ in range(self.cfg.depth)]

    def encode_obs(self, x: Tensor) -> Tensor:
        p = self.params
        e = nn.conv2d(x, p["encoder.conv0.w"], p["encoder.conv0.b"], _SAME4)
        return nn.conv2d(e, p["encoder.conv1.w"], p["encoder.conv1.b"], _SAME4)

    def _cell(self, layer: int, encoded: Tensor, below: Tensor,
              h: Tensor, c: Tensor, batch: int) -> tuple[Tensor, Tensor]:
        p = self.params
        ch = self.cfg.channels
        pool_w = p[f"drc.l{layer}.pool.w"]
        pooled = nn.add(
            nn.channel_scale(nn.global_max_pool(h), _pool_col(pool_w, 0)),
            nn.channel_scale(nn.global_mean_pool(h), _pool_col(pool_w, 1)),
        )
        inject = nn.broadcast_spatial(pooled, self.cfg.height, self.cfg.width)
        # channel layout: encoded obs | h_below | pool-inject | boundary | own h
        gate_in = nn.boundary_concat([encoded, below, inject], self._boundary.data[0, 0], [h])
        gates = nn.conv2d(gate_in, p[f"drc.l{layer}.gates.w"], p[f"drc.l{layer}.gates.b"])
        f = nn.sigmoid(nn.slice_channels(gates, 0, ch))
        i = nn.sigmoid(nn.slice_channels(gates, ch, 2 * ch))
        g = nn.tanh(nn.slice_channels(gates, 2 * ch, 3 * ch))
        o = nn.tanh(nn.slice_channels(gates, 3 * ch, 4 * ch))  # nonstandard tanh output gate
        c_new = nn.add(nn.mul(f, c), nn.mul(i, g))
        h_new = nn.mul(o, nn.tanh(c_new))
        return h_new, c_new

    def forward(self, obs, state: list[tuple[Tensor, Tensor]]):
        """One environment step: N ticks, then policy/value heads.

        obs: [B,3,H,W] array or Tensor. Returns (logits [B,4], value [B], new state).
        """
        x = obs if isinstance(obs, Tensor) else nn.constant(np.asarray(obs, dtype=self.dtype))
        batch = x.shape[0]
        cfg = self.cfg
        encoded = self.encode_obs(x)
        hs = [h for h, _ in state]
        cs = [c for _, c in state]
        for _ in range(cfg.ticks):
            for layer in range(cfg.depth):
                # layer 0's below-input is layer D-1's h from the previous tick
                below = hs[layer - 1] if layer > 0 else hs[cfg.depth - 1]
                hs[layer], cs[layer] = self._cell(layer, encoded, below, hs[layer], cs[layer], batch)
        flat = nn.reshape(hs[cfg.depth - 1], (batch, cfg.channels * cfg.height * cfg.width))
        return self._heads(flat, batch) + (list(zip(hs, cs)),)

    def _heads(self, flat: Tensor, batch: int):
        p = self.params
        hidden = nn.relu(nn.affine(flat, p["heads.hidden.w"], p["heads.hidden.b"]))
        logits = nn.affine(hidden, p["heads.actor.w"], p["heads.actor.b"])
        value = nn.reshape(nn.affine(hidden, p["heads.critic.w"], p["heads.critic.b"]), (batch,))
        return logits, value


def _pool_col(w: Tensor, col: int) -> Tensor:
    """Column `col` of the [C,2] pool-inject weight as a [C] tensor."""
    return nn.reshape(nn.slice_channels(w, col, col + 1), (w.shape[0],))


class ResNetModel:
    """Feed-forward baseline; carries no recurrent state."""

    def __init__(self, cfg: ResNetConfig = ResNetConfig(), seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.params = build_resnet_params(cfg, seed=seed, dtype=dtype)

    def initial_state(self, batch: int):
        return None

    def forward(self, obs, state=None):
        x = obs if isinstance(obs, Tensor) else nn.constant(np.asarray(obs, dtype=self.dtype))
        batch = x.shape[0]
        p = self.params
        pad = nn.same_padding(self.cfg.kernel)
        padding = pad + pad
        for b in range(len(self.cfg.blocks)):
            x = nn.conv2d(x, p[f"resnet.b{b}.conv.w"], p[f"resnet.b{b}.conv.b"], padding)
            for s in range(2):
                branch = nn.conv2d(nn.relu(x), p[f"resnet.b{b}.sub{s}.w"], p[f"resnet.b{b}.sub{s}.b"], padding)
                x = nn.add(x, branch)
        flat = nn.reshape(x, (batch, self.cfg.blocks[-1] * self.cfg.height * self.cfg.width))
        hidden = nn.relu(nn.affine(flat, p["heads.hidden.w"], p["heads.hidden.b"]))
        logits = nn.affine(hidden, p["heads.actor.w"], p["heads.actor.b"])
        value = nn.reshape(nn.affine(hidden, p["heads.critic.w"], p["heads.critic.b"]), (batch,))
        return logits, value, None


ARCH_NAMES = ("drc33", "drc11", "resnet")


def build_model(arch: str, seed: int = 0, dtype=np.float32, height: int = 10, width: int = 10):
    """Construct one of the named architectures, sized to the board."""
    if arch == "drc33":
        return DRCModel(DRCConfig(3, 3, height=height, width=width), seed=seed, dtype=dtype)
    if arch == "drc11":
        return DRCModel(DRCConfig(1, 1, height=height, width=width), seed=seed, dtype=dtype)
    if arch == "resnet":
        return ResNetModel(ResNetConfig(height=height, width=width), seed=seed, dtype=dtype)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCH_NAMES}")
