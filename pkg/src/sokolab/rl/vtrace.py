"""V-trace off-policy return correction (backward recursion form).

Terminal transitions mask bootstrapping: a done flag zeroes the next-state
value and cuts the trace.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VTraceConfig:
    gamma: float = 0.97
    lam: float = 0.5
    rho_clip: float = 1.0   # importance-weight clip for the value target
    c_clip: float = 1.0     # trace-cut clip

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must be in [0,1]")
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError("lambda must be in [0,1]")
        if not (self.rho_clip >= self.c_clip > 0.0):
            raise ValueError("need rho_clip >= c_clip > 0")


def vtrace(rewards: np.ndarray, dones: np.ndarray, mu_logp: np.ndarray,
           pi_logp: np.ndarray, values: np.ndarray,
           cfg: VTraceConfig = VTraceConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Compute v_s targets and policy-gradient advantages.

    rewards, dones, mu_logp, pi_logp: [K, T]; values: [K, T+1] including the
    bootstrap column. Returns (v_s [K, T], pg_advantages [K, T]).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    k, t_len = rewards.shape
    if values.shape != (k, t_len + 1):
        raise ValueError(f"values must be [K, T+1], got {values.shape}")
    log_ratio = np.asarray(pi_logp, dtype=np.float64) - np.asarray(mu_logp, dtype=np.float64)
    if not np.all(np.isfinite(log_ratio)):
        raise FloatingPointError("non-finite importance ratios")
    ratio = np.exp(log_ratio)
    rho = np.minimum(cfg.rho_clip, ratio)
    c = cfg.lam * np.minimum(cfg.c_clip, ratio)
    not_done = (~dones).astype(np.float64)
    vals = np.asarray(values, dtype=np.float64)

    next_values = vals[:, 1:] * not_done            # V(x_{s+1}), zeroed at terminals
    deltas = rho * (rewards + cfg.gamma * next_values - vals[:, :-1])

    vs_minus_v = np.zeros((k, t_len), dtype=np.float64)
    acc = np.zeros(k, dtype=np.float64)
    for s in range(t_len - 1, -1, -1):
        acc = deltas[:, s] + cfg.gamma * not_done[:, s] * c[:, s] * acc
        vs_minus_v[:, s] = acc
    vs = vs_minus_v + vals[:, :-1]

    vs_next = np.concatenate([vs[:, 1:], vals[:, -1:]], axis=1) * not_done
    pg_adv = rho * (rewards + cfg.gamma * vs_next - vals[:, :-1])
    return vs, pg_adv
