"""IMPALA loss assembly: policy gradient, value, entropy, and L2 terms.

All terms are means over batch x time. Advantages are used raw; advantage
normalization is not supported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..nn import Tensor


@dataclass(frozen=True)
class LossConfig:
    value_coef: float = 0.25
    entropy_coef: float = 0.01
    logit_l2: float = 1.5625e-6
    head_l2: float = 1.5625e-8
    normalize_advantages: bool = False  # constant; kept to make the contract explicit

    def __post_init__(self):
        if self.normalize_advantages:
            raise ValueError("advantage normalization is forbidden")
        for name in ("value_coef", "entropy_coef", "logit_l2", "head_l2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def impala_loss(logits_seq: list[Tensor], values_seq: list[Tensor], actions: np.ndarray,
                vs_targets: np.ndarray, pg_advantages: np.ndarray,
                head_weights: list[Tensor], cfg: LossConfig = LossConfig()) -> tuple[Tensor, dict]:
    """Total loss plus a per-term breakdown (floats).

    logits_seq/values_seq: per-step graph tensors [K,4] and [K]; actions,
    vs_targets, pg_advantages: [K,T] arrays treated as constants.
    """
    k, t_len = actions.shape
    if len(logits_seq) != t_len or len(values_seq) != t_len:
        raise ValueError("sequence length mismatch")
    denom = float(k * t_len)

    pg_total = None
    v_total = None
    ent_total = None
    logit_sq_total = None
    for t in range(t_len):
        logits = logits_seq[t]
        lp = nn.take_rows(nn.log_softmax(logits), actions[:, t])
        pg_term = nn.sum_all(nn.mul(lp, nn.constant(pg_advantages[:, t].astype(logits.dtype))))
        diff = nn.sub(values_seq[t], nn.constant(vs_targets[:, t].astype(logits.dtype)))
        v_term = nn.sum_all(nn.square(diff))
        ent_term = nn.sum_all(nn.categorical_entropy(logits))
        sq_term = nn.sum_all(nn.square(logits))
        pg_total = pg_term if pg_total is None else nn.add(pg_total, pg_term)
        v_total = v_term if v_total is None else nn.add(v_total, v_term)
        ent_total = ent_term if ent_total is None else nn.add(ent_total, ent_term)
        logit_sq_total = sq_term if logit_sq_total is None else nn.add(logit_sq_total, sq_term)

    pg_loss = nn.scale(nn.neg(pg_total), 1.0 / denom)
    v_loss = nn.scale(v_total, cfg.value_coef / denom)
    ent_loss = nn.scale(nn.neg(ent_total), cfg.entropy_coef / denom)
    n_logits = denom * logits_seq[0].shape[1]
    logit_l2 = nn.scale(logit_sq_total, cfg.logit_l2 / n_logits)
    head_l2 = nn.l2_penalty(head_weights, cfg.head_l2)

    total = nn.add(nn.add(nn.add(nn.add(pg_loss, v_loss), ent_loss), logit_l2), head_l2)
    breakdown = {
        "pg": pg_loss.item(),
        "v": v_loss.item(),
        "ent": ent_loss.item(),
        "logit_l2": logit_l2.item(),
        "head_l2": head_l2.item(),
        "total": total.item(),
    }
    if not np.isfinite(breakdown["total"]):
        raise FloatingPointError(f"non-finite loss: {breakdown}")
    return total, breakdown
