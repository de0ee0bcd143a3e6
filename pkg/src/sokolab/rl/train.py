"""IMPALA-style training: synchronous alternation of collection and learning.

Each iteration collects a batch with the current parameters and takes a
gradient step on the previous iteration's batch, preserving the one-iteration
pi/mu lag. The learning rate anneals linearly over total_steps.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import nn
from ..levels import LevelSet
from ..models import build_model
from ..weights_io import save_weights
from .evaluate import evaluate
from .loss import LossConfig, impala_loss
from .rollout import TrajectoryBatch, VectorRunner
from .vtrace import VTraceConfig, vtrace


@dataclass(frozen=True)
class TrainConfig:
    num_envs: int = 256
    unroll: int = 20
    total_steps: int = 2_002_944_000
    lr_start: float = 4e-4
    lr_end: float = 4e-6
    max_grad_norm: float = 2.5e-4
    seed: int = 0
    checkpoint_every: int = 100_000_000   # env steps between checkpoints (0 = final only)
    eval_every: int = 0                   # env steps between evals (0 = off)
    eval_sample: int = 64
    eval_deterministic: bool = True
    stop_at_eval_success: float | None = None  # desk-scale early stop

    def __post_init__(self):
        batch = self.num_envs * self.unroll
        if self.total_steps % batch != 0:
            raise ValueError(
                f"total_steps ({self.total_steps}) must be divisible by "
                f"num_envs*unroll ({batch})")


DESK_PROFILE = dict(num_envs=16, unroll=20, total_steps=2_048_000,
                    checkpoint_every=0, eval_every=64_000, eval_sample=100,
                    eval_deterministic=True, stop_at_eval_success=0.8)


def learning_rate(cfg: TrainConfig, env_steps: int) -> float:
    frac = min(1.0, env_steps / cfg.total_steps)
    return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * frac


def learner_step(model, batch: TrajectoryBatch, vtrace_cfg: VTraceConfig,
                 loss_cfg: LossConfig) -> tuple[nn.Tensor, dict, np.ndarray]:
    """Replay a batch through the model with gradients and build the loss."""
    k, t_len = batch.actions.shape
    recurrent = model.initial_state(1) is not None
    if recurrent:
        state = [(nn.constant(h), nn.constant(c))
                 for h, c in zip(batch.init_hs, batch.init_cs)]
    logits_seq: list[nn.Tensor] = []
    values_seq: list[nn.Tensor] = []
    for t in range(t_len):
        x = nn.constant(batch.obs[:, t])
        if recurrent:
            logits, value, state = model.forward(x, state)
            if batch.dones[:, t].any():
                # cut gradients and state across episode boundaries
                keep = (~batch.dones[:, t]).astype(np.float32)
                shape = state[0][0].shape
                mask = nn.constant(np.broadcast_to(keep[:, None, None, None], shape).copy())
                state = [(nn.mul(h, mask), nn.mul(c, mask)) for h, c in state]
        else:
            logits, value, _ = model.forward(x)
        logits_seq.append(logits)
        values_seq.append(value)
    if recurrent:
        _, boot_value, _ = model.forward(nn.constant(batch.bootstrap_obs), state)
    else:
        _, boot_value, _ = model.forward(nn.constant(batch.bootstrap_obs))

    values = np.stack([v.data for v in values_seq], axis=1)           # [K,T]
    values = np.concatenate([values, boot_value.data[:, None]], axis=1)
    pi_logp = np.zeros((k, t_len), dtype=np.float64)
    rows = np.arange(k)
    for t in range(t_len):
        z = logits_seq[t].data
        shifted = z - z.max(axis=1, keepdims=True)
        lp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        pi_logp[:, t] = lp[rows, batch.actions[:, t]]

    vs, pg_adv = vtrace(batch.rewards, batch.dones, batch.mu_logp, pi_logp, values, vtrace_cfg)
    head_weights = [model.params["heads.actor.w"], model.params["heads.critic.w"]]
    total, breakdown = impala_loss(logits_seq, values_seq, batch.actions, vs, pg_adv,
                                   head_weights, loss_cfg)
    return total, breakdown, values


def train(cfg: TrainConfig, arch: str, out_dir: str | Path, levels: LevelSet,
          eval_levels: LevelSet | None = None,
          vtrace_cfg: VTraceConfig = VTraceConfig(),
          loss_cfg: LossConfig = LossConfig(),
          log_every: int = 1) -> dict:
    """Run the training loop; returns final metrics and eval history."""
    out_dir = Path(out_dir)
    (out_dir / "weights").mkdir(parents=True, exist_ok=True)
    (out_dir / "records").mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / "metrics.jsonl"

    board = levels[0]
    model = build_model(arch, seed=cfg.seed, height=board.height, width=board.width)
    adam = nn.AdamState.for_params(model.params)
    runner = VectorRunner(model, levels, cfg.num_envs, seed=cfg.seed, mode="train")

    batch_steps = cfg.num_envs * cfg.unroll
    iterations = cfg.total_steps // batch_steps
    pending: TrajectoryBatch | None = None
    env_steps = 0
    eval_history: list[dict] = []
    recent_returns: list[float] = []
    recent_solved: list[bool] = []
    last_checkpoint = 0
    last_eval = 0
    stop_reason = "completed"

    with metrics_path.open("a") as metrics:
        for it in range(iterations):
            t0 = time.perf_counter()
            batch = runner.collect(cfg.unroll)
            env_steps += batch_steps
            recent_returns.extend(batch.episode_returns)
            recent_solved.extend(batch.episode_solved)

            breakdown = None
            grad_norm = 0.0
            if pending is not None:
                model.params.zero_grads()
                total, breakdown, _ = learner_step(model, pending, vtrace_cfg, loss_cfg)
                total.backward()
                grad_norm = nn.clip_global_norm(model.params, cfg.max_grad_norm)
                nn.adam_step(model.params, adam, learning_rate(cfg, env_steps))
            pending = batch

            sps = batch_steps / (time.perf_counter() - t0)
            if breakdown is not None and (it % log_every == 0):
                rec = {"step": env_steps, "loss": breakdown["total"], "pg": breakdown["pg"],
                       "v": breakdown["v"], "ent": breakdown["ent"],
                       "l2": breakdown["logit_l2"] + breakdown["head_l2"],
                       "grad_norm": grad_norm, "sps": round(sps, 1),
                       "lr": learning_rate(cfg, env_steps)}
                if recent_returns:
                    rec["episode_return"] = float(np.mean(recent_returns[-100:]))
                    rec["solve_rate"] = float(np.mean(recent_solved[-100:]))
                metrics.write(json.dumps(rec) + "\n")
                metrics.flush()

            if cfg.eval_every and eval_levels is not None and env_steps - last_eval >= cfg.eval_every:
                last_eval = env_steps
                ev = evaluate(model, eval_levels, sample=cfg.eval_sample,
                              deterministic=cfg.eval_deterministic, seed=cfg.seed)
                entry = {"step": env_steps, "success_rate": ev["success_rate"],
                         "mean_return": ev["mean_return"], "mean_length": ev["mean_length"]}
                eval_history.append(entry)
                metrics.write(json.dumps({"eval": entry}) + "\n")
                metrics.flush()
                _write_eval_records(out_dir / "records" / f"eval_{env_steps}.csv", ev["records"])
                if cfg.stop_at_eval_success is not None and \
                        ev["success_rate"] >= cfg.stop_at_eval_success:
                    stop_reason = "eval_threshold"
                    break

            if cfg.checkpoint_every and env_steps - last_checkpoint >= cfg.checkpoint_every:
                last_checkpoint = env_steps
                _save_checkpoint(model, adam, out_dir / "weights", env_steps)

    _save_checkpoint(model, adam, out_dir / "weights", env_steps)
    return {
        "env_steps": env_steps,
        "stop_reason": stop_reason,
        "eval_history": eval_history,
        "final_weights": str(out_dir / "weights" / f"step_{env_steps}.lpw1"),
        "config": asdict(cfg),
    }


def _save_checkpoint(model, adam: nn.AdamState, weights_dir: Path, env_steps: int) -> None:
    save_weights(model.params, weights_dir / f"step_{env_steps}.lpw1")
    opt = {f"adam.m.{k}": v for k, v in adam.m.items()}
    opt.update({f"adam.v.{k}": v for k, v in adam.v.items()})
    save_weights(opt, weights_dir / f"step_{env_steps}.adam.lpw1")
    (weights_dir / f"step_{env_steps}.adam.json").write_text(
        json.dumps({"t": adam.t, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps}))


def _write_eval_records(path: Path, records: list[dict]) -> None:
    import csv

    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["level_id", "solved", "return", "steps"])
        for r in records:
            writer.writerow(["/".join(map(str, r["level_id"])), int(r["solved"]),
                             f"{r['return']:.4f}", r["steps"]])
