"""Policy evaluation over a level set (eval-mode resets, 120-step cap)."""
from __future__ import annotations

import numpy as np

from .. import nn
from ..engine import Action, reset, step
from ..levels import Level, LevelSet, sample_levels
from ..models import obs_to_input


def run_policy_episode(model, level: Level, deterministic: bool = True,
                       rng: np.random.Generator | None = None,
                       thinking_steps: int = 0) -> dict:
    """One eval episode; optional thinking steps advance only the net state.

    Thinking feeds the initial observation `thinking_steps` times without
    stepping the environment or consuming episode budget.
    """
    state, obs = reset(level, mode="eval")
    rec = model.initial_state(1)
    x = nn.constant(obs_to_input(obs))
    actions: list[Action] = []
    state_keys = [state.key()]
    box_seq = [state.boxes]
    total = 0.0
    with nn.no_grad():
        for _ in range(thinking_steps):
            if rec is None:
                break  # feed-forward nets have no state to advance
            _, _, rec = model.forward(x, rec)
        while True:
            logits, _, rec = model.forward(x, rec)
            row = logits.data[0]
            if deterministic:
                a = Action(int(np.argmax(row)))
            else:
                shifted = row - row.max()
                p = np.exp(shifted) / np.exp(shifted).sum()
                a = Action(int(rng.choice(4, p=p)))
            state, result, obs = step(state, a)
            x = nn.constant(obs_to_input(obs))
            actions.append(a)
            state_keys.append(state.key())
            box_seq.append(state.boxes)
            total += result.reward
            if result.done:
                break
    return {
        "level_id": state.level_id,
        "thinking_steps": thinking_steps,
        "solved": state.solved,
        "return": total,
        "steps": len(actions),
        "actions": actions,
        "state_keys": state_keys,
        "boxes_seq": box_seq,
        "targets": state.targets,
    }


def evaluate(model, levels: LevelSet, sample: int | None = None, deterministic: bool = True,
             seed: int = 0, thinking_steps: int = 0) -> dict:
    """Success rate / mean return / mean length over (a sample of) a level set."""
    if sample is not None and sample < len(levels):
        chosen = sample_levels(levels, sample, seed)
    else:
        chosen = list(levels.levels)
    rng = np.random.default_rng(seed)
    records = []
    for level in chosen:
        ep = run_policy_episode(model, level, deterministic=deterministic, rng=rng,
                                thinking_steps=thinking_steps)
        records.append({
            "level_id": ep["level_id"],
            "solved": ep["solved"],
            "return": ep["return"],
            "steps": ep["steps"],
        })
    n = len(records)
    return {
        "n": n,
        "success_rate": sum(r["solved"] for r in records) / n,
        "mean_return": float(np.mean([r["return"] for r in records])),
        "mean_length": float(np.mean([r["steps"] for r in records])),
        "records": records,
    }
