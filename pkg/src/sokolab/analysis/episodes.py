"""Thinking-step injection and sweeps.

A thinking step feeds the initial observation to the network and advances
its recurrent state without stepping the environment; the episode budget
and all downstream clocks count environment steps only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..engine import ACTION_CHARS, Action
from ..levels import Level, LevelId, LevelSet
from ..rl.evaluate import run_policy_episode


@dataclass(frozen=True)
class EpisodeRecord:
    """One evaluated episode with the full state-key trace."""

    level_id: LevelId
    thinking_steps: int
    solved: bool
    ret: float                      # undiscounted reward sum
    steps: int
    actions: tuple[Action, ...]
    state_keys: tuple              # length steps+1, (player, sorted boxes) per step
    boxes_seq: tuple               # identity-ordered box positions per step
    targets: frozenset

    def actions_str(self) -> str:
        return "".join(ACTION_CHARS[a] for a in self.actions)


def _to_record(ep: dict) -> EpisodeRecord:
    return EpisodeRecord(
        level_id=ep["level_id"],
        thinking_steps=ep["thinking_steps"],
        solved=ep["solved"],
        ret=ep["return"],
        steps=ep["steps"],
        actions=tuple(ep["actions"]),
        state_keys=tuple(ep["state_keys"]),
        boxes_seq=tuple(ep["boxes_seq"]),
        targets=ep["targets"],
    )


def run_with_thinking(model, level: Level, n: int, deterministic: bool = True,
                      seed: int = 0) -> EpisodeRecord:
    """Evaluate one level after n thinking steps; n = 0 is plain evaluation."""
    if n < 0:
        raise ValueError("thinking steps must be >= 0")
    import numpy as np

    rng = np.random.default_rng(seed)
    return _to_record(run_policy_episode(model, level, deterministic=deterministic,
                                         rng=rng, thinking_steps=n))


DEFAULT_NS = (0, 1, 2, 4, 6, 8, 10, 12, 16)


def thinking_sweep(model, levels: LevelSet | list[Level], ns=DEFAULT_NS,
                   deterministic: bool = True, seed: int = 0,
                   out_dir: str | Path | None = None) -> tuple[list[dict], dict[int, list[EpisodeRecord]]]:
    """Success rate per thinking-step count, plus the per-level records."""
    if not ns:
        raise ValueError("ns must be nonempty")
    level_list = list(levels.levels) if isinstance(levels, LevelSet) else list(levels)
    records: dict[int, list[EpisodeRecord]] = {}
    for n in ns:
        records[n] = [run_with_thinking(model, lv, n, deterministic=deterministic, seed=seed)
                      for lv in level_list]
    table = [
        {"n": n, "success_rate": sum(r.solved for r in recs) / len(recs)}
        for n, recs in records.items()
    ]
    if out_dir is not None:
        write_sweep_csv(Path(out_dir) / "thinking_sweep.csv", records)
    return table, records


def write_sweep_csv(path: str | Path, records: dict[int, list[EpisodeRecord]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["level_file", "level_idx", "n", "solved", "return", "steps"])
        for n in sorted(records):
            for r in records[n]:
                writer.writerow([r.level_id[1], r.level_id[2], n, int(r.solved),
                                 f"{r.ret:.4f}", r.steps])
