"""Deterministic Sokoban dynamics, rewards, and one-pixel-per-tile rendering.

Stepping is pure: (state, action) -> new state. Episode length is sampled
uniformly from {91..120} in train mode and fixed at 120 in eval mode.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .levels import Level, LevelId

STEP_PENALTY = -0.1
ON_TARGET_REWARD = 1.0
OFF_TARGET_PENALTY = -1.0
FINISH_REWARD = 10.0

MIN_EPISODE_STEPS = 91
MAX_EPISODE_STEPS = 120

# one RGB pixel per tile, /255; wall black per the reference renderer
PALETTE = {
    "wall": (0, 0, 0),
    "floor": (243, 248, 238),
    "target": (254, 126, 125),
    "box_on_target": (254, 95, 56),
    "box": (142, 121, 56),
    "player": (160, 212, 56),
    "player_on_target": (219, 212, 56),
}


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


ACTION_DELTAS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}

ACTION_CHARS = {Action.UP: "U", Action.DOWN: "D", Action.LEFT: "L", Action.RIGHT: "R"}
CHAR_ACTIONS = {v: k for k, v in ACTION_CHARS.items()}


class EpisodeOver(RuntimeError):
    """Raised when stepping a finished or truncated episode."""


@dataclass(frozen=True)
class StepEvents:
    pushed_on_target: bool = False
    pushed_off_target: bool = False
    finished: bool = False
    truncated: bool = False


@dataclass(frozen=True)
class StepResult:
    reward: float
    done: bool
    events: StepEvents


@dataclass(frozen=True)
class GameState:
    """Mutable episode state as an immutable value; boxes keep identity order."""

    level_id: LevelId
    walls: frozenset[tuple[int, int]]
    targets: frozenset[tuple[int, int]]
    boxes: tuple[tuple[int, int], ...]
    player: tuple[int, int]
    height: int
    width: int
    t: int
    max_steps: int
    solved: bool

    def key(self) -> tuple:
        """Hashable puzzle-state key: player plus box positions as a multiset."""
        return (self.player, tuple(sorted(self.boxes)))


def reset(level: Level, seed: int = 0, mode: str = "train") -> tuple[GameState, np.ndarray]:
    """Start an episode; train mode draws max_steps from {91..120} using seed."""
    if mode == "train":
        rng = np.random.default_rng(seed)
        max_steps = int(rng.integers(MIN_EPISODE_STEPS, MAX_EPISODE_STEPS + 1))
    elif mode == "eval":
        max_steps = MAX_EPISODE_STEPS
    else:
        raise ValueError(f"unknown mode {mode!r}")
    boxes = tuple(sorted(level.boxes))
    state = GameState(
        level_id=level.id, walls=level.walls, targets=level.targets, boxes=boxes,
        player=level.player, height=level.height, width=level.width,
        t=0, max_steps=max_steps, solved=set(boxes) == set(level.targets),
    )
    return state, render(state)


def step(state: GameState, action: Action) -> tuple[GameState, StepResult, np.ndarray]:
    """Advance one step; pushes move a box when the cell beyond is free."""
    if state.solved:
        raise EpisodeOver("episode already solved")
    if state.t >= state.max_steps:
        raise EpisodeOver("episode already truncated")
    dr, dc = ACTION_DELTAS[Action(action)]
    pr, pc = state.player
    dest = (pr + dr, pc + dc)
    boxes = state.boxes
    box_set = set(boxes)
    player = state.player
    pushed_on = pushed_off = False

    if dest not in state.walls:
        if dest in box_set:
            beyond = (dest[0] + dr, dest[1] + dc)
            if beyond not in state.walls and beyond not in box_set:
                idx = boxes.index(dest)
                boxes = boxes[:idx] + (beyond,) + boxes[idx + 1:]
                pushed_on = beyond in state.targets
                pushed_off = dest in state.targets
                player = dest
        else:
            player = dest

    t = state.t + 1
    solved = set(boxes) == set(state.targets)
    finished = solved
    truncated = (not finished) and t == state.max_steps
    reward = STEP_PENALTY
    if pushed_on:
        reward += ON_TARGET_REWARD
    if pushed_off:
        reward += OFF_TARGET_PENALTY
    if finished:
        reward += FINISH_REWARD

    new_state = replace(state, boxes=boxes, player=player, t=t, solved=solved)
    result = StepResult(
        reward=reward,
        done=finished or truncated,
        events=StepEvents(pushed_on_target=pushed_on, pushed_off_target=pushed_off,
                          finished=finished, truncated=truncated),
    )
    return new_state, result, render(new_state)


def step_batch(states: list[GameState], actions: list[Action]) -> list[tuple[GameState, StepResult, np.ndarray]]:
    """Advance K independent states; bitwise-identical to stepping sequentially."""
    if len(states) != len(actions):
        raise ValueError("states and actions must have equal length")
    return [step(s, a) for s, a in zip(states, actions)]


def _palette_array(palette: dict[str, tuple[int, int, int]], dtype=np.float32) -> np.ndarray:
    order = ("wall", "floor", "target", "box", "box_on_target", "player", "player_on_target")
    return np.array([palette[k] for k in order], dtype=dtype) / dtype(255)


_DEFAULT_COLORS = _palette_array(PALETTE)
_W, _F, _T, _B, _BT, _P, _PT = range(7)


def render(state: GameState, palette: dict[str, tuple[int, int, int]] | None = None) -> np.ndarray:
    """[H, W, 3] float32 observation in [0, 1], one pixel per tile."""
    colors = _DEFAULT_COLORS if palette is None else _palette_array(palette)
    idx = np.full((state.height, state.width), _F, dtype=np.int8)
    for r, c in state.walls:
        idx[r, c] = _W
    for r, c in state.targets:
        idx[r, c] = _T
    for b in state.boxes:
        idx[b] = _BT if b in state.targets else _B
    idx[state.player] = _PT if state.player in state.targets else _P
    return colors[idx]


def replay(level: Level, actions: list[Action] | str) -> tuple[list[float], bool]:
    """Apply actions from an eval reset; returns the reward sequence and solved flag."""
    if isinstance(actions, str):
        actions = [CHAR_ACTIONS[ch] for ch in actions]
    if len(actions) > MAX_EPISODE_STEPS:
        raise ValueError(f"action list longer than {MAX_EPISODE_STEPS}")
    state, _ = reset(level, mode="eval")
    rewards: list[float] = []
    for a in actions:
        state, result, _ = step(state, a)
        rewards.append(result.reward)
    return rewards, state.solved


def replay_records(level: Level, actions: list[Action] | str) -> list[dict]:
    """Trajectory dump: one record per step {t, action, reward, done, player, boxes}."""
    if isinstance(actions, str):
        actions = [CHAR_ACTIONS[ch] for ch in actions]
    state, _ = reset(level, mode="eval")
    records = []
    for a in actions:
        state, result, _ = step(state, Action(a))
        records.append({
            "t": state.t,
            "action": ACTION_CHARS[Action(a)],
            "reward": round(result.reward, 6),
            "done": result.done,
            "player": list(state.player),
            "boxes": [list(b) for b in state.boxes],
        })
    return records
