"""Procedural small-board fixtures for tests and desk-scale training.

Levels are produced by reverse-pull scrambling from a solved position, so
every generated level is solvable; a BFS length filter controls difficulty.
"""
from __future__ import annotations

import numpy as np

from .levels import Level, LevelSet

_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))


def _scramble(walls: set, targets: list, height: int, width: int,
              rng: np.random.Generator, pulls: int) -> tuple[tuple, list] | None:
    boxes = list(targets)
    box_set = set(boxes)
    free = [(r, c) for r in range(height) for c in range(width)
            if (r, c) not in walls and (r, c) not in box_set]
    if not free:
        return None
    player = free[rng.integers(len(free))]

    for _ in range(pulls):
        moves = []
        pr, pc = player
        for dr, dc in _DIRS:
            dest = (pr + dr, pc + dc)
            if dest in walls or dest in box_set:
                continue
            behind = (pr - dr, pc - dc)
            if behind in box_set:
                moves.append((dest, behind, True))   # pull the box into our cell
            moves.append((dest, None, False))        # plain walk
        if not moves:
            break
        dest, pulled, is_pull = moves[rng.integers(len(moves))]
        if is_pull:
            box_set.remove(pulled)
            box_set.add(player)
            boxes[boxes.index(pulled)] = player
        player = dest
    return player, boxes


def generate_level(width: int, height: int, n_boxes: int, seed: int,
                   wall_density: float = 0.1, pulls: int = 40,
                   min_optimal: int = 0, max_optimal: int = 30,
                   pocket_targets: bool = False, min_push_turns: int = 0,
                   id=("fixture", 0, 0), max_tries: int = 200) -> Level:
    """One solvable level with BFS-optimal length in [min_optimal, max_optimal].

    pocket_targets restricts targets to cells with walls on two orthogonal
    sides; min_push_turns requires the optimal solution's push sequence to
    change direction, which random play almost never does.
    """
    from .solver import bfs_oracle

    rng = np.random.default_rng(seed)
    interior = [(r, c) for r in range(1, height - 1) for c in range(1, width - 1)]
    border = {(r, c) for r in range(height) for c in range(width)
              if r in (0, height - 1) or c in (0, width - 1)}

    for _ in range(max_tries):
        walls = set(border)
        for cell in interior:
            if rng.random() < wall_density:
                walls.add(cell)
        open_cells = [c for c in interior if c not in walls]
        if pocket_targets:
            candidates = [
                (r, c) for r, c in open_cells
                if ((r - 1, c) in walls or (r + 1, c) in walls)
                and ((r, c - 1) in walls or (r, c + 1) in walls)
            ]
        else:
            candidates = open_cells
        if len(candidates) < n_boxes or len(open_cells) < n_boxes + 1:
            continue
        t_idx = rng.choice(len(candidates), size=n_boxes, replace=False)
        targets = [candidates[i] for i in t_idx]
        scrambled = _scramble(walls, targets, height, width, rng, pulls)
        if scrambled is None:
            continue
        player, boxes = scrambled
        if set(boxes) == set(targets):
            continue  # still solved; scramble again
        try:
            level = Level(walls=frozenset(walls), targets=frozenset(targets),
                          boxes=frozenset(boxes), player=player,
                          height=height, width=width, id=id)
        except Exception:
            continue
        result = bfs_oracle(level, depth_cap=max_optimal)
        if result.status != "solved" or result.optimal_len < min_optimal:
            continue
        if min_push_turns and _push_turns(level, result.actions) < min_push_turns:
            continue
        return level
    raise RuntimeError(f"could not generate a level after {max_tries} tries (seed={seed})")


def _push_turns(level: Level, actions) -> int:
    """Direction changes within the push subsequence of an action list."""
    from .engine import reset, step

    state, _ = reset(level, mode="eval")
    dirs = []
    for a in actions:
        prev = state.boxes
        state, _, _ = step(state, a)
        if state.boxes != prev:
            dirs.append(a)
    return sum(1 for i in range(1, len(dirs)) if dirs[i] != dirs[i - 1])


def generate_level_set(count: int, width: int, height: int, n_boxes: int, seed: int,
                       split: str = "fixture", **kwargs) -> LevelSet:
    """Deterministic set of `count` generated levels, ids ('<split>', 0, i)."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    levels = tuple(
        generate_level(width, height, n_boxes, int(s), id=(split, 0, i), **kwargs)
        for i, s in enumerate(seeds)
    )
    return LevelSet(split=split, levels=levels, file_counts=((f"{split}.txt", count),))


def one_box_training_set(count: int = 200, seed: int = 7) -> LevelSet:
    """The 7x7 single-box fixture corpus used for desk-scale training checks.

    A 30/70 mixture of moderate and hard levels: the moderate tier keeps
    early reward discoverable while the whole set stays below a 5% success
    rate for a uniform-random policy under the 120-step cap.
    """
    n_moderate = int(round(count * 0.3))
    moderate = generate_level_set(
        n_moderate, width=7, height=7, n_boxes=1, seed=seed * 2 + 1,
        split="fixture-1box", wall_density=0.2, pulls=50,
        min_optimal=7, max_optimal=40, min_push_turns=1, max_tries=5000)
    hard = generate_level_set(
        count - n_moderate, width=7, height=7, n_boxes=1, seed=seed * 2,
        split="fixture-1box", wall_density=0.25, pulls=60,
        min_optimal=9, max_optimal=40, min_push_turns=2, max_tries=5000)
    levels = tuple(
        Level(walls=lv.walls, targets=lv.targets, boxes=lv.boxes, player=lv.player,
              height=lv.height, width=lv.width, id=("fixture-1box", 0, i))
        for i, lv in enumerate(moderate.levels + hard.levels)
    )
    return LevelSet(split="fixture-1box", levels=levels,
                    file_counts=(("fixture-1box.txt", count),))
