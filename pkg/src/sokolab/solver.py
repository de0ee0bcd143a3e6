"""Optimal Sokoban solving: A* with the box-to-nearest-target Manhattan
heuristic, a breadth-first oracle, and a resumable batch driver.

Search is over the puzzle graph (player + boxes); the episode step budget
does not exist here. Tie-breaking on equal f prefers larger g, then FIFO
insertion order, so expanded-node counts are deterministic.
"""
from __future__ import annotations

import heapq
import json
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .engine import ACTION_CHARS, Action
from .levels import Level, LevelId, LevelSet

_DIRS = (
    (Action.UP, (-1, 0)),
    (Action.DOWN, (1, 0)),
    (Action.LEFT, (0, -1)),
    (Action.RIGHT, (0, 1)),
)

SOLVED = "solved"
BUDGET = "budget_exhausted"


@dataclass(frozen=True)
class SearchResult:
    level_id: LevelId
    status: str                      # SOLVED or BUDGET
    actions: tuple[Action, ...]
    optimal_len: int                 # -1 unless solved
    expanded_nodes: int
    wall_time: float

    def actions_str(self) -> str:
        return "".join(ACTION_CHARS[a] for a in self.actions)


def heuristic(boxes: tuple[tuple[int, int], ...], targets: tuple[tuple[int, int], ...]) -> int:
    """Sum over boxes of the Manhattan distance to the nearest target."""
    total = 0
    for br, bc in boxes:
        total += min(abs(br - tr) + abs(bc - tc) for tr, tc in targets)
    return total


def _successors(player, boxes, walls, box_positions):
    """Yield (action, new_player, new_boxes) for all legal moves."""
    pr, pc = player
    for action, (dr, dc) in _DIRS:
        dest = (pr + dr, pc + dc)
        if dest in walls:
            continue
        if dest in box_positions:
            beyond = (dest[0] + dr, dest[1] + dc)
            if beyond in walls or beyond in box_positions:
                continue
            idx = boxes.index(dest)
            new_boxes = tuple(sorted(boxes[:idx] + (beyond,) + boxes[idx + 1:]))
            yield action, dest, new_boxes
        else:
            yield action, dest, boxes


def _corner_deadlocked(boxes, targets_set, walls) -> bool:
    for (br, bc) in boxes:
        if (br, bc) in targets_set:
            continue
        up = (br - 1, bc) in walls
        down = (br + 1, bc) in walls
        left = (br, bc - 1) in walls
        right = (br, bc + 1) in walls
        if (up or down) and (left or right):
            return True
    return False


def astar(level: Level, node_budget: int = 5_000_000, time_budget: float = 900.0,
          deadlock_pruning: bool = False) -> SearchResult:
    """A* over the puzzle graph; returns the first goal pop as optimal.

    deadlock_pruning enables an optional corner filter; it is off for all
    statistics meant to be comparable across runs.
    """
    if node_budget <= 0 or time_budget <= 0:
        raise ValueError("budgets must be positive")
    t0 = time.perf_counter()
    walls = level.walls
    targets = tuple(sorted(level.targets))
    targets_set = level.targets
    start_boxes = tuple(sorted(level.boxes))
    start = (level.player, start_boxes)

    counter = 0
    h0 = heuristic(start_boxes, targets)
    # heap entry: (f, -g, insertion counter, state); larger g preferred on ties
    frontier = [(h0, 0, counter, start)]
    best_g = {start: 0}
    parent: dict = {start: None}
    expanded = 0

    while frontier:
        f, neg_g, _, state = heapq.heappop(frontier)
        g = -neg_g
        if g > best_g.get(state, -1):
            continue  # stale entry superseded by a shorter path
        expanded += 1
        player, boxes = state
        if set(boxes) == targets_set:
            return SearchResult(level.id, SOLVED, _reconstruct(parent, state),
                                optimal_len=g, expanded_nodes=expanded,
                                wall_time=time.perf_counter() - t0)
        if expanded >= node_budget or time.perf_counter() - t0 > time_budget:
            return SearchResult(level.id, BUDGET, (), -1, expanded,
                                time.perf_counter() - t0)
        box_positions = set(boxes)
        for action, new_player, new_boxes in _successors(player, boxes, walls, box_positions):
            if deadlock_pruning and new_boxes is not boxes and \
                    _corner_deadlocked(new_boxes, targets_set, walls):
                continue
            succ = (new_player, new_boxes)
            g2 = g + 1
            if g2 < best_g.get(succ, 1 << 60):
                best_g[succ] = g2
                parent[succ] = (state, action)
                counter += 1
                # plain walks keep the parent's h (= f - g); pushes recompute
                h = (f - g) if new_boxes is boxes else heuristic(new_boxes, targets)
                heapq.heappush(frontier, (g2 + h, -g2, counter, succ))

    return SearchResult(level.id, BUDGET, (), -1, expanded, time.perf_counter() - t0)


def bfs_oracle(level: Level, depth_cap: int = 30) -> SearchResult:
    """Uninformed breadth-first search over the same state graph."""
    t0 = time.perf_counter()
    walls = level.walls
    targets_set = level.targets
    start = (level.player, tuple(sorted(level.boxes)))
    parent: dict = {start: None}
    queue = deque([(start, 0)])
    expanded = 0
    while queue:
        state, depth = queue.popleft()
        expanded += 1
        player, boxes = state
        if set(boxes) == targets_set:
            return SearchResult(level.id, SOLVED, _reconstruct(parent, state),
                                optimal_len=depth, expanded_nodes=expanded,
                                wall_time=time.perf_counter() - t0)
        if depth >= depth_cap:
            continue
        box_positions = set(boxes)
        for action, new_player, new_boxes in _successors(player, boxes, walls, box_positions):
            succ = (new_player, new_boxes)
            if succ not in parent:
                parent[succ] = (state, action)
                queue.append((succ, depth + 1))
    return SearchResult(level.id, BUDGET, (), -1, expanded, time.perf_counter() - t0)


def _reconstruct(parent: dict, state) -> tuple[Action, ...]:
    actions = []
    while parent[state] is not None:
        state, action = parent[state]
        actions.append(action)
    return tuple(reversed(actions))


# ---------------------------------------------------------------------------
# batch driver with incremental, resumable persistence


def _result_to_record(r: SearchResult) -> dict:
    return {
        "level_id": list(r.level_id),
        "status": r.status,
        "actions": r.actions_str(),
        "optimal_len": r.optimal_len,
        "expanded_nodes": r.expanded_nodes,
        "wall_time": round(r.wall_time, 4),
    }


def _record_to_result(rec: dict) -> SearchResult:
    from .engine import CHAR_ACTIONS

    return SearchResult(
        level_id=tuple(rec["level_id"]),
        status=rec["status"],
        actions=tuple(CHAR_ACTIONS[ch] for ch in rec["actions"]),
        optimal_len=rec["optimal_len"],
        expanded_nodes=rec["expanded_nodes"],
        wall_time=rec["wall_time"],
    )


def _solve_one(args) -> SearchResult:
    level, node_budget, time_budget = args
    return astar(level, node_budget=node_budget, time_budget=time_budget)


def solve_batch(levels: LevelSet | list[Level], node_budget: int = 5_000_000,
                time_budget: float = 900.0, workers: int = 1,
                out_path: str | Path | None = None) -> tuple[list[SearchResult], dict]:
    """Solve levels in input order; identical results for any worker count.

    With out_path set, results append to a JSON-lines cache as they finish
    and already-cached levels are not solved twice (resumable).
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    level_list = list(levels.levels) if isinstance(levels, LevelSet) else list(levels)
    cached: dict[LevelId, SearchResult] = {}
    if out_path is not None:
        out_path = Path(out_path)
        if out_path.exists():
            for line in out_path.read_text().splitlines():
                if line.strip():
                    r = _record_to_result(json.loads(line))
                    cached[r.level_id] = r

    todo = [(i, lv) for i, lv in enumerate(level_list) if lv.id not in cached]
    results: list[SearchResult | None] = [cached.get(lv.id) for lv in level_list]

    sink = out_path.open("a") if out_path is not None else None
    try:
        if workers == 1 or len(todo) <= 1:
            for i, lv in todo:
                r = _solve_one((lv, node_budget, time_budget))
                results[i] = r
                if sink:
                    sink.write(json.dumps(_result_to_record(r)) + "\n")
                    sink.flush()
        else:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                args = [(lv, node_budget, time_budget) for _, lv in todo]
                for (i, _), r in zip(todo, pool.map(_solve_one, args)):
                    results[i] = r
                    if sink:
                        sink.write(json.dumps(_result_to_record(r)) + "\n")
                        sink.flush()
    finally:
        if sink:
            sink.close()

    final = [r for r in results if r is not None]
    solved = [r for r in final if r.status == SOLVED]
    summary = {
        "total": len(final),
        "solved": len(solved),
        "budget_exhausted": len(final) - len(solved),
        "length_histogram": _histogram([r.optimal_len for r in solved]),
        "expanded_histogram": _histogram([r.expanded_nodes for r in final]),
    }
    return final, summary


def _histogram(values: list[int], bins: int = 10) -> dict:
    if not values:
        return {"edges": [], "counts": []}
    lo, hi = min(values), max(values)
    if lo == hi:
        return {"edges": [lo, hi], "counts": [len(values)]}
    width = (hi - lo) / bins
    edges = [lo + i * width for i in range(bins + 1)]
    counts = [0] * bins
    for v in values:
        idx = min(int((v - lo) / width), bins - 1)
        counts[idx] += 1
    return {"edges": edges, "counts": counts}
