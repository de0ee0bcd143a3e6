"""Plot-ready tables: time-to-box, level categorization, difficulty joins."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..levels import LevelId
from .episodes import EpisodeRecord


def box_placement_times(record: EpisodeRecord) -> list[int]:
    """Per-box final (persisting to episode end) placement steps, ascending.

    A box counts at the earliest step from which it stays on a target until
    the end; boxes off-target at the end are unplaced and excluded.
    """
    times = []
    n_steps = len(record.boxes_seq) - 1
    n_boxes = len(record.boxes_seq[0])
    for i in range(n_boxes):
        if record.boxes_seq[-1][i] not in record.targets:
            continue
        t = n_steps
        while t > 0 and record.boxes_seq[t - 1][i] in record.targets:
            t -= 1
        times.append(t)
    return sorted(times)


def time_to_box(records: list[EpisodeRecord], n_boxes: int = 4) -> list[float | None]:
    """Mean placement step of the k-th placed box, k = 1..n_boxes.

    Episodes missing the k-th placement are excluded from that k only.
    """
    sums = [0.0] * n_boxes
    counts = [0] * n_boxes
    for rec in records:
        for k, t in enumerate(box_placement_times(rec)[:n_boxes]):
            sums[k] += t
            counts[k] += 1
    return [sums[k] / counts[k] if counts[k] else None for k in range(n_boxes)]


def time_to_box_table(records_by_n: dict[int, list[EpisodeRecord]],
                      subgroup_ids: set[LevelId] | None = None,
                      n_boxes: int = 4) -> list[dict]:
    """Per-n mean time-to-box rows, optionally restricted to a level subset."""
    rows = []
    for n in sorted(records_by_n):
        recs = records_by_n[n]
        if subgroup_ids is not None:
            recs = [r for r in recs if r.level_id in subgroup_ids]
        means = time_to_box(recs, n_boxes)
        row = {"n": n}
        for k, m in enumerate(means, start=1):
            row[f"box{k}"] = m
        rows.append(row)
    return rows


def solved_at_b_not_a(records_a: list[EpisodeRecord], records_b: list[EpisodeRecord]) -> set[LevelId]:
    """Level ids solved in run b but not in run a (e.g. solved at 6, not at 0)."""
    solved_a = {r.level_id for r in records_a if r.solved}
    return {r.level_id for r in records_b if r.solved and r.level_id not in solved_a}


CATEGORY_ROWS = (
    "solved_previously_unsolved",
    "unsolved_previously_solved",
    "solved_better_returns",
    "solved_same_returns",
    "solved_worse_returns",
    "unsolved_same_or_better_returns",
    "unsolved_worse_returns",
)


@dataclass(frozen=True)
class CategoryTable:
    percentages: dict[str, float]
    denominator: int

    def as_rows(self) -> list[tuple[str, float]]:
        return [(name, self.percentages[name]) for name in CATEGORY_ROWS]


def categorize(records_base: list[EpisodeRecord], records_think: list[EpisodeRecord]) -> CategoryTable:
    """Assign each level to exactly one of the seven comparison rows.

    records_base is the reference run (0 thinking steps), records_think the
    compared run (e.g. 6 steps); returns are compared exactly.
    """
    base = {r.level_id: r for r in records_base}
    think = {r.level_id: r for r in records_think}
    if set(base) != set(think):
        raise ValueError("categorize needs the same level set in both runs")
    counts = {name: 0 for name in CATEGORY_ROWS}
    for level_id, b in base.items():
        t = think[level_id]
        if t.solved and not b.solved:
            counts["solved_previously_unsolved"] += 1
        elif not t.solved and b.solved:
            counts["unsolved_previously_solved"] += 1
        elif t.solved and b.solved:
            if t.ret > b.ret:
                counts["solved_better_returns"] += 1
            elif t.ret == b.ret:
                counts["solved_same_returns"] += 1
            else:
                counts["solved_worse_returns"] += 1
        else:
            if t.ret >= b.ret:
                counts["unsolved_same_or_better_returns"] += 1
            else:
                counts["unsolved_worse_returns"] += 1
    n = len(base)
    return CategoryTable(
        percentages={name: 100.0 * c / n for name, c in counts.items()},
        denominator=n,
    )


def write_category_csv(path: str | Path, table: CategoryTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["category", "percentage"])
        for name, pct in table.as_rows():
            writer.writerow([name, f"{pct:.2f}"])


def first_solved_n(records_by_n: dict[int, list[EpisodeRecord]]) -> dict[LevelId, int | None]:
    """Smallest n in the sweep grid at which each level is solved (None = never)."""
    ns = sorted(records_by_n)
    out: dict[LevelId, int | None] = {}
    for n in ns:
        for rec in records_by_n[n]:
            out.setdefault(rec.level_id, None)
            if rec.solved and out[rec.level_id] is None:
                out[rec.level_id] = n
    return out


def difficulty_join(records_by_n: dict[int, list[EpisodeRecord]],
                    solver_results: dict[LevelId, dict]) -> dict:
    """Join sweep outcomes with solver difficulty proxies.

    solver_results maps level id -> {"optimal_len": int, "expanded_nodes": int}.
    Returns per-group means of both proxies, grouped by first-solved n, plus
    the list of levels missing from the solver cache.
    """
    assignment = first_solved_n(records_by_n)
    missing = sorted(lid for lid in assignment if lid not in solver_results)
    groups: dict = {}
    for level_id, n in assignment.items():
        if level_id not in solver_results:
            continue
        key = "never" if n is None else n
        groups.setdefault(key, []).append(solver_results[level_id])
    rows = []
    order = sorted((k for k in groups if k != "never")) + (["never"] if "never" in groups else [])
    for key in order:
        entries = groups[key]
        rows.append({
            "first_solved_n": key,
            "count": len(entries),
            "mean_optimal_len": float(np.mean([e["optimal_len"] for e in entries])),
            "mean_expanded_nodes": float(np.mean([e["expanded_nodes"] for e in entries])),
        })
    return {"groups": rows, "missing_solver_entries": missing}


def multi_set_success(model_for, checkpoints: list[str | Path],
                      level_sets: dict[str, object], sample: int | None = None,
                      seed: int = 0, deterministic: bool = True) -> list[dict]:
    """Success matrix: one row per checkpoint, one column per level set.

    model_for(checkpoint_path) must return a ready-to-run model.
    """
    from ..rl.evaluate import evaluate

    rows = []
    for ckpt in checkpoints:
        model = model_for(ckpt)
        row: dict = {"checkpoint": str(ckpt)}
        for name, levels in level_sets.items():
            res = evaluate(model, levels, sample=sample, seed=seed,
                           deterministic=deterministic)
            row[name] = res["success_rate"]
        rows.append(row)
    return rows
