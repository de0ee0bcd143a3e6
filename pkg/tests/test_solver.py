import json

import numpy as np
import pytest

from sokolab.engine import replay
from sokolab.levels import Level, LevelSet
from sokolab.procgen import generate_level, generate_level_set
from sokolab.solver import BUDGET, SOLVED, astar, bfs_oracle, heuristic, solve_batch

BOX_LEFT_OF_TARGET = Level(
    walls=frozenset({(r, c) for r in range(5) for c in range(5)
                     if r in (0, 4) or c in (0, 4)}),
    targets=frozenset({(1, 3)}),
    boxes=frozenset({(1, 2)}),
    player=(1, 1),
    height=5, width=5,
)

SOLVED_AT_START = Level(
    walls=BOX_LEFT_OF_TARGET.walls,
    targets=frozenset({(1, 2)}),
    boxes=frozenset({(1, 2)}),
    player=(1, 1),
    height=5, width=5,
)

UNSOLVABLE = Level(
    # box in a corner pocket, target unreachable
    walls=frozenset({(r, c) for r in range(5) for c in range(5)
                     if r in (0, 4) or c in (0, 4)} | {(2, 1)}),
    targets=frozenset({(3, 3)}),
    boxes=frozenset({(1, 1)}),
    player=(2, 2),
    height=5, width=5,
)


class TestHeuristic:
    def test_all_on_targets_zero(self):
        assert heuristic(((1, 2), (3, 3)), ((1, 2), (3, 3))) == 0

    def test_nearest_target(self):
        assert heuristic(((2, 2),), ((2, 5), (7, 2))) == 3

    def test_admissible_on_bfs_solved_instances(self):
        rng = np.random.SeedSequence(101).generate_state(500)
        checked = 0
        for s in rng:
            try:
                lv = generate_level(8, 8, int(s) % 2 + 1, int(s), wall_density=0.15,
                                    pulls=30, max_optimal=30, max_tries=60)
            except RuntimeError:
                continue
            res = bfs_oracle(lv, depth_cap=30)
            if res.status != SOLVED:
                continue
            h0 = heuristic(tuple(sorted(lv.boxes)), tuple(sorted(lv.targets)))
            assert h0 <= res.optimal_len
            checked += 1
        assert checked >= 400


class TestAStar:
    def test_single_push(self):
        res = astar(BOX_LEFT_OF_TARGET)
        assert res.status == SOLVED and res.optimal_len == 1
        assert res.actions_str() == "R"

    def test_solved_at_start(self):
        res = astar(SOLVED_AT_START)
        assert res.status == SOLVED
        assert res.optimal_len == 0 and res.expanded_nodes == 1

    def test_matches_bfs_on_random_instances(self):
        rng = np.random.SeedSequence(55).generate_state(300)
        matched = 0
        for s in rng:
            if matched >= 100:
                break
            try:
                lv = generate_level(8, 8, int(s) % 2 + 1, int(s), wall_density=0.15,
                                    pulls=30, max_optimal=28, max_tries=60)
            except RuntimeError:
                continue
            oracle = bfs_oracle(lv, depth_cap=30)
            assert oracle.status == SOLVED
            res = astar(lv)
            assert res.status == SOLVED
            assert res.optimal_len == oracle.optimal_len, f"seed {s}"
            matched += 1
        assert matched >= 100

    def test_solutions_replay_to_solved(self):
        rng = np.random.SeedSequence(77).generate_state(30)
        for s in rng:
            try:
                lv = generate_level(8, 8, 2, int(s), wall_density=0.1, pulls=30,
                                    max_optimal=28, max_tries=60)
            except RuntimeError:
                continue
            res = astar(lv)
            if res.status == SOLVED:
                _, solved = replay(lv, res.actions)
                assert solved

    def test_budget_exhaustion_carries_stats(self):
        res = astar(UNSOLVABLE, node_budget=50)
        assert res.status == BUDGET
        assert res.expanded_nodes > 0 and res.optimal_len == -1

    def test_expanded_nodes_deterministic(self):
        lv = generate_level(8, 8, 2, seed=5, wall_density=0.15, pulls=30, max_tries=100)
        a = astar(lv)
        b = astar(lv)
        assert a.expanded_nodes == b.expanded_nodes
        assert a.actions == b.actions

    def test_invalid_budgets_rejected(self):
        with pytest.raises(ValueError):
            astar(BOX_LEFT_OF_TARGET, node_budget=0)


class TestBFS:
    def test_depth_cap_zero_unsolved(self):
        res = bfs_oracle(BOX_LEFT_OF_TARGET, depth_cap=0)
        assert res.status == BUDGET

    def test_unsolvable_within_cap(self):
        res = bfs_oracle(UNSOLVABLE, depth_cap=25)
        assert res.status == BUDGET

    def test_agreement_on_solvability(self):
        rng = np.random.SeedSequence(88).generate_state(40)
        for s in rng:
            try:
                lv = generate_level(7, 7, 1, int(s), wall_density=0.2, pulls=25,
                                    max_optimal=25, max_tries=60)
            except RuntimeError:
                continue
            assert (bfs_oracle(lv, depth_cap=30).status == SOLVED) == \
                (astar(lv, node_budget=100_000).status == SOLVED)


class TestBatch:
    def _levels(self) -> LevelSet:
        return generate_level_set(8, width=8, height=8, n_boxes=2, seed=13,
                                  split="batch", wall_density=0.12, pulls=30,
                                  max_optimal=28, max_tries=400)

    def test_worker_counts_agree(self):
        levels = self._levels()
        seq, _ = solve_batch(levels, workers=1)
        par, _ = solve_batch(levels, workers=4)
        assert [r.actions for r in seq] == [r.actions for r in par]
        assert [r.expanded_nodes for r in seq] == [r.expanded_nodes for r in par]

    def test_results_in_input_order(self):
        levels = self._levels()
        results, summary = solve_batch(levels, workers=2)
        assert [r.level_id for r in results] == [lv.id for lv in levels.levels]
        assert summary["total"] == len(levels)

    def test_resume_skips_cached(self, tmp_path):
        levels = self._levels()
        cache = tmp_path / "solutions.jsonl"
        first, _ = solve_batch(list(levels.levels)[:4], out_path=cache)
        assert len(cache.read_text().splitlines()) == 4
        full, _ = solve_batch(levels, out_path=cache)
        lines = cache.read_text().splitlines()
        assert len(lines) == len(levels)  # no level solved twice
        ids = [tuple(json.loads(l)["level_id"]) for l in lines]
        assert len(set(ids)) == len(ids)
        assert [r.actions for r in full[:4]] == [r.actions for r in first]

    def test_cache_record_format(self, tmp_path):
        cache = tmp_path / "s.jsonl"
        solve_batch([BOX_LEFT_OF_TARGET], out_path=cache)
        rec = json.loads(cache.read_text().splitlines()[0])
        assert set(rec) == {"level_id", "status", "actions", "optimal_len",
                            "expanded_nodes", "wall_time"}
        assert rec["actions"] == "R"
