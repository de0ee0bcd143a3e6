import numpy as np
import pytest

from sokolab.analysis import (
    CATEGORY_ROWS,
    Cycle,
    box_placement_times,
    categorize,
    cycle_start_histogram,
    detect_cycles,
    difficulty_join,
    early_cycle_count,
    first_solved_n,
    minimal_cycles,
    prune_redundant,
    replace_cycle_with_thinking,
    run_with_thinking,
    thinking_sweep,
    time_to_box,
)
from sokolab.analysis.episodes import EpisodeRecord
from sokolab.engine import Action, reset, step
from sokolab.levels import Level
from sokolab.models import build_model
from sokolab.procgen import generate_level_set
from sokolab.rl.evaluate import run_policy_episode

CORRIDOR = Level(
    walls=frozenset({(r, c) for r in range(5) for c in range(7)
                     if r in (0, 4) or c in (0, 6)} | {(2, 2), (2, 4)}),
    targets=frozenset({(1, 5)}),
    boxes=frozenset({(1, 4)}),
    player=(1, 1),
    height=5, width=7,
)


def record_from_actions(level: Level, actions: list[Action]) -> EpisodeRecord:
    state, _ = reset(level, mode="eval")
    keys = [state.key()]
    boxes_seq = [state.boxes]
    total = 0.0
    for a in actions:
        state, result, _ = step(state, a)
        keys.append(state.key())
        boxes_seq.append(state.boxes)
        total += result.reward
    return EpisodeRecord(level_id=level.id, thinking_steps=0, solved=state.solved,
                         ret=total, steps=len(actions), actions=tuple(actions),
                         state_keys=tuple(keys), boxes_seq=tuple(boxes_seq),
                         targets=state.targets)


def brute_force_cycles(state_keys, rule="subset") -> list[Cycle]:
    """O(T^2) all-pairs scan: for every start, the minimal recurrence."""
    raw = []
    t_len = len(state_keys)
    for t in range(t_len):
        for u in range(t + 1, t_len):
            if state_keys[t] == state_keys[u]:
                raw.append(Cycle(start=t, length=u - t,
                                 states=frozenset(state_keys[t:u])))
                break
    kept = []
    for cyc in raw:  # raw is already sorted by start
        if rule == "subset":
            if any(cyc.states <= k.states for k in kept):
                continue
        kept.append(cyc)
    return kept


class TestCycleDetector:
    def test_left_right_corridor(self):
        record = record_from_actions(CORRIDOR, [Action.RIGHT, Action.LEFT])
        cycles = detect_cycles(record)
        assert cycles[0].start == 0 and cycles[0].length == 2

    def test_wall_bump_is_length_one(self):
        record = record_from_actions(CORRIDOR, [Action.UP])
        cycles = detect_cycles(record)
        assert cycles == [Cycle(start=0, length=1, states=frozenset({record.state_keys[0]}))]

    def test_no_cycles_in_straight_walk(self):
        record = record_from_actions(CORRIDOR, [Action.DOWN, Action.DOWN])
        assert detect_cycles(record) == []

    def test_agreement_with_brute_force_on_1000_random_trajectories(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            t_len = int(rng.integers(2, 60))
            n_states = int(rng.integers(2, 8))
            keys = tuple(int(x) for x in rng.integers(0, n_states, size=t_len))
            got = detect_cycles(_dummy_record(keys))
            want = brute_force_cycles(keys)
            assert got == want, f"keys={keys}"

    def test_exact_rule_differs_only_on_subsets(self):
        keys = (0, 1, 0, 1, 2, 1)
        subset = prune_redundant(minimal_cycles(keys), "subset")
        exact = prune_redundant(minimal_cycles(keys), "exact")
        assert {c.start for c in subset} <= {c.start for c in exact}

    def test_histogram_totals_match(self):
        rng = np.random.default_rng(1)
        records = []
        for _ in range(20):
            keys = tuple(int(x) for x in rng.integers(0, 4, size=30))
            records.append(_dummy_record(keys))
        hist = cycle_start_histogram(records)
        total = sum(len(detect_cycles(r)) for r in records)
        assert sum(hist) == total

    def test_early_cycle_count_window(self):
        records = [_dummy_record((0, 0, 1, 2, 3, 4, 5, 6, 6))]
        assert early_cycle_count(records, window=5) == 1


def _dummy_record(keys) -> EpisodeRecord:
    return EpisodeRecord(level_id=("t", 0, 0), thinking_steps=0, solved=False,
                         ret=0.0, steps=len(keys) - 1,
                         actions=tuple([Action.UP] * (len(keys) - 1)),
                         state_keys=tuple(keys), boxes_seq=tuple([()] * len(keys)),
                         targets=frozenset())


@pytest.fixture(scope="module")
def fixture_levels():
    return generate_level_set(6, width=7, height=7, n_boxes=1, seed=19,
                              split="an-fix", wall_density=0.15, pulls=40,
                              min_optimal=4, max_optimal=30, max_tries=500)


@pytest.fixture(scope="module")
def model():
    return build_model("drc11", seed=13, height=7, width=7)


class TestThinkingInjection:
    def test_n0_equals_plain_evaluation_bitwise(self, model, fixture_levels):
        for lv in fixture_levels.levels[:3]:
            rec = run_with_thinking(model, lv, 0)
            plain = run_policy_episode(model, lv, deterministic=True, thinking_steps=0)
            assert rec.actions == tuple(plain["actions"])
            assert rec.ret == plain["return"]
            assert rec.state_keys == tuple(plain["state_keys"])

    def test_environment_untouched_by_thinking(self, model, fixture_levels):
        lv = fixture_levels.levels[0]
        state, _ = reset(lv, mode="eval")
        rec = run_with_thinking(model, lv, 8)
        # the first recorded state is exactly the reset state
        assert rec.state_keys[0] == state.key()
        assert rec.steps <= 120

    def test_thinking_changes_only_network_state(self, model, fixture_levels):
        lv = fixture_levels.levels[1]
        r0 = run_with_thinking(model, lv, 0)
        r3 = run_with_thinking(model, lv, 3)
        assert r0.state_keys[0] == r3.state_keys[0]

    def test_sweep_table_and_degenerate_grid(self, model, fixture_levels):
        table, records = thinking_sweep(model, fixture_levels, ns=(0,))
        assert len(table) == 1 and table[0]["n"] == 0
        assert len(records[0]) == len(fixture_levels)
        from sokolab.rl import evaluate

        ev = evaluate(model, fixture_levels, deterministic=True)
        assert table[0]["success_rate"] == ev["success_rate"]

    def test_sweep_requires_ns(self, model, fixture_levels):
        with pytest.raises(ValueError):
            thinking_sweep(model, fixture_levels, ns=())


class TestCycleReplacement:
    def test_stateless_policy_full_match(self, fixture_levels):
        class StatelessStub:
            """Ignores recurrent state; cycles change nothing for it."""

            def __init__(self):
                self.rng = np.random.default_rng(3)
                self.table = {}

            def initial_state(self, batch):
                return [(None, None)]

            def forward(self, obs, state):
                import sokolab.nn as nn

                data = obs.data if hasattr(obs, "data") else obs
                key = data.tobytes()
                if key not in self.table:
                    self.table[key] = self.rng.standard_normal(4)
                logits = nn.constant(self.table[key][None, :])
                return logits, nn.constant(np.zeros(1)), state

        stub = StatelessStub()
        lv = fixture_levels.levels[0]
        rec = _run_stub_episode(stub, lv)
        cycles = detect_cycles(rec)
        if not cycles:
            pytest.skip("stub produced no cycles on this level")
        out = replace_cycle_with_thinking(stub, lv, rec, cycles[0])
        assert out["behavior_match_horizon"] == len(rec.actions) - cycles[0].start - cycles[0].length

    def test_replacement_on_real_model(self, model, fixture_levels):
        for lv in fixture_levels.levels:
            rec = run_with_thinking(model, lv, 0)
            cycles = detect_cycles(rec)
            if cycles:
                out = replace_cycle_with_thinking(model, lv, rec, cycles[0])
                assert 0 <= out["behavior_match_horizon"] <= 120
                assert isinstance(out["post_thinking_cycle_free_1"], bool)
                assert isinstance(out["post_thinking_cycle_free_N"], bool)
                return
        pytest.skip("no cycles found on fixture levels")


def _run_stub_episode(stub, level) -> EpisodeRecord:
    ep = run_policy_episode(stub, level, deterministic=True, thinking_steps=0)
    from sokolab.analysis.episodes import _to_record

    return _to_record(ep)


class TestTimeToBox:
    def test_direct_pushes_strictly_increasing(self):
        lv = Level(
            walls=frozenset({(r, c) for r in range(6) for c in range(6)
                             if r in (0, 5) or c in (0, 5)}),
            targets=frozenset({(1, 4), (4, 4)}),
            boxes=frozenset({(1, 3), (4, 3)}),
            player=(1, 2), height=6, width=6,
        )
        actions = [Action.RIGHT, Action.DOWN, Action.DOWN, Action.DOWN,
                   Action.LEFT, Action.LEFT, Action.RIGHT, Action.RIGHT]
        # push first box at t=1, then walk around and push the second
        rec = record_from_actions(lv, [Action.RIGHT, Action.DOWN, Action.DOWN,
                                       Action.DOWN, Action.RIGHT])
        times = box_placement_times(rec)
        assert times == sorted(times)
        assert len(times) >= 1

    def test_repushed_box_counts_final_placement(self):
        lv = Level(
            walls=frozenset({(r, c) for r in range(5) for c in range(7)
                             if r in (0, 4) or c in (0, 6)}),
            targets=frozenset({(1, 3), (3, 5)}),
            boxes=frozenset({(1, 2), (3, 4)}),
            player=(1, 1), height=5, width=7,
        )
        # on at t=1, pushed off at t=2, walked around, back on at t=6
        rec = record_from_actions(lv, [
            Action.RIGHT, Action.RIGHT,                      # on, then off
            Action.DOWN, Action.RIGHT, Action.RIGHT, Action.UP,
            Action.LEFT,                                     # push back on
        ])
        times = box_placement_times(rec)
        assert 7 in times and 1 not in times

    def test_target_to_target_push_keeps_first_persistent_time(self):
        lv = Level(
            walls=frozenset({(r, c) for r in range(5) for c in range(6)
                             if r in (0, 4) or c in (0, 5)}),
            targets=frozenset({(1, 3), (1, 4)}),
            boxes=frozenset({(1, 2), (3, 1)}),
            player=(1, 1), height=5, width=6,
        )
        # box lands on (1,3) at t=1 and stays on some target through t=2
        rec = record_from_actions(lv, [Action.RIGHT, Action.RIGHT])
        assert box_placement_times(rec) == [1]

    def test_unplaced_boxes_excluded_only_from_their_average(self):
        recs = [
            _record_with_boxes(((1, 1), (2, 2)), ((1, 5), (2, 2)), targets={(1, 5), (9, 9)}),
        ]
        means = time_to_box(recs, n_boxes=2)
        assert means[0] is not None and means[1] is None


def _record_with_boxes(start_boxes, end_boxes, targets) -> EpisodeRecord:
    return EpisodeRecord(level_id=("t", 0, 0), thinking_steps=0, solved=False,
                         ret=0.0, steps=1, actions=(Action.UP,),
                         state_keys=((0, ()), (1, ())),
                         boxes_seq=(tuple(start_boxes), tuple(end_boxes)),
                         targets=frozenset(targets))


class TestCategorize:
    def _rec(self, level_idx, solved, ret) -> EpisodeRecord:
        return EpisodeRecord(level_id=("t", 0, level_idx), thinking_steps=0,
                             solved=solved, ret=ret, steps=1, actions=(Action.UP,),
                             state_keys=((0, ()), (1, ())), boxes_seq=((), ()),
                             targets=frozenset())

    def test_self_comparison_lands_in_same_rows(self):
        recs = [self._rec(i, i % 2 == 0, float(i)) for i in range(10)]
        table = categorize(recs, recs)
        assert table.percentages["solved_same_returns"] == pytest.approx(50.0)
        assert table.percentages["unsolved_same_or_better_returns"] == pytest.approx(50.0)

    def test_rows_sum_to_100(self):
        rng = np.random.default_rng(5)
        base = [self._rec(i, bool(rng.integers(2)), float(rng.integers(5))) for i in range(40)]
        think = [self._rec(i, bool(rng.integers(2)), float(rng.integers(5))) for i in range(40)]
        table = categorize(base, think)
        assert sum(table.percentages.values()) == pytest.approx(100.0)
        assert set(table.percentages) == set(CATEGORY_ROWS)

    def test_flip_categories(self):
        base = [self._rec(0, False, -5.0), self._rec(1, True, 3.0)]
        think = [self._rec(0, True, 8.0), self._rec(1, False, -9.0)]
        table = categorize(base, think)
        assert table.percentages["solved_previously_unsolved"] == pytest.approx(50.0)
        assert table.percentages["unsolved_previously_solved"] == pytest.approx(50.0)

    def test_mismatched_sets_rejected(self):
        with pytest.raises(ValueError):
            categorize([self._rec(0, True, 1.0)], [self._rec(1, True, 1.0)])


class TestDifficultyJoin:
    def _rec(self, idx, n, solved) -> EpisodeRecord:
        return EpisodeRecord(level_id=("t", 0, idx), thinking_steps=n, solved=solved,
                             ret=0.0, steps=1, actions=(Action.UP,),
                             state_keys=((0, ()), (1, ())), boxes_seq=((), ()),
                             targets=frozenset())

    def test_partition_and_never_group(self):
        records = {
            0: [self._rec(0, 0, True), self._rec(1, 0, False), self._rec(2, 0, False)],
            6: [self._rec(0, 6, True), self._rec(1, 6, True), self._rec(2, 6, False)],
        }
        solver = {("t", 0, i): {"optimal_len": 10 + i, "expanded_nodes": 100 * (i + 1)}
                  for i in range(3)}
        joined = difficulty_join(records, solver)
        groups = {g["first_solved_n"]: g for g in joined["groups"]}
        assert groups[0]["count"] == 1 and groups[6]["count"] == 1
        assert groups["never"]["count"] == 1
        assert sum(g["count"] for g in joined["groups"]) == 3
        assert joined["missing_solver_entries"] == []

    def test_missing_solver_entries_listed(self):
        records = {0: [self._rec(0, 0, True)]}
        joined = difficulty_join(records, {})
        assert joined["missing_solver_entries"] == [("t", 0, 0)]

    def test_first_solved_assignment(self):
        records = {
            0: [self._rec(0, 0, False)],
            2: [self._rec(0, 2, True)],
            6: [self._rec(0, 6, True)],
        }
        assert first_solved_n(records)[("t", 0, 0)] == 2
