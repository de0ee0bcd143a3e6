from .cycles import (
    Cycle,
    cycle_start_histogram,
    detect_cycles,
    early_cycle_count,
    early_cycle_count_vs_thinking,
    minimal_cycles,
    prune_redundant,
    replace_cycle_with_thinking,
)
from .episodes import DEFAULT_NS, EpisodeRecord, run_with_thinking, thinking_sweep, write_sweep_csv
from .tables import (
    CATEGORY_ROWS,
    CategoryTable,
    box_placement_times,
    categorize,
    difficulty_join,
    first_solved_n,
    multi_set_success,
    solved_at_b_not_a,
    time_to_box,
    time_to_box_table,
    write_category_csv,
)

__all__ = [
    "Cycle", "cycle_start_histogram", "detect_cycles", "early_cycle_count",
    "early_cycle_count_vs_thinking", "minimal_cycles", "prune_redundant",
    "replace_cycle_with_thinking",
    "DEFAULT_NS", "EpisodeRecord", "run_with_thinking", "thinking_sweep", "write_sweep_csv",
    "CATEGORY_ROWS", "CategoryTable", "box_placement_times", "categorize",
    "difficulty_join", "first_solved_n", "multi_set_success", "solved_at_b_not_a",
    "time_to_box", "time_to_box_table", "write_category_csv",
]
