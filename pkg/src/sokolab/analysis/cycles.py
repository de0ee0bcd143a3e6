"""Game-state cycle detection and cycle-for-thinking replacement.

A cycle is an interval [t, t+N) with state(t) = state(t+N), N minimal for
that start. Redundant cycles (visited-state set contained in an earlier
kept cycle's set) are pruned by default.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..engine import Action, reset, step
from ..levels import Level
from ..models import obs_to_input
from .episodes import EpisodeRecord


@dataclass(frozen=True)
class Cycle:
    start: int
    length: int
    states: frozenset  # state keys visited during [start, start+length)


def minimal_cycles(state_keys) -> list[Cycle]:
    """All (start, minimal length) recurrences in a state-key sequence."""
    occurrences: dict = {}
    for i, key in enumerate(state_keys):
        occurrences.setdefault(key, []).append(i)
    cycles = []
    for t, key in enumerate(state_keys):
        positions = occurrences[key]
        j = bisect_right(positions, t)
        if j < len(positions):
            n = positions[j] - t
            cycles.append(Cycle(start=t, length=n,
                                states=frozenset(state_keys[t:t + n])))
    return cycles


def prune_redundant(cycles: list[Cycle], rule: str = "subset") -> list[Cycle]:
    """Drop cycles whose visited set repeats an already-kept cycle's set."""
    kept: list[Cycle] = []
    for cyc in sorted(cycles, key=lambda c: (c.start, c.length)):
        if rule == "subset":
            redundant = any(cyc.states <= k.states for k in kept)
        elif rule == "exact":
            redundant = any(cyc.states == k.states for k in kept)
        else:
            raise ValueError(f"unknown prune rule {rule!r}")
        if not redundant:
            kept.append(cyc)
    return kept


def detect_cycles(record: EpisodeRecord, prune: str | None = "subset") -> list[Cycle]:
    """Minimal recurrences in an episode, optionally pruned, sorted by start."""
    cycles = minimal_cycles(record.state_keys)
    if prune is not None:
        cycles = prune_redundant(cycles, prune)
    return sorted(cycles, key=lambda c: (c.start, c.length))


def cycle_start_histogram(records: list[EpisodeRecord], prune: str | None = "subset",
                          max_start: int = 120) -> list[int]:
    """Counts of cycle start times pooled over episodes."""
    counts = [0] * (max_start + 1)
    for rec in records:
        for cyc in detect_cycles(rec, prune):
            counts[min(cyc.start, max_start)] += 1
    return counts


def early_cycle_count(records: list[EpisodeRecord], window: int = 5,
                      prune: str | None = "subset") -> int:
    """Number of cycles starting within the first `window` env steps."""
    return sum(
        1 for rec in records for cyc in detect_cycles(rec, prune) if cyc.start < window
    )


def early_cycle_count_vs_thinking(model, levels, ns, window: int = 5,
                                  deterministic: bool = True) -> list[dict]:
    """Early-cycle totals as a function of initial thinking steps."""
    from .episodes import thinking_sweep

    _, records = thinking_sweep(model, levels, ns=tuple(ns), deterministic=deterministic)
    return [{"n": n, "early_cycles": early_cycle_count(records[n], window)} for n in ns]


def replace_cycle_with_thinking(model, level: Level, record: EpisodeRecord, cycle: Cycle) -> dict:
    """Re-run the episode replacing an N-cycle with N thinking steps.

    Reports how long the post-cycle behavior matches the original, and
    whether new cycles start immediately after thinking (or within N steps).
    The policy acts greedily; behavior comparison needs a deterministic run.
    """
    state, obs = reset(level, mode="eval")
    rec_state = model.initial_state(1)
    x = nn.constant(obs_to_input(obs))
    with nn.no_grad():
        # reproduce the recurrent state at the cycle start by replaying the prefix
        for t in range(cycle.start):
            _, _, rec_state = model.forward(x, rec_state)
            state, _, obs = step(state, record.actions[t])
            x = nn.constant(obs_to_input(obs))
        for _ in range(cycle.length):
            _, _, rec_state = model.forward(x, rec_state)
        new_actions: list[Action] = []
        new_keys = [state.key()]
        while True:
            logits, _, rec_state = model.forward(x, rec_state)
            a = Action(int(np.argmax(logits.data[0])))
            state, result, obs = step(state, a)
            x = nn.constant(obs_to_input(obs))
            new_actions.append(a)
            new_keys.append(state.key())
            if result.done:
                break

    original_tail = record.actions[cycle.start + cycle.length:]
    horizon = 0
    for a, b in zip(new_actions, original_tail):
        if a != b:
            break
        horizon += 1

    suffix_cycles = prune_redundant(minimal_cycles(tuple(new_keys)))
    return {
        "behavior_match_horizon": horizon,
        "full_match": horizon == len(original_tail) == len(new_actions),
        "post_thinking_cycle_free_1": not any(c.start == 0 for c in suffix_cycles),
        "post_thinking_cycle_free_N": not any(c.start < cycle.length for c in suffix_cycles),
        "solved": state.solved,
    }
