"""Vectorized rollout collection with persistent recurrent state.

Finished environments reset to the next level in a seeded round-robin over
the training set; their recurrent state is zeroed at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..engine import Action, render, reset, step
from ..levels import LevelSet
from ..models import obs_to_input


@dataclass
class TrajectoryBatch:
    """[num_envs x unroll] rollout storage plus what the learner needs to replay it."""

    obs: np.ndarray            # [K,T,3,H,W] observations fed to the policy
    actions: np.ndarray        # [K,T] int64
    mu_logp: np.ndarray        # [K,T] behavior log-probs at collection time
    rewards: np.ndarray        # [K,T]
    dones: np.ndarray          # [K,T] bool
    bootstrap_obs: np.ndarray  # [K,3,H,W]
    init_hs: list[np.ndarray] = field(default_factory=list)  # per layer [K,C,H,W]
    init_cs: list[np.ndarray] = field(default_factory=list)
    episode_returns: list[float] = field(default_factory=list)  # finished this batch
    episode_lengths: list[int] = field(default_factory=list)
    episode_solved: list[bool] = field(default_factory=list)


class VectorRunner:
    """Advances K environments under a policy, carrying per-env DRC state."""

    def __init__(self, model, levels: LevelSet, num_envs: int, seed: int = 0,
                 mode: str = "train"):
        if num_envs < 1:
            raise ValueError("num_envs must be >= 1")
        self.model = model
        self.levels = levels
        self.num_envs = num_envs
        self.mode = mode
        self.rng = np.random.default_rng(seed)
        self._order = self.rng.permutation(len(levels))
        self._cursor = 0
        self.states = []
        cfg = model.cfg
        self._obs = np.zeros((num_envs, 3, cfg.height, cfg.width), dtype=np.float32)
        for i in range(num_envs):
            self._reset_env(i)
        self._recurrent = self._zero_state()
        self._ep_return = np.zeros(num_envs)
        self._ep_len = np.zeros(num_envs, dtype=np.int64)

    def _zero_state(self):
        if self.model.initial_state(1) is None:
            return None
        cfg = self.model.cfg
        k = self.num_envs
        return [
            (np.zeros((k, cfg.channels, cfg.height, cfg.width), dtype=np.float32),
             np.zeros((k, cfg.channels, cfg.height, cfg.width), dtype=np.float32))
            for _ in range(cfg.depth)
        ]

    def _next_level(self):
        level = self.levels[int(self._order[self._cursor])]
        self._cursor += 1
        if self._cursor == len(self._order):
            self._cursor = 0
        return level

    def _reset_env(self, i: int) -> None:
        level = self._next_level()
        seed = int(self.rng.integers(0, 2**31))
        state, obs = reset(level, seed=seed, mode=self.mode)
        if i < len(self.states):
            self.states[i] = state
        else:
            self.states.append(state)
        self._obs[i] = obs_to_input(obs)[0]

    def _policy_step(self, obs_batch: np.ndarray):
        with nn.no_grad():
            if self._recurrent is None:
                logits, value, _ = self.model.forward(obs_batch)
            else:
                state = [(nn.constant(h), nn.constant(c)) for h, c in self._recurrent]
                logits, value, new_state = self.model.forward(obs_batch, state)
                self._recurrent = [(h.data, c.data) for h, c in new_state]
        return logits.data, value.data

    def collect(self, unroll: int) -> TrajectoryBatch:
        """Collect `unroll` transitions per env under the current parameters."""
        k = self.num_envs
        cfg = self.model.cfg
        obs = np.zeros((k, unroll, 3, cfg.height, cfg.width), dtype=np.float32)
        actions = np.zeros((k, unroll), dtype=np.int64)
        mu_logp = np.zeros((k, unroll), dtype=np.float32)
        rewards = np.zeros((k, unroll), dtype=np.float32)
        dones = np.zeros((k, unroll), dtype=bool)
        init_hs = [h.copy() for h, _ in self._recurrent] if self._recurrent else []
        init_cs = [c.copy() for _, c in self._recurrent] if self._recurrent else []
        ep_returns: list[float] = []
        ep_lengths: list[int] = []
        ep_solved: list[bool] = []

        rows = np.arange(k)
        for t in range(unroll):
            obs[:, t] = self._obs
            logits, _ = self._policy_step(self._obs)
            shifted = logits - logits.max(axis=1, keepdims=True)
            logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            probs = np.exp(logp)
            u = self.rng.random(k)
            acts = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
            acts = np.minimum(acts, 3)
            actions[:, t] = acts
            mu_logp[:, t] = logp[rows, acts]

            for i in range(k):
                new_state, result, ob = step(self.states[i], Action(int(acts[i])))
                rewards[i, t] = result.reward
                dones[i, t] = result.done
                self._ep_return[i] += result.reward
                self._ep_len[i] += 1
                if result.done:
                    ep_returns.append(float(self._ep_return[i]))
                    ep_lengths.append(int(self._ep_len[i]))
                    ep_solved.append(new_state.solved)
                    self._ep_return[i] = 0.0
                    self._ep_len[i] = 0
                    self._reset_env(i)
                    if self._recurrent is not None:
                        for h, c in self._recurrent:
                            h[i] = 0.0
                            c[i] = 0.0
                else:
                    self.states[i] = new_state
                    self._obs[i] = obs_to_input(ob)[0]

        return TrajectoryBatch(
            obs=obs, actions=actions, mu_logp=mu_logp, rewards=rewards, dones=dones,
            bootstrap_obs=self._obs.copy(), init_hs=init_hs, init_cs=init_cs,
            episode_returns=ep_returns, episode_lengths=ep_lengths, episode_solved=ep_solved,
        )
