"""
Replay buffer for PAMDP transitions.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .pamdp import ContractViolation, Transition

logger = logging.getLogger(__name__)

NO_FORCED_TYPE = -1


@dataclass
class Batch:
    """Column-wise view of sampled transitions; rewards are already scaled"""

    obs: np.ndarray
    types: np.ndarray
    params: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminals: np.ndarray
    decisions: np.ndarray
    next_decisions: np.ndarray
    forced_next: np.ndarray

    def __len__(self):
        return self.obs.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling over occupied slots"""

    def __init__(self, capacity: int, obs_dim: int, param_dim: int, seed: int = 0, reward_scale: float = 1.0):
        if capacity < 1:
            raise ContractViolation("Replay capacity must be positive")
        self.capacity = int(capacity)
        self.reward_scale = reward_scale
        self.rng = np.random.default_rng(seed)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.params = np.zeros((self.capacity, param_dim))
        self.types = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.terminals = np.zeros(self.capacity)
        self.decisions = np.zeros(self.capacity, dtype=np.int64)
        self.forced_next = np.full(self.capacity, NO_FORCED_TYPE, dtype=np.int64)
        self._cursor = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, transition: Transition, type_index: int, forced_next: int = NO_FORCED_TYPE) -> None:
        i = self._cursor
        self.obs[i] = transition.state
        self.next_obs[i] = transition.next_state
        self.params[i] = transition.action.params_full
        self.types[i] = type_index
        self.rewards[i] = transition.reward * self.reward_scale
        self.terminals[i] = float(transition.terminal)
        self.decisions[i] = transition.decision_index
        self.forced_next[i] = forced_next
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if self._size == 0:
            raise ContractViolation("Cannot sample from an empty replay buffer")
        return self.rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int) -> Batch:
        idx = self.sample_indices(batch_size)
        return Batch(
            obs=self.obs[idx],
            types=self.types[idx],
            params=self.params[idx],
            rewards=self.rewards[idx],
            next_obs=self.next_obs[idx],
            terminals=self.terminals[idx],
            decisions=self.decisions[idx],
            next_decisions=self.decisions[idx] + 1,
            forced_next=self.forced_next[idx],
        )
