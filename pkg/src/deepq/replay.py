"""Fixed-capacity replay memory with uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StateError


@dataclass(frozen=True, eq=False)
class Transition:
    phi_before: object
    action: int
    reward: float
    phi_after: object
    terminal: bool


class ReplayMemory:
    """Ring buffer holding the most recent ``capacity`` transitions.

    Sampling is uniform and with replacement, so any non-empty memory can
    serve a batch of any size.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be at least 1")
        self.capacity = int(capacity)
        self._storage: list = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._storage)

    @property
    def count(self) -> int:
        return len(self._storage)

    def push(self, transition: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        if not self._storage:
            raise StateError("cannot sample from an empty replay memory")
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]

    def contents(self) -> list:
        """Stored transitions, oldest first."""
        if len(self._storage) < self.capacity:
            return list(self._storage)
        return self._storage[self._cursor:] + self._storage[:self._cursor]
