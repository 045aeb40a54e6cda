"""Ring-buffer experience storage with episode-aware neighborhood lookup.

Transitions are addressed by their global push index, which stays valid
across ring wraparound: index g lives at slot g % capacity while
pushes - len <= g < pushes. Neighborhood windows never cross an episode
seam; callers get None instead of a partial window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NotReadyError


@dataclass(slots=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminated: bool
    episode_id: int
    step_index: int


class ReplayBuffer:
    def __init__(self, capacity: int, min_size: int = 1):
        if capacity < 1:
            raise ConfigError(f"capacity must be >= 1, got {capacity}")
        if min_size < 1 or min_size > capacity:
            raise ConfigError(f"min_size must be in [1, capacity], got {min_size}")
        self.capacity = capacity
        self.min_size = min_size
        self.pushes = 0  # total number of push() calls ever
        self._slots: list[Transition | None] = [None] * capacity

    def __len__(self) -> int:
        return min(self.pushes, self.capacity)

    @property
    def ready(self) -> bool:
        return len(self) >= self.min_size

    def push(self, t: Transition) -> None:
        self._slots[self.pushes % self.capacity] = t
        self.pushes += 1

    def oldest_index(self) -> int:
        return self.pushes - len(self)

    def get(self, g: int) -> Transition:
        """Transition by global push index."""
        if not self.oldest_index() <= g < self.pushes:
            raise IndexError(f"global index {g} not in buffer [{self.oldest_index()}, {self.pushes})")
        return self._slots[g % self.capacity]

    def last_indices(self, n: int) -> range:
        """Global indices of the min(n, len) most recent transitions, oldest first."""
        n = min(n, len(self))
        return range(self.pushes - n, self.pushes)

    def last_window(self, n: int) -> list[Transition]:
        """The min(n, len) most recent transitions in insertion order."""
        return [self.get(g) for g in self.last_indices(n)]

    def sample_uniform(self, rng: np.random.Generator, n: int) -> list[Transition]:
        """n i.i.d. uniform draws with replacement."""
        if not self.ready:
            raise NotReadyError(f"buffer holds {len(self)} < min_size {self.min_size}")
        lo = self.oldest_index()
        picks = rng.integers(lo, self.pushes, size=n)
        return [self._slots[g % self.capacity] for g in picks]

    def neighbor_window(self, center: int, k: int) -> list[Transition] | None:
        """K/2 preceding and K/2 following same-episode transitions of `center`.

        Temporal order, center excluded. None when the full window does not
        exist inside one episode (episode seam or buffer edge).
        """
        if k % 2 != 0 or k < 2:
            raise ConfigError(f"window size K must be even and >= 2, got {k}")
        half = k // 2
        lo, hi = center - half, center + half
        if lo < self.oldest_index() or hi >= self.pushes:
            return None
        ct = self.get(center)
        window = []
        for g in range(lo, hi + 1):
            if g == center:
                continue
            t = self.get(g)
            if t.episode_id != ct.episode_id:
                return None
            # same-episode transitions are contiguous in insertion order
            assert t.step_index == ct.step_index + (g - center)
            window.append(t)
        return window
