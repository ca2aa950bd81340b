"""Bookkeeping for activations held during a network pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ActivationCacheStats:
    """Peak number of cached tensors and cached scalars within one pass."""

    peak_cached_tensors: int = 0
    peak_cached_scalars: int = 0

    def observe(self, tensors: int, scalars: int) -> None:
        self.peak_cached_tensors = max(self.peak_cached_tensors, tensors)
        self.peak_cached_scalars = max(self.peak_cached_scalars, scalars)


class ActivationCache:
    """Named intermediate tensors of the layer currently being differentiated.

    Every insertion updates the attached stats; ``clear`` must be called
    before moving on to the next layer.
    """

    def __init__(self, stats: ActivationCacheStats | None = None) -> None:
        self.stats = stats if stats is not None else ActivationCacheStats()
        self._entries: dict[str, np.ndarray] = {}

    def put(self, name: str, value: np.ndarray) -> np.ndarray:
        self._entries[name] = value
        self.stats.observe(
            len(self._entries), sum(entry.size for entry in self._entries.values())
        )
        return value

    def get(self, name: str) -> np.ndarray:
        return self._entries[name]

    def clear(self) -> None:
        self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)


__all__ = ["ActivationCache", "ActivationCacheStats"]
