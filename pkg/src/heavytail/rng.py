"""Counter-based random streams.

Every stream is a Philox generator keyed by the master seed; the stream index
occupies the high word of the 256-bit counter, so streams never overlap and a
run is reproducible from ``(seed, stream)`` alone, whatever order workers use.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """A deterministic uniform source identified by ``(seed, stream)``."""

    def __init__(self, seed: int, stream: int = 0):
        if seed is None:
            raise ValueError("seed is mandatory")
        self.seed = int(seed) & _MASK64
        self.stream = int(stream)
        if self.stream < 0:
            raise ValueError("stream index must be non-negative")
        counter = np.array([0, 0, 0, self.stream], dtype=np.uint64)
        key = np.array([self.seed, 0x9E3779B97F4A7C15], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(counter=counter, key=key))

    def spawn(self, index: int) -> "RngStream":
        """Child stream; children of different parents stay disjoint."""
        return RngStream(self.seed, (self.stream << 20) + int(index) + 1)

    def uniform(self, n: int) -> np.ndarray:
        """Draws in [0, 1)."""
        return self._gen.random(int(n))

    def uniform_open(self, n: int) -> np.ndarray:
        """Draws in (0, 1], suitable as survival probabilities."""
        return 1.0 - self._gen.random(int(n))

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        return self._gen.integers(low, high, size=int(n))

    def poisson(self, lam: float, n: int) -> np.ndarray:
        return self._gen.poisson(lam, size=int(n))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def partition(n: int, workers: int) -> list[int]:
    """Split ``n`` draws into ``workers`` chunk sizes (first chunks get the remainder)."""
    workers = max(1, int(workers))
    base, extra = divmod(int(n), workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]
