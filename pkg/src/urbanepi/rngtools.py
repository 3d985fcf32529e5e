"""Seeding helpers and weighted-sampling utilities.

All randomness in the package flows through ``numpy.random.Generator``
instances derived from a master seed via ``SeedSequence`` spawn keys, so
results are reproducible regardless of execution order or threading.
"""

from __future__ import annotations

import numpy as np


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for a (stage, config, replica, ...) path.

    The same (master_seed, path) always yields the same stream; distinct
    paths yield statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return np.random.default_rng(ss)


def child_seed(master_seed: int, *path: int) -> int:
    """Derive an integer seed for a sub-experiment so it can fan out its own
    substreams without colliding with any sibling path."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    a, b = ss.generate_state(2, np.uint64)
    return (int(a) << 64) | int(b)


class AliasSampler:
    """Vose alias method for O(1) draws from a fixed discrete distribution."""

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-D array")
        if np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        n = w.size
        prob = w * (n / w.sum())
        alias = np.zeros(n, dtype=np.int64)
        small = [i for i in range(n) if prob[i] < 1.0]
        large = [i for i in range(n) if prob[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            alias[s] = l
            prob[l] = prob[l] - (1.0 - prob[s])
            (small if prob[l] < 1.0 else large).append(l)
        # leftovers are 1.0 up to float roundoff
        for i in small + large:
            prob[i] = 1.0
        self.n = n
        self._prob = prob
        self._alias = alias

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.integers(0, self.n, size=size)
        accept = rng.random(size) < self._prob[idx]
        return np.where(accept, idx, self._alias[idx])
