"""Alias-method sampling from discrete distributions.

Vose's construction: O(K) setup, O(1) per draw.  Used by the frame
simulator, where every experiment repetition samples a spectral bin pair
from a large discrete distribution.
"""

import numpy as np


class AliasTable:
    """Sampler for a fixed discrete distribution over K outcomes."""

    def __init__(self, weights: np.ndarray):
        w = np.asarray(weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("weights must be non-empty")
        if np.any(w < 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0.0:
            raise ValueError("weights must have positive total")

        k = w.size
        scaled = w * (k / total)
        prob = np.ones(k)
        alias = np.arange(k)

        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            lo = small.pop()
            hi = large.pop()
            prob[lo] = scaled[lo]
            alias[lo] = hi
            scaled[hi] -= 1.0 - scaled[lo]
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # Leftovers are 1.0 up to roundoff.
        for i in small + large:
            prob[i] = 1.0

        self.n_outcomes = k
        self._prob = prob
        self._alias = alias

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` outcome indices; consumes exactly two RNG vectors."""
        idx = rng.integers(0, self.n_outcomes, size=size)
        keep = rng.random(size) < self._prob[idx]
        return np.where(keep, idx, self._alias[idx])
