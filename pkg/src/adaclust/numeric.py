"""Distances and portable seeded random streams.

All arrays are float64. Random streams are backed by numpy's Philox
counter-based bit generator, whose output is specified independently of
platform and numpy build, so a seed pins the stream exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError

_MASK64 = (1 << 64) - 1


def as_matrix(data, cols=None) -> np.ndarray:
    """Coerce to a 2-d float64 array, checking finiteness and width."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1) if m.size else m.reshape(0, cols or 0)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"expected {cols} columns, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ParameterError("matrix contains non-finite entries")
    return m


def sq_euclidean(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.dot(d, d))


def pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared distances between rows of ``x`` and rows of ``y``.

    Computed by direct differencing rather than the expanded dot-product
    form, so identical rows give exactly zero.
    """
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _mix(seed: int, key: int) -> int:
    # splitmix64 finalizer over seed xor golden-ratio-scaled key
    z = (seed ^ ((key + 1) * 0x9E3779B97F4A7C15)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Seeded random stream with deterministic forking.

    ``fork(*keys)`` derives an independent child stream from the seed and
    the keys only, never from how much of the parent has been consumed,
    so per-task streams do not depend on scheduling.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ParameterError("seed must be non-negative")
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def fork(self, *keys: int) -> "Rng":
        s = self.seed
        for k in keys:
            s = _mix(s, int(k))
        return Rng(s)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, n: int) -> np.ndarray:
        if n < 1:
            raise ParameterError("n must be >= 1")
        return self._gen.random(n)

    def gaussian(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        z = self._gen.standard_normal(n)
        if sigma == 0:
            return np.full(n, float(mu))
        return mu + sigma * z

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_weighted(self, weights: np.ndarray) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = float(weights.sum())
        r = self._gen.random() * total
        idx = int(np.searchsorted(np.cumsum(weights), r, side="right"))
        return min(idx, len(weights) - 1)


def rng_uniform(state: Rng, n: int) -> np.ndarray:
    return state.uniform(n)


def rng_gaussian(state: Rng, n: int, mu: float, sigma: float) -> np.ndarray:
    return state.gaussian(n, mu, sigma)
