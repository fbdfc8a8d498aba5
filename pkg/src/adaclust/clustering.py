"""K-Means and X-Means with a hard cap on the number of clusters.

X-Means grows the clustering from a single cluster by trying a 2-means
split inside each current cluster and keeping the split when the Bayesian
information criterion of the two-child model beats the one-cluster model
on that cluster's own points. The cap bounds the total number of clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .numeric import Rng, as_matrix, pairwise_sq_dists

VARIANCE_FLOOR = 1e-12


@dataclass
class ClusterResult:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    inertia_history: list = field(default_factory=list)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _assign(points, centroids):
    d = pairwise_sq_dists(points, centroids)
    # argmin returns the first minimum, i.e. the lowest centroid index on ties
    a = np.argmin(d, axis=1)
    return a, d[np.arange(len(points)), a]


def kmeans_plus_plus(points: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    n = len(points)
    centers = [int(rng.integers(n))]
    closest = pairwise_sq_dists(points, points[centers[0]][None, :])[:, 0]
    for _ in range(1, k):
        if closest.sum() > 0:
            idx = rng.choice_weighted(closest)
        else:
            idx = int(rng.integers(n))
        centers.append(idx)
        closest = np.minimum(closest, pairwise_sq_dists(points, points[idx][None, :])[:, 0])
    return points[centers].copy()


def kmeans(points, k: int, rng: Rng, max_iters: int = 100, init=None) -> ClusterResult:
    """K-Means++ seeding (or the given ``init`` centroids) followed by Lloyd.

    Stops when the assignment vector repeats or after ``max_iters`` updates.
    A cluster that empties is reseeded at the point farthest from its
    current centroid.
    """
    x = as_matrix(points)
    n = len(x)
    if k < 1:
        raise ParameterError("k must be >= 1")
    if n < k:
        raise DegenerateInputError(f"{n} points cannot form {k} clusters")
    if init is None:
        centroids = kmeans_plus_plus(x, k, rng)
    else:
        centroids = np.array(init, dtype=np.float64, copy=True)
        if centroids.shape != (k, x.shape[1]):
            raise ParameterError("init centroids have the wrong shape")

    assignment, dist = _assign(x, centroids)
    history = [float(dist.sum())]
    for _ in range(max_iters):
        counts = np.bincount(assignment, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assignment, x)
        new_centroids = centroids.copy()
        nonempty = counts > 0
        new_centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        for c in np.flatnonzero(~nonempty):
            far = int(np.argmax(dist))
            new_centroids[c] = x[far]
            dist[far] = 0.0
        centroids = new_centroids
        new_assignment, dist = _assign(x, centroids)
        history.append(float(dist.sum()))
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return ClusterResult(k, centroids, assignment, history[-1], history)


def bic_penalty(k: int, dim: int, n: int) -> float:
    """``p/2 * ln n`` with ``p = (k-1) + k*dim + 1`` free parameters."""
    p = (k - 1) + k * dim + 1
    return 0.5 * p * math.log(n)


def bic_log_likelihood(points, result: ClusterResult) -> float:
    """Maximised log-likelihood of identical spherical Gaussians.

    The shared variance is the pooled estimate ``inertia / (n - k)``,
    floored so that duplicate-point clusters stay finite.
    """
    x = np.asarray(points, dtype=np.float64)
    n, dim = x.shape
    k = result.k
    if n <= k:
        raise DegenerateInputError(f"BIC needs more than {k} points, got {n}")
    var = max(result.inertia / (n - k), VARIANCE_FLOOR)
    sizes = np.bincount(result.assignment, minlength=k).astype(np.float64)
    sizes = sizes[sizes > 0]
    mixing = float(np.sum(sizes * np.log(sizes / n)))
    return mixing - 0.5 * n * dim * math.log(2.0 * math.pi * var) - result.inertia / (2.0 * var)


def bic_score(points, result: ClusterResult) -> float:
    x = np.asarray(points, dtype=np.float64)
    return bic_log_likelihood(x, result) - bic_penalty(result.k, x.shape[1], len(x))


def _single_cluster(x: np.ndarray) -> ClusterResult:
    centroid = x.mean(axis=0, keepdims=True)
    inertia = float(pairwise_sq_dists(x, centroid).sum())
    return ClusterResult(1, centroid, np.zeros(len(x), dtype=np.int64), inertia, [inertia])


def _best_split(x: np.ndarray, rng: Rng, restarts: int, max_iters: int) -> ClusterResult:
    best = None
    for _ in range(max(1, restarts)):
        res = kmeans(x, 2, rng, max_iters=max_iters)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def xmeans_capped(points, max_k: int, rng: Rng, restarts: int = 1,
                  max_iters: int = 100) -> ClusterResult:
    """X-Means that never returns more than ``max_k`` clusters.

    Each round scores a local 2-means split of every current cluster and
    accepts improving splits in order of BIC gain while the cap allows,
    then refines all centroids jointly with Lloyd iterations. Rounds
    repeat until no split is accepted.
    """
    if max_k < 1:
        raise ParameterError("max_k must be >= 1")
    x = as_matrix(points)
    if len(x) == 0:
        raise DegenerateInputError("no points to cluster")
    current = _single_cluster(x)
    if len(x) < 2:
        return current

    while current.k < max_k:
        gains = []
        for c in range(current.k):
            sub = x[current.assignment == c]
            if len(sub) < 3:
                continue
            child = _best_split(sub, rng, restarts, max_iters)
            if np.any(child.sizes == 0):
                continue
            gain = bic_score(sub, child) - bic_score(sub, _single_cluster(sub))
            if gain > 0:
                gains.append((gain, c, child))
        if not gains:
            break
        gains.sort(key=lambda g: (-g[0], g[1]))
        room = max_k - current.k
        accepted = {c: child for _, c, child in gains[:room]}
        centroids = []
        for c in range(current.k):
            if c in accepted:
                centroids.extend(accepted[c].centroids)
            else:
                centroids.append(current.centroids[c])
        centroids = np.array(centroids)
        current = kmeans(x, len(centroids), rng, max_iters=max_iters, init=centroids)
    return current
