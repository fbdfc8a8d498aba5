import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaclust.clustering import (
    ClusterResult,
    bic_log_likelihood,
    bic_penalty,
    bic_score,
    kmeans,
    xmeans_capped,
)
from adaclust.errors import DegenerateInputError
from adaclust.numeric import Rng


def blobs(seed, centers, n=50, sigma=1.0):
    rng = Rng(seed)
    centers = np.asarray(centers, dtype=float)
    d = centers.shape[1]
    return np.vstack([c + rng.gaussian(n * d, 0, sigma).reshape(n, d) for c in centers])


# pairwise 20 sigma apart; embedded in 4-d because in the plane the first
# 1 -> 2 split of this configuration sits right on the BIC decision boundary
TRIANGLE = [[0.0, 0.0, 0.0, 0.0], [20.0, 0.0, 0.0, 0.0], [10.0, 10.0 * np.sqrt(3), 0.0, 0.0]]


def best_kmeans(points, k, seed, restarts=10):
    rng = Rng(seed)
    return min((kmeans(points, k, rng) for _ in range(restarts)), key=lambda r: r.inertia)


def bic_oracle_k(points, max_k, seed):
    """Global BIC over k = 1..max_k with restarted K-Means."""
    scores = [bic_score(points, best_kmeans(points, k, seed)) for k in range(1, max_k + 1)]
    return int(np.argmax(scores)) + 1


# -- kmeans ------------------------------------------------------------------

def test_kmeans_k1_is_mean():
    pts = Rng(0).gaussian(30).reshape(10, 3)
    res = kmeans(pts, 1, Rng(1))
    assert np.allclose(res.centroids[0], pts.mean(axis=0))
    assert not res.assignment.any()


def test_kmeans_four_points():
    pts = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    for seed in range(10):
        res = kmeans(pts, 2, Rng(seed))
        cents = sorted(map(tuple, res.centroids))
        assert cents == [(0.0, 0.5), (10.0, 0.5)]
        assert res.inertia == pytest.approx(1.0)


@pytest.mark.parametrize("k", [1, 2, 5])
def test_kmeans_identical_points(k):
    pts = np.tile([[1.0, 2.0]], (5, 1))
    assert kmeans(pts, k, Rng(0)).inertia == 0.0


def test_kmeans_too_few_points():
    with pytest.raises(DegenerateInputError):
        kmeans(np.zeros((2, 2)), 3, Rng(0))


def test_kmeans_distinct_points_zero_inertia():
    pts = np.array([[0.0], [0.0], [1.0], [5.0], [5.0], [9.0]])
    assert kmeans(pts, 4, Rng(3)).inertia == 0.0


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_kmeans_properties(seed, k):
    pts = Rng(seed).gaussian(60).reshape(30, 2)
    res = kmeans(pts, k, Rng(seed + 1))
    hist = np.array(res.inertia_history)
    assert np.all(np.diff(hist) <= 1e-9 * max(1.0, hist[0]))
    d = ((pts[:, None, :] - res.centroids[None]) ** 2).sum(-1)
    assert np.allclose(d[np.arange(30), res.assignment], d.min(axis=1))
    again = kmeans(pts, k, Rng(seed + 1))
    assert np.array_equal(res.assignment, again.assignment)
    assert np.array_equal(res.centroids, again.centroids)


def test_kmeans_tie_goes_to_lowest_index():
    pts = np.array([[0.0], [1.0], [2.0]])
    res = kmeans(pts, 2, Rng(0), init=np.array([[0.5], [1.5]]), max_iters=0)
    # point 1.0 is equidistant from both centroids
    assert res.assignment.tolist() == [0, 0, 1]


# -- BIC -----------------------------------------------------------------------

def bic_by_hand(points, assignment, k):
    n, d = points.shape
    cents = np.array([points[assignment == j].mean(axis=0) for j in range(k)])
    inertia = sum(((points[i] - cents[assignment[i]]) ** 2).sum() for i in range(n))
    var = inertia / (n - k)
    ll = 0.0
    for j in range(k):
        rn = (assignment == j).sum()
        ll += rn * np.log(rn / n) - rn * d / 2 * np.log(2 * np.pi * var)
    ll -= (n - k) / 2
    p = (k - 1) + k * d + 1
    return ll - p / 2 * np.log(n)


def test_bic_matches_hand_formula():
    pts = blobs(0, [[0, 0], [8, 0]], n=20)
    res = kmeans(pts, 2, Rng(0))
    assert bic_score(pts, res) == pytest.approx(bic_by_hand(pts, res.assignment, 2), rel=1e-12)


def test_bic_prefers_one_cluster_for_one_gaussian():
    for seed in range(10):
        pts = blobs(seed, [[0, 0, 0]], n=100)
        assert bic_score(pts, best_kmeans(pts, 1, seed)) > bic_score(pts, best_kmeans(pts, 2, seed))


def test_bic_prefers_two_clusters_for_separated_gaussians():
    for seed in range(10):
        pts = blobs(seed, [[0, 0], [20, 0]], n=50)
        assert bic_score(pts, best_kmeans(pts, 2, seed)) > bic_score(pts, best_kmeans(pts, 1, seed))


def test_bic_penalty_on_duplication():
    pts = blobs(1, [[0, 0], [9, 9]], n=15)
    res = kmeans(pts, 2, Rng(0))
    dup = np.vstack([pts, pts])
    dres = ClusterResult(2, res.centroids, np.concatenate([res.assignment] * 2), 2 * res.inertia)
    p = (2 - 1) + 2 * 2 + 1
    assert bic_penalty(2, 2, 30) == pytest.approx(p / 2 * np.log(30), rel=1e-15)
    assert bic_penalty(2, 2, 60) - bic_penalty(2, 2, 30) == pytest.approx(p / 2 * np.log(2), rel=1e-12)
    assert bic_score(dup, dres) == pytest.approx(bic_log_likelihood(dup, dres) - p / 2 * np.log(60), rel=1e-12)


def test_bic_degenerate():
    pts = np.zeros((2, 2))
    with pytest.raises(DegenerateInputError):
        bic_score(pts, ClusterResult(2, pts, np.array([0, 1]), 0.0))


def test_bic_duplicate_points_finite():
    pts = np.tile([[1.0, 1.0]], (6, 1))
    assert np.isfinite(bic_score(pts, kmeans(pts, 1, Rng(0))))


# -- xmeans ------------------------------------------------------------------

def test_xmeans_cap_one():
    pts = blobs(0, TRIANGLE)
    assert xmeans_capped(pts, 1, Rng(0)).k == 1


@pytest.mark.parametrize("seed", range(5))
def test_xmeans_three_gaussians_matches_oracle(seed):
    pts = blobs(seed, TRIANGLE)
    assert bic_oracle_k(pts, 5, seed) == 3
    assert xmeans_capped(pts, 5, Rng(seed)).k == 3


@pytest.mark.parametrize("seed", range(5))
def test_xmeans_three_gaussians_cap_two(seed):
    pts = blobs(seed, TRIANGLE)
    assert bic_oracle_k(pts, 2, seed) == 2
    assert xmeans_capped(pts, 2, Rng(seed)).k == 2


def test_xmeans_single_gaussian():
    for seed in range(5):
        pts = blobs(seed, [[0.0] * 4], n=80)
        assert xmeans_capped(pts, 5, Rng(seed)).k == 1


def test_xmeans_tiny_inputs():
    assert xmeans_capped(np.array([[1.0, 2.0]]), 5, Rng(0)).k == 1
    with pytest.raises(DegenerateInputError):
        xmeans_capped(np.zeros((0, 2)), 3, Rng(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(3, 60))
def test_xmeans_never_exceeds_cap(seed, cap, n):
    rng = Rng(seed)
    pts = rng.gaussian(n * 2, 0, 5).reshape(n, 2)
    res = xmeans_capped(pts, cap, rng.fork(1))
    assert 1 <= res.k <= cap
    again = xmeans_capped(pts, cap, Rng(seed).fork(1))
    assert np.array_equal(res.assignment, again.assignment)


@pytest.mark.parametrize("scale", [0.01, 1.0, 1000.0])
def test_xmeans_split_decisions_scale_consistent(scale):
    pts = blobs(3, TRIANGLE)
    assert xmeans_capped(pts * scale, 5, Rng(3)).k == 3
    single = blobs(4, [[0.0] * 4], n=100)
    assert xmeans_capped(single * scale, 5, Rng(4)).k == 1
