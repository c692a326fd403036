import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from grmssvdd.errors import InvalidInput, ShapeMismatch
from grmssvdd.graphs import (
    GraphKind,
    between_cluster_laplacian,
    build_laplacian,
    kmeans,
    knn_adjacency,
    knn_laplacian,
    within_cluster_laplacian,
)


def test_two_points():
    L = knn_laplacian(np.array([[0.0, 1.0]]), 1).matrix
    assert np.array_equal(L, np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_collinear_degrees():
    # points 0,1,2,3 on a line: each picks its nearest, ties to the lower index
    A = knn_adjacency(np.array([[0.0, 1.0, 2.0, 3.0]]), 1)
    assert np.array_equal(A.sum(axis=1), [1, 2, 2, 1])
    assert A[2, 1] == 1 and A[2, 3] == 1


def test_knn_errors_and_zero():
    X = np.zeros((2, 4))
    with pytest.raises(InvalidInput):
        knn_adjacency(X, 4)
    with pytest.raises(InvalidInput):
        knn_adjacency(X, 0)
    assert np.array_equal(knn_laplacian(X, 0).matrix, np.zeros((4, 4)))


@settings(max_examples=30, deadline=None)
@given(X=arrays(float, (2, 9), elements=st.floats(-5, 5)), k=st.integers(1, 8))
def test_knn_laplacian_psd(X, k):
    L = knn_laplacian(X, k).matrix
    assert np.allclose(L, L.T)
    assert np.max(np.abs(L.sum(axis=1))) < 1e-12
    assert np.linalg.eigvalsh(L).min() > -1e-9


def test_kmeans_blobs(rng):
    X = np.hstack([rng.normal(0, 0.1, (2, 10)), rng.normal(10, 0.1, (2, 10))])
    a = kmeans(X, 2, 0)
    assert len(set(a[:10])) == 1 and len(set(a[10:])) == 1 and a[0] != a[10]


def test_kmeans_k_equals_n_and_duplicates(rng):
    X = rng.normal(size=(2, 6))
    assert sorted(kmeans(X, 6, 1)) == list(range(6))
    dup = np.zeros((2, 5))
    assert sorted(set(kmeans(dup, 3, 1))) == [0, 1, 2]
    with pytest.raises(InvalidInput):
        kmeans(X, 7, 0)


def test_kmeans_deterministic(rng):
    X = rng.normal(size=(3, 30))
    assert np.array_equal(kmeans(X, 4, 11), kmeans(X, 4, 11))


def test_within_cluster_examples():
    L = within_cluster_laplacian(np.array([0, 0, 1]), 3).matrix
    expected = np.array([[0.5, -0.5, 0.0], [-0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
    assert np.allclose(L, expected)
    # single cluster: the centering matrix
    L1 = within_cluster_laplacian(np.zeros(4, int), 4).matrix
    assert np.allclose(L1, np.eye(4) - 0.25)


@settings(max_examples=30, deadline=None)
@given(assign=st.lists(st.integers(0, 3), min_size=2, max_size=12))
def test_cluster_laplacian_algebra(assign):
    a = np.array(assign)
    N = a.size
    Lw = within_cluster_laplacian(a, N).matrix
    Lb = between_cluster_laplacian(a, N).matrix
    assert np.allclose(Lw @ Lw, Lw, atol=1e-12)
    assert np.linalg.eigvalsh(Lb).min() > -1e-12
    # within and between parts add up to the centering matrix
    H = np.eye(N) - 1.0 / N
    oracle_b = sum(
        np.outer(a == c, a == c) / (a == c).sum() for c in np.unique(a)
    ) - np.ones((N, N)) / N
    assert np.allclose(Lb, oracle_b, atol=1e-12)
    assert np.allclose(Lw + oracle_b, H, atol=1e-12)


def test_between_cluster_examples():
    assert np.allclose(between_cluster_laplacian(np.zeros(3, int), 3).matrix, 0.0)
    L = between_cluster_laplacian(np.array([0, 1]), 2).matrix
    assert np.allclose(L, np.array([[0.5, -0.5], [-0.5, 0.5]]))
    with pytest.raises(ShapeMismatch):
        between_cluster_laplacian(np.array([0, 1]), 3)


def test_build_laplacian_clamps(rng):
    X = rng.normal(size=(2, 4))
    assert build_laplacian(GraphKind.KNN, X, 10, 0).k == 3
    assert build_laplacian("within", X, 10, 0).k == 4
    assert build_laplacian("between", X, 0, 0).k == 1
    with pytest.raises(InvalidInput):
        build_laplacian("knn", X, -1, 0)
