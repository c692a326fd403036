"""Graph Laplacians built from one modality's training matrix."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInput, ShapeMismatch

KMEANS_MAX_ITER = 100


class GraphKind(str, enum.Enum):
    KNN = "knn"
    WITHIN_CLUSTER = "within"
    BETWEEN_CLUSTER = "between"


@dataclass(frozen=True, eq=False)
class GraphLaplacian:
    kind: GraphKind
    matrix: np.ndarray
    k: int


def _pairwise_sq(X: np.ndarray) -> np.ndarray:
    return cdist(X.T, X.T, "sqeuclidean")


def knn_adjacency(X: np.ndarray, k: int) -> np.ndarray:
    """Symmetrized k-NN adjacency; ties go to the lower index."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[1]
    if not 1 <= k <= N - 1:
        raise InvalidInput(f"k-NN needs 1 <= k <= N-1, got k={k}, N={N}")
    dist = _pairwise_sq(X)
    np.fill_diagonal(dist, np.inf)
    neighbors = np.argsort(dist, axis=1, kind="stable")[:, :k]
    A = np.zeros((N, N))
    A[np.repeat(np.arange(N), k), neighbors.ravel()] = 1.0
    return np.maximum(A, A.T)


def knn_laplacian(X: np.ndarray, k: int) -> GraphLaplacian:
    """``D - A`` over the k-NN graph. ``k = 0`` gives the zero Laplacian."""
    N = np.atleast_2d(X).shape[1]
    if k == 0:
        return GraphLaplacian(GraphKind.KNN, np.zeros((N, N)), 0)
    A = knn_adjacency(X, k)
    return GraphLaplacian(GraphKind.KNN, np.diag(A.sum(axis=1)) - A, k)


def kmeans(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding over the columns of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[1]
    if not 1 <= k <= N:
        raise InvalidInput(f"k-means needs 1 <= k <= N, got k={k}, N={N}")
    pts = X.T
    rng = np.random.default_rng(seed)

    chosen = [int(rng.integers(N))]
    closest = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(N, p=closest / total))
        else:
            # every remaining point duplicates a center
            idx = next(i for i in range(N) if i not in chosen)
        chosen.append(idx)
        closest = np.minimum(closest, ((pts - pts[idx]) ** 2).sum(axis=1))
    centers = pts[chosen].copy()

    assign = np.full(N, -1)
    for _ in range(KMEANS_MAX_ITER):
        dist = cdist(pts, centers, "sqeuclidean")
        new = np.argmin(dist, axis=1)
        counts = np.bincount(new, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # reseed with the point worst served by its center, taken from a cluster that can spare it
            own = dist[np.arange(N), new]
            donors = counts[new] > 1
            far = int(np.argmax(np.where(donors, own, -np.inf)))
            counts[new[far]] -= 1
            new[far] = c
            counts[c] = 1
            centers[c] = pts[far]
        if np.array_equal(new, assign):
            break
        assign = new
        for c in range(k):
            centers[c] = pts[assign == c].mean(axis=0)
    return assign


def _indicators(assignment: np.ndarray, N: int) -> list[np.ndarray]:
    assignment = np.asarray(assignment)
    if assignment.shape != (N,):
        raise ShapeMismatch(f"assignment must have length {N}, got {assignment.shape}")
    return [(assignment == c).astype(float) for c in np.unique(assignment)]


def within_cluster_laplacian(assignment: np.ndarray, N: int) -> GraphLaplacian:
    """``I - sum_c 1_c 1_c^T / N_c``."""
    ind = _indicators(assignment, N)
    L = np.eye(N)
    for one_c in ind:
        L -= np.outer(one_c, one_c) / one_c.sum()
    return GraphLaplacian(GraphKind.WITHIN_CLUSTER, L, len(ind))


def between_cluster_laplacian(assignment: np.ndarray, N: int) -> GraphLaplacian:
    """``sum_c N_c (m_c - g)(m_c - g)^T`` with ``m_c = 1_c / N_c`` and ``g = 1 / N``."""
    ind = _indicators(assignment, N)
    g = np.full(N, 1.0 / N)
    L = np.zeros((N, N))
    for one_c in ind:
        n_c = one_c.sum()
        diff = one_c / n_c - g
        L += n_c * np.outer(diff, diff)
    return GraphLaplacian(GraphKind.BETWEEN_CLUSTER, L, len(ind))


def build_laplacian(kind: GraphKind | str, X: np.ndarray, k: int, seed: int) -> GraphLaplacian:
    """Laplacian of the requested kind for the columns of ``X``.

    ``k`` larger than the data allows is clamped (``N - 1`` neighbors, ``N``
    clusters). For the cluster graphs ``k = 0`` is read as a single cluster.
    """
    kind = GraphKind(kind)
    N = np.atleast_2d(X).shape[1]
    if k < 0:
        raise InvalidInput(f"k must be >= 0, got {k}")
    if kind is GraphKind.KNN:
        return knn_laplacian(X, min(k, N - 1))
    assignment = kmeans(X, min(max(k, 1), N), seed)
    if kind is GraphKind.WITHIN_CLUSTER:
        return within_cluster_laplacian(assignment, N)
    return between_cluster_laplacian(assignment, N)
