"""The ten subspace regularizers and their gradients with respect to ``Q_m``.

Ids 0-3 use per-modality nu vectors, ids 4-6 cross every modality pair and
ids 7-9 use a graph Laplacian per modality (k-NN, within-cluster,
between-cluster).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput, ShapeMismatch, WrongPath
from .graphs import GraphKind

OUTLIER_ATOL = 1e-12

NU_IDS = (0, 1, 2, 3)
CROSSED_IDS = (4, 5, 6)
GRAPH_IDS = (7, 8, 9)

GRAPH_OF_ID = {7: GraphKind.KNN, 8: GraphKind.WITHIN_CLUSTER, 9: GraphKind.BETWEEN_CLUSTER}


@dataclass(frozen=True)
class RegularizerSpec:
    id: int
    beta: float = 0.0
    k: int = 0

    def __post_init__(self):
        if self.id not in range(10):
            raise InvalidInput(f"regularizer id must be in 0..9, got {self.id}")
        if self.beta < 0:
            raise InvalidInput("beta must be >= 0")

    @property
    def graph_kind(self) -> GraphKind | None:
        return GRAPH_OF_ID.get(self.id)

    @property
    def uses_graph(self) -> bool:
        return self.id in GRAPH_IDS


def build_nu(reg_id: int, alpha_m: np.ndarray, C: float) -> np.ndarray:
    """Weight vector of one modality for the nu-based regularizers (ids 0-6)."""
    alpha_m = np.asarray(alpha_m, dtype=float)
    if reg_id in GRAPH_IDS:
        raise WrongPath(f"regularizer {reg_id} is graph based and has no nu vector")
    if reg_id not in range(10):
        raise InvalidInput(f"regularizer id must be in 0..9, got {reg_id}")
    kind = reg_id - 3 if reg_id in CROSSED_IDS else reg_id
    if kind == 0:
        return np.zeros_like(alpha_m)
    if kind == 1:
        return np.ones_like(alpha_m)
    if kind == 2:
        return alpha_m.copy()
    # alpha at the upper bound marks an outlier
    return np.where(alpha_m >= C - OUTLIER_ATOL, 0.0, alpha_m)


def _check(Q: Sequence[np.ndarray], X: Sequence[np.ndarray], alpha: np.ndarray) -> None:
    if len(Q) != len(X):
        raise ShapeMismatch(f"{len(Q)} projections for {len(X)} modalities")
    alpha = np.atleast_2d(alpha)
    if alpha.shape[0] != len(X):
        raise ShapeMismatch("alpha must have one row per modality")
    for m, (Qm, Xm) in enumerate(zip(Q, X)):
        if Qm.shape[1] != Xm.shape[0]:
            raise ShapeMismatch(f"modality {m}: Q is {Qm.shape}, X is {Xm.shape}")
        if Qm.shape[0] != Q[0].shape[0]:
            raise ShapeMismatch("all projections must share the subspace dimension")
        if Xm.shape[1] != alpha.shape[1]:
            raise ShapeMismatch(f"modality {m}: {Xm.shape[1]} instances, alpha has {alpha.shape[1]}")


def _laplacian(laplacians, m: int, N: int) -> np.ndarray:
    if laplacians is None:
        raise InvalidInput("graph regularizers need one Laplacian per modality")
    L = laplacians[m]
    L = getattr(L, "matrix", L)
    if L.shape != (N, N):
        raise ShapeMismatch(f"modality {m}: Laplacian is {L.shape}, expected {(N, N)}")
    return L


def omega_value(
    spec: RegularizerSpec,
    Q: Sequence[np.ndarray],
    X: Sequence[np.ndarray],
    alpha: np.ndarray,
    laplacians=None,
    C: float = 1.0,
) -> float:
    _check(Q, X, alpha)
    alpha = np.atleast_2d(alpha)
    rid = spec.id
    if rid == 0:
        return 0.0
    if rid in GRAPH_IDS:
        total = 0.0
        for m, (Qm, Xm) in enumerate(zip(Q, X)):
            P = Qm @ Xm
            total += float(np.sum((P @ _laplacian(laplacians, m, Xm.shape[1])) * P))
        return total
    proj = [Qm @ (Xm @ build_nu(rid, alpha[m], C)) for m, (Qm, Xm) in enumerate(zip(Q, X))]
    if rid in NU_IDS:
        return float(sum(v @ v for v in proj))
    s = np.sum(proj, axis=0)
    return float(s @ s)


def omega_gradient(
    spec: RegularizerSpec,
    m: int,
    Q: Sequence[np.ndarray],
    X: Sequence[np.ndarray],
    alpha: np.ndarray,
    laplacians=None,
    C: float = 1.0,
) -> np.ndarray:
    """Gradient of :func:`omega_value` with respect to ``Q[m]``, shape ``(d, D_m)``."""
    _check(Q, X, alpha)
    alpha = np.atleast_2d(alpha)
    rid = spec.id
    Qm, Xm = Q[m], X[m]
    if rid == 0:
        return np.zeros_like(Qm, dtype=float)
    if rid in GRAPH_IDS:
        L = _laplacian(laplacians, m, Xm.shape[1])
        # L is symmetric, so d tr(Q X L X^T Q^T) / dQ = 2 Q X L X^T
        return 2.0 * (Qm @ Xm) @ L @ Xm.T
    xnu_m = Xm @ build_nu(rid, alpha[m], C)
    if rid in NU_IDS:
        return 2.0 * np.outer(Qm @ xnu_m, xnu_m)
    s = sum(Qn @ (Xn @ build_nu(rid, alpha[n], C)) for n, (Qn, Xn) in enumerate(zip(Q, X)))
    return 2.0 * np.outer(s, xnu_m)
