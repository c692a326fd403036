"""SVDD in an explicit feature space, solved with pairwise SMO on the dual.

The dual is

    max  sum_i a_i <y_i, y_i> - sum_ij a_i a_j <y_i, y_j>
    s.t. sum_i a_i = 1,  0 <= a_i <= C

and is solved here in its minimization form ``f(a) = a^T K a - diag(K)^T a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleC, InvalidInput, ShapeMismatch

SMO_TOL = 1e-6
MAX_SWEEPS = 10_000
BOUND_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class SvddSolution:
    alpha: np.ndarray
    center: np.ndarray
    radius: float
    C: float
    iterations: int = 0

    @property
    def radius_sq(self) -> float:
        return self.radius**2

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > BOUND_ATOL)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero((self.alpha > BOUND_ATOL) & (self.alpha < self.C - BOUND_ATOL))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "center": self.center.tolist(),
            "radius": self.radius,
            "C": self.C,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> SvddSolution:
        return cls(
            np.asarray(payload["alpha"], dtype=float),
            np.asarray(payload["center"], dtype=float),
            float(payload["radius"]),
            float(payload["C"]),
            int(payload.get("iterations", 0)),
        )


def dual_objective(Y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the (maximized) SVDD dual at ``alpha``."""
    K = Y.T @ Y
    return float(alpha @ np.diag(K) - alpha @ K @ alpha)


def _smo(K: np.ndarray, C: float, tol: float, max_iter: int) -> tuple[np.ndarray, int]:
    n = K.shape[0]
    diag = np.diag(K).copy()
    alpha = np.full(n, 1.0 / n)
    grad = 2.0 * K @ alpha - diag
    it = 0
    while it < max_iter:
        # i gains weight (room below C, smallest gradient), j gives it (positive, largest gradient)
        up = alpha < C
        low = alpha > 0
        if not up.any() or not low.any():
            break
        g_up = np.where(up, grad, np.inf)
        g_low = np.where(low, grad, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_low))
        gap = g_low[j] - g_up[i]
        if gap < tol or i == j:
            break
        curv = 2.0 * (K[i, i] + K[j, j] - 2.0 * K[i, j])
        limit = min(C - alpha[i], alpha[j])
        step = limit if curv <= 0 else min(gap / curv, limit)
        if step <= 0:
            break
        # land exactly on the box when a bound is hit, so index sets stay exact
        if step >= alpha[j]:
            step = alpha[j]
            alpha[i] = min(alpha[i] + step, C)
            alpha[j] = 0.0
        elif step >= C - alpha[i]:
            step = C - alpha[i]
            alpha[i] = C
            alpha[j] -= step
        else:
            alpha[i] += step
            alpha[j] -= step
        grad += 2.0 * step * (K[:, i] - K[:, j])
        it += 1
    return alpha, it


def solve_svdd(Y: np.ndarray, C: float, tol: float = SMO_TOL) -> SvddSolution:
    """Minimal enclosing sphere of the columns of ``Y`` (d, N) with box parameter ``C``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[1]
    if n == 0:
        raise InvalidInput("SVDD needs at least one point")
    if C * n < 1.0 - 1e-12:
        raise InfeasibleC(f"C={C} is below 1/N={1.0 / n}; sum(alpha)=1 cannot be met")
    K = Y.T @ Y
    alpha, iterations = _smo(K, C, tol, MAX_SWEEPS * n)
    center = Y @ alpha
    dist_sq = ((Y - center[:, None]) ** 2).sum(axis=0)
    boundary = (alpha > BOUND_ATOL) & (alpha < C - BOUND_ATOL)
    if boundary.any():
        r2 = float(dist_sq[boundary].mean())
    else:
        r2 = float(dist_sq[alpha > BOUND_ATOL].max())
    return SvddSolution(alpha, center, float(np.sqrt(max(r2, 0.0))), float(C), iterations)


def score(solution: SvddSolution, y: np.ndarray) -> float | np.ndarray:
    """``||y - a||^2 - R^2`` for a vector ``(d,)`` or each column of ``(d, P)``; <= 0 is inside."""
    y = np.asarray(y, dtype=float)
    d = solution.center.size
    if y.shape[0] != d:
        raise ShapeMismatch(f"expected a {d}-dimensional point, got leading dimension {y.shape[0]}")
    if y.ndim == 1:
        diff = y - solution.center
        return float(diff @ diff - solution.radius_sq)
    diff = y - solution.center[:, None]
    return (diff * diff).sum(axis=0) - solution.radius_sq
