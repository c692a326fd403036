"""Non-linear projection trick with an RBF kernel.

The centered training kernel ``K_hat = U A U^T`` is factorized explicitly as
``Phi^T Phi`` with ``Phi = A^(1/2) U^T`` restricted to the eigenvalues above
a relative threshold, so downstream code works on finite vectors instead of
kernel evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateKernel, InvalidInput, ShapeMismatch

EIGEN_RTOL = 1e-10
PINV_RCOND = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian kernel between the columns of ``A`` (D, n) and ``B`` (D, p)."""
    if not sigma > 0:
        raise InvalidInput(f"sigma must be > 0, got {sigma}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != B.shape[0]:
        raise ShapeMismatch(f"row dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    sq = cdist(A.T, B.T, "sqeuclidean") if A.shape[1] and B.shape[1] else np.zeros((A.shape[1], B.shape[1]))
    return np.exp(-sq / (2.0 * sigma**2))


def center_kernel(K: np.ndarray) -> np.ndarray:
    """``(I - J/N) K (I - J/N)``."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ShapeMismatch(f"kernel must be square, got {K.shape}")
    N = K.shape[0]
    H = np.eye(N) - np.full((N, N), 1.0 / N)
    Kc = H @ K @ H
    return 0.5 * (Kc + Kc.T)


@dataclass(frozen=True, eq=False)
class NptModel:
    sigma: float
    train_inputs: np.ndarray  # (D, N)
    centered_kernel: np.ndarray  # (N, N)
    eigenvectors: np.ndarray  # (N, r)
    eigenvalues: np.ndarray  # (r,)
    phi_train: np.ndarray  # (r, N)
    phi_pinv: np.ndarray  # (r, N), pseudo-inverse of phi_train.T

    @cached_property
    def train_kernel_means(self) -> np.ndarray:
        return rbf_kernel(self.train_inputs, self.train_inputs, self.sigma).mean(axis=1)

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def n_train(self) -> int:
        return self.train_inputs.shape[1]

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "train_inputs": self.train_inputs.tolist(),
            "centered_kernel": self.centered_kernel.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "phi_train": self.phi_train.tolist(),
            "phi_pinv": self.phi_pinv.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> NptModel:
        def mat(key):
            return np.atleast_2d(np.asarray(payload[key], dtype=float))

        return cls(
            float(payload["sigma"]),
            mat("train_inputs"),
            mat("centered_kernel"),
            mat("eigenvectors"),
            np.asarray(payload["eigenvalues"], dtype=float),
            mat("phi_train"),
            mat("phi_pinv"),
        )


def fit_npt(X: np.ndarray, sigma: float) -> NptModel:
    """Embed the columns of ``X`` (D, N) so that ``phi.T @ phi`` equals the centered kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[1]
    if N < 2:
        raise InvalidInput("NPT needs at least two training instances")
    Kc = center_kernel(rbf_kernel(X, X, sigma))
    evals, evecs = np.linalg.eigh(Kc)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    if evals[0] <= 0:
        raise DegenerateKernel("centered kernel has no positive eigenvalue")
    keep = evals > EIGEN_RTOL * evals[0]
    evals, evecs = evals[keep], evecs[:, keep]
    # eigenvector sign convention: largest-magnitude entry positive
    pivots = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivots, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    evecs = evecs * signs

    evecs = np.ascontiguousarray(evecs)
    phi = np.ascontiguousarray(np.sqrt(evals)[:, None] * evecs.T)
    phi_pinv = np.ascontiguousarray(np.linalg.pinv(phi.T, rcond=PINV_RCOND))
    return NptModel(float(sigma), X.copy(), Kc, evecs, evals, phi, phi_pinv)


def map_test(model: NptModel, X_star: np.ndarray) -> np.ndarray:
    """Embed test columns ``X_star`` (D, P) into the training NPT space, shape (r, P)."""
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star[:, None]
    if X_star.shape[0] != model.train_inputs.shape[0]:
        raise ShapeMismatch(
            f"test dimension {X_star.shape[0]} != training dimension {model.train_inputs.shape[0]}"
        )
    if X_star.shape[1] == 0:
        return np.zeros((model.rank, 0))
    X = model.train_inputs
    K_star = rbf_kernel(X, X_star, model.sigma)
    centered = K_star - model.train_kernel_means[:, None]
    centered = centered - centered.mean(axis=0, keepdims=True)
    return model.phi_pinv @ centered
