"""Training of graph-regularized multimodal subspace SVDD and projection of new data.

One iteration projects every modality into the shared ``d``-dimensional
subspace, solves a single SVDD over the concatenated projections, then moves
every ``Q_m`` along its signed Lagrangian gradient and re-orthonormalizes its
rows with a QR decomposition.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import MultimodalDataset
from .errors import InvalidInput, ShapeMismatch
from .graphs import build_laplacian
from .npt import NptModel, fit_npt, map_test
from .preprocessing import NormalizationStats, PcaModel, apply_pca
from .regularizers import RegularizerSpec, omega_gradient, omega_value
from .svdd import SvddSolution, solve_svdd

SCHEMA_VERSION = 1
STOP_ATOL = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    d: int = 2
    C: float = 0.1
    beta: float = 0.0
    eta: float = 0.1
    sigma: float = 1.0
    k: int = 0
    regularizer: int = 0
    signs: tuple[int, ...] = (-1, -1, -1)
    use_npt: bool = False
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if self.d < 1:
            raise InvalidInput("d must be >= 1")
        if not (0 < self.C <= 1):
            raise InvalidInput(f"C must be in (0, 1], got {self.C}")
        if not self.eta > 0:
            raise InvalidInput("eta must be > 0")
        if self.use_npt and not self.sigma > 0:
            raise InvalidInput("sigma must be > 0 when NPT is enabled")
        if self.max_iter < 0 or self.k < 0:
            raise InvalidInput("max_iter and k must be >= 0")
        if any(s not in (-1, 1) for s in self.signs):
            raise InvalidInput(f"signs must be -1 or +1, got {self.signs}")
        RegularizerSpec(self.regularizer, self.beta, self.k)

    @property
    def regularizer_spec(self) -> RegularizerSpec:
        return RegularizerSpec(self.regularizer, self.beta, self.k)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["signs"] = list(self.signs)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> ModelConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise InvalidInput(f"unknown model config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: ModelConfig
    Q: tuple[np.ndarray, ...]
    solution: SvddSolution
    npt: tuple[NptModel, ...] | None = None
    pca: tuple[PcaModel, ...] | None = None
    normalization: NormalizationStats | None = None
    iterations: int = 0
    final_omega: float = 0.0
    input_dims: tuple[int, ...] = field(default=())

    @property
    def M(self) -> int:
        return len(self.Q)

    def with_preprocessing(self, pca, normalization) -> TrainedModel:
        return replace(
            self,
            pca=tuple(pca) if pca is not None else None,
            normalization=normalization,
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "Q": [q.tolist() for q in self.Q],
            "svdd": self.solution.to_dict(),
            "npt": [n.to_dict() for n in self.npt] if self.npt is not None else None,
            "pca": [p.to_dict() for p in self.pca] if self.pca is not None else None,
            "normalization": self.normalization.to_dict() if self.normalization else None,
            "metadata": {
                "iterations": self.iterations,
                "final_omega": self.final_omega,
                "input_dims": list(self.input_dims),
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> TrainedModel:
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InvalidInput(f"unsupported model schema_version {version!r}")
        meta = payload.get("metadata", {})
        return cls(
            config=ModelConfig.from_dict(payload["config"]),
            Q=tuple(np.atleast_2d(np.asarray(q, dtype=float)) for q in payload["Q"]),
            solution=SvddSolution.from_dict(payload["svdd"]),
            npt=tuple(NptModel.from_dict(n) for n in payload["npt"]) if payload.get("npt") else None,
            pca=tuple(PcaModel.from_dict(p) for p in payload["pca"]) if payload.get("pca") else None,
            normalization=(
                NormalizationStats.from_dict(payload["normalization"])
                if payload.get("normalization")
                else None
            ),
            iterations=int(meta.get("iterations", 0)),
            final_omega=float(meta.get("final_omega", 0.0)),
            input_dims=tuple(meta.get("input_dims", ())),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> TrainedModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def orthonormalize_rows(Q: np.ndarray) -> np.ndarray:
    """Rows of ``Q`` made orthonormal via reduced QR of ``Q^T`` (positive diagonal of R)."""
    q, r = np.linalg.qr(Q.T)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return np.ascontiguousarray((q * signs).T)


def initial_projections(X: Sequence[np.ndarray], d: int) -> list[np.ndarray]:
    """Top-``d`` principal directions of each modality, as rows."""
    out = []
    for Xm in X:
        Xc = Xm - Xm.mean(axis=1, keepdims=True)
        evals, evecs = np.linalg.eigh(Xc @ Xc.T)
        top = evecs[:, np.argsort(evals)[::-1][:d]].T
        pivots = np.argmax(np.abs(top), axis=1)
        signs = np.sign(top[np.arange(d), pivots])
        signs[signs == 0] = 1.0
        out.append(np.ascontiguousarray(top * signs[:, None]))
    return out


def lagrangian_gradient(
    m: int,
    Q: Sequence[np.ndarray],
    X: Sequence[np.ndarray],
    alpha: np.ndarray,
    spec: RegularizerSpec,
    laplacians=None,
    C: float = 1.0,
) -> np.ndarray:
    """Gradient of the SVDD Lagrangian w.r.t. ``Q[m]`` at fixed ``alpha`` (M, N), plus ``beta`` times the regularizer gradient."""
    Xm = X[m]
    a_m = alpha[m]
    center = sum(Qn @ (Xn @ alpha[n]) for n, (Qn, Xn) in enumerate(zip(Q, X)))
    grad = 2.0 * (Q[m] @ (Xm * a_m)) @ Xm.T - 2.0 * np.outer(center, Xm @ a_m)
    if spec.beta and spec.id:
        grad = grad + spec.beta * omega_gradient(spec, m, Q, X, alpha, laplacians, C)
    return grad


def _concat(Q, X) -> np.ndarray:
    return np.hstack([Qm @ Xm for Qm, Xm in zip(Q, X)])


def train(
    dataset: MultimodalDataset,
    config: ModelConfig,
    on_iteration: Callable[[int, list[np.ndarray]], None] | None = None,
) -> TrainedModel:
    """Fit the projections and the shared-subspace SVDD on target-class instances.

    ``on_iteration(i, Q)`` is called after every update with the orthonormalized
    projections.
    """
    if np.any(dataset.labels != 1):
        raise InvalidInput("training data must contain target-class (label 1) instances only")
    M, N = dataset.M, dataset.N
    if len(config.signs) != M:
        raise InvalidInput(f"{len(config.signs)} signs given for {M} modalities")

    X = [np.asarray(Xm, dtype=float) for Xm in dataset.matrices]
    npt_models = None
    if config.use_npt:
        npt_models = tuple(fit_npt(Xm, config.sigma) for Xm in X)
        X = [n.phi_train for n in npt_models]
    dims = [Xm.shape[0] for Xm in X]
    if config.d > min(dims):
        raise InvalidInput(f"d={config.d} exceeds the smallest modality dimension {min(dims)}")

    spec = config.regularizer_spec
    laplacians = None
    if spec.uses_graph:
        laplacians = [build_laplacian(spec.graph_kind, Xm, config.k, config.seed).matrix for Xm in X]

    Q = initial_projections(X, config.d)
    iterations = 0
    for it in range(config.max_iter):
        solution = solve_svdd(_concat(Q, X), config.C)
        alpha = solution.alpha.reshape(M, N)
        grads = [lagrangian_gradient(m, Q, X, alpha, spec, laplacians, config.C) for m in range(M)]
        new_Q = [
            orthonormalize_rows(Qm + s * config.eta * g) for Qm, s, g in zip(Q, config.signs, grads)
        ]
        change = max(float(np.max(np.abs(a - b))) for a, b in zip(new_Q, Q))
        Q = new_Q
        iterations = it + 1
        if on_iteration is not None:
            on_iteration(it, [q.copy() for q in Q])
        if change < STOP_ATOL:
            break

    solution = solve_svdd(_concat(Q, X), config.C)
    omega = omega_value(spec, Q, X, solution.alpha.reshape(M, N), laplacians, config.C)
    return TrainedModel(
        config=config,
        Q=tuple(Q),
        solution=solution,
        npt=npt_models,
        iterations=iterations,
        final_omega=omega if math.isfinite(omega) else float("nan"),
        input_dims=tuple(dataset.D),
    )


def _features(model: TrainedModel, matrices: Sequence[np.ndarray], preprocess: bool) -> list[np.ndarray]:
    if len(matrices) != model.M:
        raise ShapeMismatch(f"expected {model.M} modalities, got {len(matrices)}")
    out = []
    for m, Xm in enumerate(matrices):
        Xm = np.asarray(Xm, dtype=float)
        if preprocess and model.pca is not None:
            Xm = apply_pca(model.pca[m], Xm)
        if preprocess and model.normalization is not None:
            Xm = model.normalization.apply(m, Xm)
        if model.npt is not None:
            Xm = map_test(model.npt[m], Xm)
        if Xm.shape[0] != model.Q[m].shape[1]:
            raise ShapeMismatch(
                f"modality {m}: feature dimension {Xm.shape[0]} does not match Q ({model.Q[m].shape[1]})"
            )
        out.append(Xm)
    return out


def project_batch(
    model: TrainedModel, matrices: Sequence[np.ndarray], preprocess: bool = True
) -> list[np.ndarray]:
    """Project per-modality column batches ``(D_m, P)`` to ``(d, P)`` each."""
    return [Qm @ Xm for Qm, Xm in zip(model.Q, _features(model, matrices, preprocess))]


def project(model: TrainedModel, instance, preprocess: bool = True) -> list[np.ndarray]:
    """Project one instance (a :class:`MultimodalInstance` or a list of M vectors)."""
    vectors = getattr(instance, "vectors", instance)
    cols = [np.asarray(v, dtype=float).reshape(-1, 1) for v in vectors]
    return [y[:, 0] for y in project_batch(model, cols, preprocess)]
