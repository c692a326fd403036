"""Per-modality sphere membership and Boolean decision fusion."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import MultimodalDataset
from .errors import InvalidInput, ShapeMismatch
from .svdd import score
from .trainer import TrainedModel, project_batch


@dataclass(frozen=True)
class DecisionStrategy:
    """``and``, ``or`` or ``uni`` (single modality ``m``)."""

    kind: str
    m: int | None = None

    def __post_init__(self):
        if self.kind not in ("and", "or", "uni"):
            raise InvalidInput(f"unknown strategy kind {self.kind!r}")
        if self.kind == "uni" and (self.m is None or self.m < 0):
            raise InvalidInput("unimodal strategy needs a modality index")

    @classmethod
    def parse(cls, name: str) -> DecisionStrategy:
        name = name.strip().lower()
        if name in ("and", "or"):
            return cls(name)
        if name.startswith("uni") and name[3:].isdigit():
            return cls("uni", int(name[3:]))
        raise InvalidInput(f"cannot parse strategy {name!r}; use and, or, uni<m>")

    @property
    def name(self) -> str:
        return self.kind if self.kind != "uni" else f"uni{self.m}"

    def __str__(self) -> str:
        return self.name


def all_strategies(M: int) -> list[DecisionStrategy]:
    return [DecisionStrategy("and"), DecisionStrategy("or")] + [
        DecisionStrategy("uni", m) for m in range(M)
    ]


def fuse(p, strategy: DecisionStrategy) -> bool | np.ndarray:
    """Fuse per-modality verdicts; ``p`` is ``(M,)`` or ``(M, P)``."""
    p = np.asarray(p, dtype=bool)
    if strategy.kind == "and":
        out = p.all(axis=0)
    elif strategy.kind == "or":
        out = p.any(axis=0)
    else:
        if strategy.m >= p.shape[0]:
            raise InvalidInput(f"modality {strategy.m} out of range for M={p.shape[0]}")
        out = p[strategy.m]
    return bool(out) if out.ndim == 0 else out


def classify_batch(model: TrainedModel, matrices, preprocess: bool = True) -> np.ndarray:
    """Membership matrix ``(M, P)``: True where the projection lies inside or on the sphere."""
    Y = project_batch(model, matrices, preprocess)
    return np.vstack([np.atleast_1d(score(model.solution, Ym)) <= 0.0 for Ym in Y])


def classify_modalities(model: TrainedModel, instance, preprocess: bool = True) -> np.ndarray:
    vectors = getattr(instance, "vectors", instance)
    if len(vectors) != model.M:
        raise ShapeMismatch(f"expected {model.M} modality vectors, got {len(vectors)}")
    cols = [np.asarray(v, dtype=float).reshape(-1, 1) for v in vectors]
    return classify_batch(model, cols, preprocess)[:, 0]


def predict(
    model: TrainedModel,
    dataset: MultimodalDataset,
    strategy: DecisionStrategy,
    preprocess: bool = False,
) -> np.ndarray:
    """Fused predictions for every instance of an (already preprocessed by default) dataset."""
    return fuse(classify_batch(model, dataset.matrices, preprocess), strategy)


def write_predictions(
    path: str | Path, memberships: np.ndarray, fused: np.ndarray, labels: np.ndarray
) -> None:
    M = memberships.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance_id"] + [f"p_{m}" for m in range(M)] + ["fused", "label"])
        for i in range(memberships.shape[1]):
            writer.writerow([i] + [int(v) for v in memberships[:, i]] + [int(fused[i]), int(labels[i])])
