"""Turn annotated event series into OCC instances.

The pipeline order is fixed: window -> noise -> PCA -> shuffle -> normalize.
Window vectors are laid out channel-major: for a modality with channels
``c_0, c_1, ...`` the vector is ``[c_0(T-w+1..T), c_1(T-w+1..T), ...]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import EventSeries, MultimodalDataset, MultimodalInstance
from .errors import DegenerateData, InvalidInput, ShapeMismatch


@dataclass(frozen=True)
class WindowSpec:
    w: int = 10

    def __post_init__(self):
        if int(self.w) < 1:
            raise InvalidInput(f"window length must be >= 1, got {self.w}")


def _window_instance(event: EventSeries, end: int, w: int, M: int) -> MultimodalInstance:
    start = end - w + 1
    vectors = tuple(event.channels[event.channels_of(m), start : end + 1].ravel() for m in range(M))
    t = float(event.timestamps[end])
    return MultimodalInstance(vectors, event.label_at(t), event.id, t)


def _check_window(event: EventSeries, spec: WindowSpec) -> None:
    if spec.w > event.n_timesteps:
        raise InvalidInput(
            f"event {event.id}: window {spec.w} longer than series ({event.n_timesteps} steps)"
        )


def extract_reliability_instances(
    event: EventSeries, spec: WindowSpec, n_modalities: int | None = None
) -> list[MultimodalInstance]:
    """Up to three windows: one inside the event, one before it, one after it.

    The positive window ends at the middle timestep of ``[tau1, tau2]`` (pushed
    right if fewer than ``w`` steps precede it), the pre-event window ends at the
    last timestep before ``tau1`` and the post-event window at the final timestep.
    """
    _check_window(event, spec)
    w = spec.w
    M = n_modalities or event.n_modalities
    ts = event.timestamps
    inside = np.flatnonzero((ts >= event.tau1) & (ts <= event.tau2))
    before = np.flatnonzero(ts < event.tau1)

    out = []
    if inside.size:
        lo, hi = int(inside[0]), int(inside[-1])
        end = max((lo + hi) // 2, w - 1)
        if end <= hi:
            out.append(_window_instance(event, end, w, M))
    if before.size >= w:
        out.append(_window_instance(event, int(before[-1]), w, M))
    if ts[-1] > event.tau2:
        out.append(_window_instance(event, event.n_timesteps - 1, w, M))
    return out


def extract_rolling_instances(
    event: EventSeries, spec: WindowSpec, n_modalities: int | None = None
) -> list[MultimodalInstance]:
    """Every step-1 window in chronological order."""
    _check_window(event, spec)
    M = n_modalities or event.n_modalities
    return [_window_instance(event, end, spec.w, M) for end in range(spec.w - 1, event.n_timesteps)]


def window_channel_stds(dataset: MultimodalDataset, w: int) -> list[np.ndarray]:
    """Standard deviation of every raw channel over all windows of ``dataset``."""
    stds = []
    for m, X in enumerate(dataset.matrices):
        if X.shape[0] % w:
            raise ShapeMismatch(f"modality {m}: dimension {X.shape[0]} is not a multiple of w={w}")
        per_channel = X.reshape(X.shape[0] // w, w, X.shape[1])
        stds.append(per_channel.std(axis=(1, 2)))
    return stds


def inject_noise(
    dataset: MultimodalDataset,
    noise_factor: float,
    per_channel_std: Sequence[np.ndarray],
    seed: int,
) -> MultimodalDataset:
    """Add zero-mean Gaussian noise of std ``noise_factor * channel std`` to every feature.

    ``per_channel_std`` holds one array per modality with one entry per raw channel;
    the window length is recovered as ``D_m / n_channels_m``.
    """
    if noise_factor < 0:
        raise InvalidInput(f"noise_factor must be >= 0, got {noise_factor}")
    if len(per_channel_std) != dataset.M:
        raise ShapeMismatch("need one std vector per modality")
    if noise_factor == 0:
        return dataset

    rng = np.random.default_rng(seed)
    noisy = []
    for m, X in enumerate(dataset.matrices):
        std = np.asarray(per_channel_std[m], dtype=float)
        if np.any(std < 0):
            raise InvalidInput("channel stds must be nonnegative")
        if std.size == 0 or X.shape[0] % std.size:
            raise ShapeMismatch(f"modality {m}: {std.size} channels do not tile {X.shape[0]} features")
        scale = np.repeat(noise_factor * std, X.shape[0] // std.size)
        noisy.append(X + scale[:, None] * rng.standard_normal(X.shape))
    return dataset.with_matrices(noisy)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Per-modality PCA: ``reduced = components @ (x - mean)``."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> PcaModel:
        return cls(
            np.asarray(payload["mean"], dtype=float),
            np.atleast_2d(np.asarray(payload["components"], dtype=float)),
            np.asarray(payload["explained_variance"], dtype=float),
            np.asarray(payload["explained_variance_ratio"], dtype=float),
        )


def _fit_pca_matrix(X: np.ndarray, n_components: int) -> PcaModel:
    D, N = X.shape
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    cov = Xc @ Xc.T / max(N - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order[:n_components]].T
    # deterministic orientation: largest-magnitude entry positive
    pivots = np.argmax(np.abs(evecs), axis=1)
    signs = np.sign(evecs[np.arange(n_components), pivots])
    signs[signs == 0] = 1.0
    evecs = evecs * signs[:, None]
    total = evals.sum()
    ratio = evals[:n_components] / total if total > 0 else np.zeros(n_components)
    return PcaModel(mean, np.ascontiguousarray(evecs), evals[:n_components], ratio)


def fit_pca(train: MultimodalDataset, n_components: int) -> list[PcaModel]:
    """Top ``n_components`` covariance eigenvectors per modality, fitted on ``train`` only."""
    if n_components < 1:
        raise InvalidInput("n_components must be >= 1")
    for m, d in enumerate(train.D):
        if n_components > min(d, train.N):
            raise InvalidInput(
                f"modality {m}: n_components={n_components} exceeds min(D={d}, N={train.N})"
            )
    return [_fit_pca_matrix(X, n_components) for X in train.matrices]


def apply_pca(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project a vector ``(D,)`` or a column batch ``(D, P)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != model.mean.size:
        raise ShapeMismatch(f"expected leading dimension {model.mean.size}, got {x.shape[0]}")
    if x.ndim == 1:
        return model.components @ (x - model.mean)
    return model.components @ (x - model.mean[:, None])


def apply_pca_dataset(models: Sequence[PcaModel], dataset: MultimodalDataset) -> MultimodalDataset:
    if len(models) != dataset.M:
        raise ShapeMismatch("need one PCA model per modality")
    return dataset.with_matrices([apply_pca(p, X) for p, X in zip(models, dataset.matrices)])


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationStats:
    """Scalar mean and std of each modality's whole training matrix."""

    means: tuple[float, ...]
    stds: tuple[float, ...]

    def apply(self, m: int, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.means[m]) / self.stds[m]

    def to_dict(self) -> dict:
        return {"means": list(self.means), "stds": list(self.stds)}

    @classmethod
    def from_dict(cls, payload: dict) -> NormalizationStats:
        return cls(tuple(map(float, payload["means"])), tuple(map(float, payload["stds"])))


def fit_normalization(train: MultimodalDataset) -> NormalizationStats:
    means, stds = [], []
    for m, X in enumerate(train.matrices):
        mu, sd = float(X.mean()), float(X.std())
        if not sd > 0:
            raise DegenerateData(f"modality {m}: training data has zero standard deviation")
        means.append(mu)
        stds.append(sd)
    return NormalizationStats(tuple(means), tuple(stds))


def normalize(dataset: MultimodalDataset, stats: NormalizationStats) -> MultimodalDataset:
    return dataset.with_matrices([stats.apply(m, X) for m, X in enumerate(dataset.matrices)])


def fit_apply_normalization(
    train: MultimodalDataset, test: MultimodalDataset | None
) -> tuple[MultimodalDataset, MultimodalDataset | None, NormalizationStats]:
    stats = fit_normalization(train)
    return normalize(train, stats), (normalize(test, stats) if test is not None else None), stats


def shuffle(dataset: MultimodalDataset, seed: int) -> MultimodalDataset:
    order = np.random.default_rng(seed).permutation(dataset.N)
    return dataset.subset(order.tolist())
