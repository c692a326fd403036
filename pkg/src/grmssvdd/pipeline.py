"""Experiment plumbing: dataset construction, preprocessing and grid search."""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import EventSeries, MultimodalDataset, assemble_dataset
from .errors import GrmsError, InvalidInput
from .inference import DecisionStrategy, all_strategies, predict
from .metrics import EvaluationReport, reliability_metrics
from .preprocessing import (
    NormalizationStats,
    PcaModel,
    WindowSpec,
    apply_pca_dataset,
    extract_reliability_instances,
    fit_apply_normalization,
    fit_pca,
    inject_noise,
    shuffle,
    window_channel_stds,
)
from .regularizers import GRAPH_IDS
from .trainer import ModelConfig, TrainedModel, train

log = logging.getLogger(__name__)


def reliability_dataset(events: Sequence[EventSeries], spec: WindowSpec, M: int) -> MultimodalDataset:
    instances = [inst for e in events for inst in extract_reliability_instances(e, spec, M)]
    return assemble_dataset(instances)


@dataclass(frozen=True, eq=False)
class Preprocessed:
    train: MultimodalDataset
    test: MultimodalDataset | None
    pca: tuple[PcaModel, ...]
    normalization: NormalizationStats
    channel_stds: tuple[np.ndarray, ...]

    def preprocessing_dict(self) -> dict:
        return {
            "pca": [p.to_dict() for p in self.pca],
            "normalization": self.normalization.to_dict(),
            "channel_stds": [s.tolist() for s in self.channel_stds],
        }


def preprocess(
    train_events: Sequence[EventSeries],
    test_events: Sequence[EventSeries],
    spec: WindowSpec,
    noise_factor: float,
    n_components: int,
    seed: int,
) -> Preprocessed:
    """Window, add noise, reduce with PCA, shuffle and normalize.

    ``n_components`` is capped at ``min(D_m, N_train)``. Channel stds for the
    noise come from the windows of both sub-datasets.
    """
    M = max(e.n_modalities for e in [*train_events, *test_events])
    train = reliability_dataset(train_events, spec, M)
    test = reliability_dataset(test_events, spec, M) if test_events else None

    everything = assemble_dataset(list(train.instances) + (list(test.instances) if test else []))
    stds = window_channel_stds(everything, spec.w)
    train = inject_noise(train, noise_factor, stds, seed + 1)
    if test is not None:
        test = inject_noise(test, noise_factor, stds, seed + 2)

    n_comp = min(n_components, min(train.D), train.N)
    pca = fit_pca(train, n_comp)
    train = shuffle(apply_pca_dataset(pca, train), seed + 3)
    if test is not None:
        test = shuffle(apply_pca_dataset(pca, test), seed + 4)
    train, test, stats = fit_apply_normalization(train, test)
    return Preprocessed(train, test, tuple(pca), stats, tuple(stds))


def holdout_split(
    dataset: MultimodalDataset, fraction: float, seed: int
) -> tuple[MultimodalDataset, MultimodalDataset]:
    """Split off ``fraction`` of the source events as a validation set."""
    events = sorted({inst.source_event for inst in dataset.instances})
    if len(events) < 2:
        raise InvalidInput("holdout needs instances from at least two events")
    order = np.random.default_rng(seed).permutation(len(events))
    n_val = min(max(1, int(round(fraction * len(events)))), len(events) - 1)
    val_events = {events[i] for i in order[:n_val]}
    fit_idx = [i for i, inst in enumerate(dataset.instances) if inst.source_event not in val_events]
    val_idx = [i for i, inst in enumerate(dataset.instances) if inst.source_event in val_events]
    return dataset.subset(fit_idx), dataset.subset(val_idx)


def evaluate_model(
    model: TrainedModel, dataset: MultimodalDataset, strategies: Sequence[DecisionStrategy]
) -> dict[str, EvaluationReport]:
    return {s.name: reliability_metrics(predict(model, dataset, s), dataset.labels) for s in strategies}


# ---------------------------------------------------------------------------
# grid search

DEFAULT_GRID = {
    "beta": [10.0**p for p in range(-4, 5)],
    "C": [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
    "sigma": [10.0**p for p in range(-3, 4)],
    "d": [1, 2, 3, 4, 5, 10, 20, 50, 100],
    "eta": [0.1],
    "k": list(range(11)),
    "regularizer": list(range(10)),
    "use_npt": [False, True],
}


@dataclass(frozen=True)
class GridSpec:
    beta: tuple[float, ...] = tuple(DEFAULT_GRID["beta"])
    C: tuple[float, ...] = tuple(DEFAULT_GRID["C"])
    sigma: tuple[float, ...] = tuple(DEFAULT_GRID["sigma"])
    d: tuple[int, ...] = tuple(DEFAULT_GRID["d"])
    eta: tuple[float, ...] = tuple(DEFAULT_GRID["eta"])
    k: tuple[int, ...] = tuple(DEFAULT_GRID["k"])
    regularizer: tuple[int, ...] = tuple(DEFAULT_GRID["regularizer"])
    signs: tuple[tuple[int, ...], ...] = ()  # empty: every combination for M modalities
    use_npt: tuple[bool, ...] = (False, True)
    max_iter: int = 100

    @classmethod
    def from_dict(cls, payload: dict) -> GridSpec:
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown grid keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in payload.items():
            if key == "max_iter":
                kwargs[key] = int(value)
            elif key == "signs":
                kwargs[key] = tuple(tuple(int(s) for s in combo) for combo in value)
            else:
                kwargs[key] = tuple(value)
            if key not in ("max_iter", "signs") and not kwargs[key]:
                raise InvalidInput(f"grid axis {key!r} is empty")
        return cls(**kwargs)

    def expand(self, seed: int, M: int = 3) -> list[ModelConfig]:
        """Every distinct configuration, in a fixed order.

        Axes without effect are collapsed to their first value: ``sigma``
        without NPT, ``k`` for non-graph regularizers, ``beta`` for id 0.
        """
        sign_grid = self.signs or tuple(itertools.product((-1, 1), repeat=M))
        if any(len(s) != M for s in sign_grid):
            raise InvalidInput(f"every sign combination needs {M} entries")
        seen, out = set(), []
        for npt, reg, signs, d, C, beta, sigma, k, eta in itertools.product(
            self.use_npt, self.regularizer, sign_grid, self.d, self.C,
            self.beta, self.sigma, self.k, self.eta,
        ):
            sigma = sigma if npt else self.sigma[0]
            k = k if reg in GRAPH_IDS else self.k[0]
            beta = beta if reg != 0 else self.beta[0]
            key = (npt, reg, tuple(signs), d, C, beta, sigma, k, eta)
            if key in seen:
                continue
            seen.add(key)
            out.append(
                ModelConfig(
                    d=d, C=C, beta=beta, eta=eta, sigma=sigma, k=k, regularizer=reg,
                    signs=tuple(signs), use_npt=npt, max_iter=self.max_iter, seed=seed,
                )
            )
        return out


@dataclass(frozen=True)
class GridRow:
    index: int
    config: ModelConfig
    strategy: str
    report: EvaluationReport | None
    error: str | None = None

    @property
    def gm(self) -> float:
        return self.report.gm if self.report is not None else -1.0

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "config": self.config.to_dict(),
            "strategy": self.strategy,
            "report": self.report.to_dict() if self.report else None,
            "error": self.error,
        }


def _run_one(args) -> list[GridRow]:
    index, config, fit, val, strategy_names = args
    strategies = [DecisionStrategy.parse(s) for s in strategy_names]
    try:
        model = train(fit.targets(), config)
        reports = evaluate_model(model, val, strategies)
    except (GrmsError, np.linalg.LinAlgError) as exc:
        return [GridRow(index, config, s.name, None, f"{type(exc).__name__}: {exc}") for s in strategies]
    return [GridRow(index, config, s.name, reports[s.name]) for s in strategies]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GRMSSVDD_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class GridResult:
    rows: tuple[GridRow, ...]  # ranked
    best: GridRow
    n_configs: int
    errors: tuple[GridRow, ...] = field(default=())


def grid_search(
    train_set: MultimodalDataset,
    configs: Sequence[ModelConfig],
    strategies: Sequence[DecisionStrategy] | None = None,
    holdout_fraction: float = 1.0 / 3.0,
    seed: int = 0,
    workers: int | None = None,
) -> GridResult:
    """Rank every (configuration, strategy) pair by gm on a held-out part of ``train_set``."""
    if not configs:
        raise InvalidInput("empty grid")
    strategies = list(strategies or all_strategies(train_set.M))
    fit, val = holdout_split(train_set, holdout_fraction, seed)
    names = [s.name for s in strategies]
    jobs = [(i, c, fit, val, names) for i, c in enumerate(configs)]
    workers = workers or worker_count()
    log.info("grid search: %d configurations x %d strategies, %d workers", len(jobs), len(names), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        batches = [_run_one(job) for job in jobs]
    rows = [row for batch in batches for row in batch]
    ok = [r for r in rows if r.report is not None]
    failed = tuple(r for r in rows if r.report is None)
    if not ok:
        raise InvalidInput(f"every grid configuration failed; first error: {failed[0].error}")
    ranked = sorted(ok, key=lambda r: -r.gm)  # stable: ties keep grid order
    return GridResult(tuple(ranked), ranked[0], len(configs), failed)


def format_grid(rows: Sequence[GridRow], limit: int | None = None) -> str:
    header = f"{'rank':>4}  {'gm':>5}  {'strat':<5}  {'reg':>3}  {'signs':<8}  {'d':>3}  {'C':>5}  {'beta':>8}  {'sigma':>8}  {'k':>2}  npt"
    lines = [header]
    for rank, row in enumerate(rows[:limit] if limit else rows, start=1):
        c = row.config
        signs = "/".join("+" if s > 0 else "-" for s in c.signs)
        lines.append(
            f"{rank:>4}  {row.gm:5.3f}  {row.strategy:<5}  {c.regularizer:>3}  {signs:<8}  {c.d:>3}  "
            f"{c.C:>5g}  {c.beta:>8g}  {c.sigma:>8g}  {c.k:>2}  {'yes' if c.use_npt else 'no'}"
        )
    return "\n".join(lines) + "\n"
