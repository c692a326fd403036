"""Multimodal data containers, event file IO and train/test splitting.

Matrices follow the column convention used throughout the package: the
modality-``m`` data matrix ``X_m`` has shape ``(D_m, N)``, one instance per
column.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInput, ShapeMismatch

_JITTER = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EventSeries:
    """One annotated multichannel time series containing a single event.

    Parameters
    ----------
    id : str
        Event identifier.
    timestamps : array of shape (n_timesteps,)
        Uniformly spaced times in seconds.
    channels : array of shape (n_channels, n_timesteps)
        Raw measurements.
    modality_of_channel : sequence of int
        Modality index of every channel.
    tau1, tau2 : float
        Event start and end times in seconds (end included).
    event_class : str, optional
        Opaque event label.
    """

    id: str
    timestamps: np.ndarray
    channels: np.ndarray
    modality_of_channel: tuple[int, ...]
    tau1: float
    tau2: float
    event_class: str | None = None

    def __post_init__(self):
        ts = _frozen(self.timestamps)
        ch = _frozen(np.atleast_2d(self.channels))
        moc = tuple(int(m) for m in self.modality_of_channel)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "modality_of_channel", moc)
        object.__setattr__(self, "tau1", float(self.tau1))
        object.__setattr__(self, "tau2", float(self.tau2))

        if ts.ndim != 1 or ts.size < 1:
            raise InvalidInput(f"event {self.id}: timestamps must be a non-empty vector")
        if ch.shape[1] != ts.size:
            raise ShapeMismatch(
                f"event {self.id}: channels have {ch.shape[1]} timesteps, timestamps {ts.size}"
            )
        if len(moc) != ch.shape[0]:
            raise ShapeMismatch(f"event {self.id}: modality_of_channel must name every channel")
        if any(m < 0 for m in moc):
            raise InvalidInput(f"event {self.id}: negative modality index")
        if ts.size > 1:
            steps = np.diff(ts)
            dt = steps[0]
            if dt <= 0 or np.max(np.abs(steps - dt)) > _JITTER * max(abs(dt), 1.0):
                raise InvalidInput(f"event {self.id}: timestamps must be uniform and increasing")
        if not (0.0 <= self.tau1 <= self.tau2 <= ts[-1]):
            raise InvalidInput(f"event {self.id}: need 0 <= tau1 <= tau2 <= last timestamp")

    @property
    def n_timesteps(self) -> int:
        return self.timestamps.size

    @property
    def n_modalities(self) -> int:
        return max(self.modality_of_channel) + 1

    @property
    def dt(self) -> float:
        if self.n_timesteps < 2:
            return 0.0
        return float(self.timestamps[1] - self.timestamps[0])

    def channels_of(self, m: int) -> list[int]:
        return [c for c, mod in enumerate(self.modality_of_channel) if mod == m]

    def label_at(self, t: float) -> int:
        return int(self.tau1 <= t <= self.tau2)


@dataclass(frozen=True, eq=False)
class MultimodalInstance:
    """A single instance seen through ``M`` modalities."""

    vectors: tuple[np.ndarray, ...]
    label: int
    source_event: str = ""
    end_time: float = 0.0

    def __post_init__(self):
        vecs = tuple(_frozen(np.ravel(v)) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        if not vecs:
            raise InvalidInput("an instance needs at least one modality")
        if self.label not in (0, 1):
            raise InvalidInput(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "end_time", float(self.end_time))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.size for v in self.vectors)


@dataclass(frozen=True, eq=False)
class MultimodalDataset:
    """``N`` instances sharing ``M`` modalities of dimensionalities ``D``."""

    M: int
    D: tuple[int, ...]
    instances: tuple[MultimodalInstance, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "D", tuple(int(d) for d in self.D))
        if not self.instances:
            raise InvalidInput("a dataset needs at least one instance")
        if self.M < 1 or len(self.D) != self.M or min(self.D) < 1:
            raise InvalidInput(f"bad dataset shape M={self.M}, D={self.D}")
        for inst in self.instances:
            if inst.dims != self.D:
                raise ShapeMismatch(f"instance dims {inst.dims} differ from dataset dims {self.D}")

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def N(self) -> int:
        return len(self.instances)

    @cached_property
    def matrices(self) -> tuple[np.ndarray, ...]:
        """Per-modality data matrices, each ``(D_m, N)``."""
        out = []
        for m in range(self.M):
            X = np.column_stack([inst.vectors[m] for inst in self.instances])
            X.setflags(write=False)
            out.append(X)
        return tuple(out)

    @cached_property
    def labels(self) -> np.ndarray:
        return _frozen([inst.label for inst in self.instances], dtype=int)

    def subset(self, indices: Sequence[int]) -> MultimodalDataset:
        return MultimodalDataset(self.M, self.D, tuple(self.instances[i] for i in indices))

    def targets(self) -> MultimodalDataset:
        """Only the target-class (label 1) instances."""
        idx = [i for i, inst in enumerate(self.instances) if inst.label == 1]
        if not idx:
            raise InvalidInput("dataset contains no target-class instances")
        return self.subset(idx)

    def with_matrices(self, matrices: Sequence[np.ndarray]) -> MultimodalDataset:
        """Same instances (labels, provenance) carrying new per-modality data."""
        if len(matrices) != self.M:
            raise ShapeMismatch(f"expected {self.M} matrices, got {len(matrices)}")
        for X in matrices:
            if X.ndim != 2 or X.shape[1] != self.N:
                raise ShapeMismatch("every matrix needs one column per instance")
        new = [
            MultimodalInstance(
                tuple(X[:, i] for X in matrices), inst.label, inst.source_event, inst.end_time
            )
            for i, inst in enumerate(self.instances)
        ]
        return MultimodalDataset(self.M, tuple(X.shape[0] for X in matrices), tuple(new))


def assemble_dataset(instances: Sequence[MultimodalInstance]) -> MultimodalDataset:
    if not instances:
        raise InvalidInput("cannot assemble a dataset from zero instances")
    dims = instances[0].dims
    for inst in instances[1:]:
        if inst.dims != dims:
            raise ShapeMismatch(f"mixed instance shapes {dims} and {inst.dims}")
    return MultimodalDataset(len(dims), dims, tuple(instances))


def split_train_test(
    events: Sequence[EventSeries], train_fraction: float, seed: int
) -> tuple[list[EventSeries], list[EventSeries]]:
    """Shuffle events under ``seed`` and cut off ``floor(fraction * count)`` for training.

    Splitting is per event so no window of a test event is seen in training.
    """
    if not events:
        raise InvalidInput("no events to split")
    if not (0.0 < train_fraction <= 1.0):
        raise InvalidInput(f"train_fraction must be in (0, 1], got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(events))
    # guard against 0.7 * 10 = 6.999... style rounding
    n_train = int(math.floor(train_fraction * len(events) + 1e-9))
    train = [events[i] for i in order[:n_train]]
    test = [events[i] for i in order[n_train:]]
    return train, test


# ---------------------------------------------------------------------------
# file formats


def write_event(event: EventSeries, directory: str | Path) -> None:
    """Write ``<id>.csv`` (timestamp, channel values) and ``<id>.json`` sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"{event.id}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [f"ch{c}" for c in range(event.channels.shape[0])])
        for j, t in enumerate(event.timestamps):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in event.channels[:, j]])
    sidecar = {
        "id": event.id,
        "tau1": event.tau1,
        "tau2": event.tau2,
        "event_class": event.event_class,
        "modality_of_channel": list(event.modality_of_channel),
    }
    (directory / f"{event.id}.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def read_event(json_path: str | Path) -> EventSeries:
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text())
    csv_path = json_path.with_suffix(".csv")
    with open(csv_path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    table = np.array(rows, dtype=float)
    if table.ndim != 2 or table.shape[1] < 2:
        raise InvalidInput(f"{csv_path}: need a timestamp column and at least one channel")
    return EventSeries(
        id=str(meta["id"]),
        timestamps=table[:, 0],
        channels=table[:, 1:].T,
        modality_of_channel=meta["modality_of_channel"],
        tau1=meta["tau1"],
        tau2=meta["tau2"],
        event_class=meta.get("event_class"),
    )


def read_events(directory: str | Path) -> list[EventSeries]:
    """All events of a directory, ordered by file name."""
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise InvalidInput(f"no event sidecars found in {directory}")
    return [read_event(p) for p in paths]


def dataset_to_dict(dataset: MultimodalDataset) -> dict:
    return {
        "M": dataset.M,
        "D": list(dataset.D),
        "instances": [
            {
                "label": inst.label,
                "end_time": inst.end_time,
                "source_event": inst.source_event,
                "vectors": [v.tolist() for v in inst.vectors],
            }
            for inst in dataset.instances
        ],
    }


def dataset_from_dict(payload: dict) -> MultimodalDataset:
    instances = [
        MultimodalInstance(
            tuple(np.asarray(v, dtype=float) for v in item["vectors"]),
            int(item["label"]),
            item.get("source_event", ""),
            float(item.get("end_time", 0.0)),
        )
        for item in payload["instances"]
    ]
    dataset = assemble_dataset(instances)
    if dataset.M != payload["M"] or list(dataset.D) != list(payload["D"]):
        raise ShapeMismatch("dataset header disagrees with instance shapes")
    return dataset
