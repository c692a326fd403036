"""Reliability metrics and the earliness harness."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import EventSeries
from .errors import InvalidInput, ShapeMismatch
from .inference import classify_batch, fuse
from .preprocessing import WindowSpec, extract_rolling_instances

METRIC_ORDER = ("acc", "tpr", "tnr", "pre", "hm", "gm")


@dataclass(frozen=True)
class EvaluationReport:
    n_tp: int
    n_tn: int
    n_fp: int
    n_fn: int
    acc: float
    tpr: float
    tnr: float
    pre: float
    hm: float
    gm: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["n_tp", "n_tn", "n_fp", "n_fn", *METRIC_ORDER, "degenerate"],
    "properties": {
        **{k: {"type": "integer", "minimum": 0} for k in ("n_tp", "n_tn", "n_fp", "n_fn")},
        **{k: {"type": "number", "minimum": 0, "maximum": 1} for k in METRIC_ORDER},
        "degenerate": {"type": "boolean"},
    },
}


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def harmonic_mean(pre: float, tpr: float) -> float:
    """F1-style mean of precision and recall."""
    return _ratio(2.0 * pre * tpr, pre + tpr)


def geometric_mean(tpr: float, tnr: float) -> float:
    return math.sqrt(tpr * tnr)


def reliability_metrics(predictions, labels) -> EvaluationReport:
    """Confusion counts and rates; positives are target-class (label 1) instances."""
    pred = np.asarray(predictions, dtype=bool).ravel()
    true = np.asarray(labels, dtype=bool).ravel()
    if pred.shape != true.shape:
        raise ShapeMismatch(f"{pred.size} predictions for {true.size} labels")
    n_tp = int(np.sum(pred & true))
    n_tn = int(np.sum(~pred & ~true))
    n_fp = int(np.sum(pred & ~true))
    n_fn = int(np.sum(~pred & true))
    n_pos, n_neg = n_tp + n_fn, n_tn + n_fp
    tpr = _ratio(n_tp, n_pos)
    tnr = _ratio(n_tn, n_neg)
    pre = _ratio(n_tp, n_tp + n_fp)
    return EvaluationReport(
        n_tp=n_tp,
        n_tn=n_tn,
        n_fp=n_fp,
        n_fn=n_fn,
        acc=_ratio(n_tp + n_tn, pred.size),
        tpr=tpr,
        tnr=tnr,
        pre=pre,
        hm=harmonic_mean(pre, tpr),
        gm=geometric_mean(tpr, tnr),
        degenerate=n_pos == 0 or n_neg == 0,
    )


def format_table(rows: Sequence[tuple[str, EvaluationReport]]) -> str:
    """Aligned text table with one row per labelled report."""
    width = max([len("strategy")] + [len(name) for name, _ in rows])
    lines = [f"{'strategy':<{width}}  " + "  ".join(f"{k:>5}" for k in METRIC_ORDER)]
    for name, rep in rows:
        vals = "  ".join(f"{getattr(rep, k):5.2f}" for k in METRIC_ORDER)
        lines.append(f"{name:<{width}}  {vals}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# earliness


@dataclass(frozen=True)
class EarlinessReport:
    cct: float
    event_ids: tuple[str, ...]
    detection_times: tuple[float | None, ...]
    false_trigger: tuple[bool, ...]
    delay: float | None
    ttr: float
    ftr: float
    earl: float | None
    delays: tuple[float, ...] = field(default=())

    @property
    def n_events(self) -> int:
        return len(self.event_ids)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["event_ids"] = list(self.event_ids)
        out["detection_times"] = list(self.detection_times)
        out["false_trigger"] = list(self.false_trigger)
        out["delays"] = list(self.delays)
        return out


def earliness(cct: float, delay: float) -> float:
    if not cct > 0:
        raise InvalidInput(f"cct must be > 0, got {cct}")
    return (cct - delay) / cct


def summarize_detections(
    events: Sequence[EventSeries], detection_times: Sequence[float | None], cct: float
) -> EarlinessReport:
    """Average delay over true triggers; misses and out-of-range triggers are false triggers."""
    if not cct > 0:
        raise InvalidInput(f"cct must be > 0, got {cct}")
    if len(events) != len(detection_times):
        raise ShapeMismatch("one detection time per event is required")
    if not events:
        raise InvalidInput("earliness needs at least one event")
    delays, false = [], []
    for event, t in zip(events, detection_times):
        hit = t is not None and event.tau1 <= t <= event.tau2
        false.append(not hit)
        if hit:
            delays.append(t - event.tau1)
    ftr = sum(false) / len(events)
    delay = float(np.mean(delays)) if delays else None
    return EarlinessReport(
        cct=float(cct),
        event_ids=tuple(e.id for e in events),
        detection_times=tuple(None if t is None else float(t) for t in detection_times),
        false_trigger=tuple(false),
        delay=delay,
        ttr=1.0 - ftr,
        ftr=ftr,
        earl=earliness(cct, delay) if delay is not None else None,
        delays=tuple(delays),
    )


def first_detection_times(
    events: Sequence[EventSeries],
    detector: Callable[[list[np.ndarray]], np.ndarray],
    spec: WindowSpec,
    n_modalities: int | None = None,
) -> list[float | None]:
    """End time of the first window flagged by ``detector`` in every event, or None.

    ``detector`` receives the per-modality window matrices ``(D_m, P)`` of one
    event in chronological order and returns ``P`` booleans.
    """
    times = []
    for event in events:
        windows = extract_rolling_instances(event, spec, n_modalities)
        M = len(windows[0].vectors)
        mats = [np.column_stack([w.vectors[m] for w in windows]) for m in range(M)]
        flags = np.asarray(detector(mats), dtype=bool)
        hits = np.flatnonzero(flags)
        times.append(windows[int(hits[0])].end_time if hits.size else None)
    return times


def evaluate_earliness(
    model,
    strategy,
    events: Sequence[EventSeries],
    cct: float,
    spec: WindowSpec,
) -> EarlinessReport:
    """Roll windows over raw events, apply the model's preprocessing and fused decision."""
    if not cct > 0:
        raise InvalidInput(f"cct must be > 0, got {cct}")

    def detector(mats):
        return fuse(classify_batch(model, mats, preprocess=True), strategy)

    times = first_detection_times(events, detector, spec, model.M)
    return summarize_detections(events, times, cct)
