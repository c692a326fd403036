"""Command-line entry point.

Every command reads one JSON experiment config (``--config``); flags override
the matching config fields. Output files are written under ``out_dir``::

    grmssvdd generate   --config exp.json          # events/*.csv + *.json
    grmssvdd preprocess --config exp.json          # train.json, test.json, preprocessing.json, split.json
    grmssvdd train      --config exp.json          # model.json
    grmssvdd evaluate   --config exp.json          # report.json, report.txt, predictions_<strategy>.csv
    grmssvdd gridsearch --config exp.json          # grid.json, grid.txt, model.json, report.*
    grmssvdd earliness  --config exp.json          # earliness.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from . import synthgen
from .data import dataset_from_dict, dataset_to_dict, read_events, split_train_test, write_event
from .errors import GrmsError, InvalidInput
from .inference import DecisionStrategy, all_strategies, classify_batch, fuse, write_predictions
from .metrics import REPORT_SCHEMA, evaluate_earliness, format_table
from .pipeline import GridSpec, evaluate_model, format_grid, grid_search, preprocess
from .preprocessing import NormalizationStats, PcaModel, WindowSpec
from .trainer import ModelConfig, TrainedModel, train

log = logging.getLogger("grmssvdd")

EVALUATION_SCHEMA = {
    "type": "object",
    "required": ["strategies"],
    "properties": {"strategies": {"type": "object", "additionalProperties": REPORT_SCHEMA}},
}


@dataclass
class ExperimentConfig:
    out_dir: str = "out"
    events_dir: str | None = None
    model_path: str | None = None
    seed: int = 0
    window: int = 10
    train_fraction: float = 0.7
    noise_factor: float = 0.0
    pca_components: int = 30
    holdout_fraction: float = 1.0 / 3.0
    strategies: list[str] | None = None
    cct: float = 0.1
    earliness_events: int | None = 50
    synth: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    @property
    def events_path(self) -> Path:
        return Path(self.events_dir) if self.events_dir else self.out / "events"

    @property
    def model_file(self) -> Path:
        return Path(self.model_path) if self.model_path else self.out / "model.json"

    def strategy_list(self, M: int) -> list[DecisionStrategy]:
        if not self.strategies:
            return all_strategies(M)
        return [DecisionStrategy.parse(s) for s in self.strategies]

    def model_config(self) -> ModelConfig:
        payload = {"seed": self.seed, **self.model}
        return ModelConfig.from_dict(payload)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    payload = {}
    if args.config:
        payload = json.loads(Path(args.config).read_text())
    unknown = set(payload) - set(ExperimentConfig.__dataclass_fields__)
    if unknown:
        raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**payload)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.events is not None:
        cfg.events_dir = args.events
    if args.model is not None:
        cfg.model_path = args.model
    if args.strategy is not None:
        cfg.strategies = [args.strategy]
    if args.noise is not None:
        cfg.noise_factor = args.noise
    if args.npt is not None:
        cfg.model = {**cfg.model, "use_npt": args.npt == "on"}
    return cfg


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _read_json(path: Path):
    if not path.exists():
        raise InvalidInput(f"missing input file {path}")
    return json.loads(path.read_text())


def _load_preprocessing(cfg: ExperimentConfig):
    payload = _read_json(cfg.out / "preprocessing.json")
    pca = [PcaModel.from_dict(p) for p in payload["pca"]]
    return pca, NormalizationStats.from_dict(payload["normalization"])


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig) -> int:
    synth = synthgen.SynthConfig.from_dict({"seed": cfg.seed, **cfg.synth})
    events = synthgen.generate(synth)
    target = cfg.events_path
    target.mkdir(parents=True, exist_ok=True)
    for event in events:
        write_event(event, target)
    log.info("wrote %d events to %s", len(events), target)
    return 0


def cmd_preprocess(cfg: ExperimentConfig) -> int:
    events = read_events(cfg.events_path)
    train_events, test_events = split_train_test(events, cfg.train_fraction, cfg.seed)
    result = preprocess(
        train_events, test_events, WindowSpec(cfg.window), cfg.noise_factor, cfg.pca_components, cfg.seed
    )
    _write_json(cfg.out / "train.json", dataset_to_dict(result.train))
    if result.test is not None:
        _write_json(cfg.out / "test.json", dataset_to_dict(result.test))
    _write_json(
        cfg.out / "preprocessing.json",
        {**result.preprocessing_dict(), "window": cfg.window, "noise_factor": cfg.noise_factor},
    )
    _write_json(
        cfg.out / "split.json",
        {"train": [e.id for e in train_events], "test": [e.id for e in test_events]},
    )
    log.info("preprocessed %d train / %d test instances", result.train.N, result.test.N if result.test else 0)
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    train_set = dataset_from_dict(_read_json(cfg.out / "train.json"))
    pca, norm = _load_preprocessing(cfg)
    model = train(train_set.targets(), cfg.model_config()).with_preprocessing(pca, norm)
    cfg.model_file.parent.mkdir(parents=True, exist_ok=True)
    model.save(cfg.model_file)
    log.info("trained for %d iterations; model written to %s", model.iterations, cfg.model_file)
    return 0


def _report(cfg: ExperimentConfig, model: TrainedModel, prefix: str = "report") -> dict:
    test_set = dataset_from_dict(_read_json(cfg.out / "test.json"))
    strategies = cfg.strategy_list(model.M)
    memberships = classify_batch(model, test_set.matrices, preprocess=False)
    reports = evaluate_model(model, test_set, strategies)
    for s in strategies:
        write_predictions(cfg.out / f"predictions_{s.name}.csv", memberships, fuse(memberships, s), test_set.labels)
    payload = {"strategies": {name: rep.to_dict() for name, rep in reports.items()}}
    jsonschema.validate(payload, EVALUATION_SCHEMA)
    _write_json(cfg.out / f"{prefix}.json", payload)
    (cfg.out / f"{prefix}.txt").write_text(format_table(list(reports.items())))
    return payload


def cmd_evaluate(cfg: ExperimentConfig) -> int:
    model = TrainedModel.load(cfg.model_file)
    payload = _report(cfg, model)
    for name, rep in payload["strategies"].items():
        log.info("%-5s gm=%.3f", name, rep["gm"])
    return 0


def cmd_gridsearch(cfg: ExperimentConfig) -> int:
    train_set = dataset_from_dict(_read_json(cfg.out / "train.json"))
    grid = GridSpec.from_dict(cfg.grid)
    configs = grid.expand(cfg.seed, train_set.M)
    strategies = cfg.strategy_list(train_set.M)
    result = grid_search(train_set, configs, strategies, cfg.holdout_fraction, cfg.seed)
    _write_json(
        cfg.out / "grid.json",
        {
            "n_configs": result.n_configs,
            "ranked": [r.to_dict() for r in result.rows],
            "failed": [r.to_dict() for r in result.errors],
        },
    )
    (cfg.out / "grid.txt").write_text(format_grid(result.rows))

    best = result.best
    pca, norm = _load_preprocessing(cfg)
    model = train(train_set.targets(), best.config).with_preprocessing(pca, norm)
    model.save(cfg.model_file)
    cfg.strategies = [best.strategy]
    if (cfg.out / "test.json").exists():
        _report(cfg, model)
    _write_json(cfg.out / "best.json", {"config": best.config.to_dict(), "strategy": best.strategy, "holdout_gm": best.gm})
    log.info("best holdout gm %.3f with strategy %s", best.gm, best.strategy)
    return 0


def cmd_earliness(cfg: ExperimentConfig) -> int:
    model = TrainedModel.load(cfg.model_file)
    test_ids = set(_read_json(cfg.out / "split.json")["test"])
    events = [e for e in read_events(cfg.events_path) if e.id in test_ids]
    if cfg.earliness_events:
        events = events[: cfg.earliness_events]
    if not events:
        raise InvalidInput("no test events available for earliness evaluation")
    spec = WindowSpec(cfg.window)
    out = {
        s.name: evaluate_earliness(model, s, events, cfg.cct, spec).to_dict()
        for s in cfg.strategy_list(model.M)
    }
    _write_json(cfg.out / "earliness.json", {"cct": cfg.cct, "strategies": out})
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "gridsearch": cmd_gridsearch,
    "earliness": cmd_earliness,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grmssvdd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--events", help="event directory (default <out>/events)")
        p.add_argument("--model", help="model JSON path (default <out>/model.json)")
        p.add_argument("--strategy", choices=["and", "or", "uni0", "uni1", "uni2"])
        p.add_argument("--noise", type=float, help="noise factor")
        p.add_argument("--npt", choices=["on", "off"])
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (GrmsError, OSError, KeyError, TypeError, json.JSONDecodeError, jsonschema.ValidationError) as exc:
        print(f"grmssvdd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
