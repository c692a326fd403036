"""Graph-regularized multimodal subspace SVDD for event detection."""

from .data import EventSeries, MultimodalDataset, MultimodalInstance, assemble_dataset, split_train_test
from .errors import (
    DegenerateData,
    DegenerateKernel,
    GrmsError,
    InfeasibleC,
    InvalidInput,
    ShapeMismatch,
    WrongPath,
)
from .inference import DecisionStrategy, classify_modalities, fuse, predict
from .metrics import EarlinessReport, EvaluationReport, evaluate_earliness, reliability_metrics
from .svdd import SvddSolution, score, solve_svdd
from .trainer import ModelConfig, TrainedModel, project, train

__version__ = "0.1.0"

__all__ = [
    "DecisionStrategy",
    "DegenerateData",
    "DegenerateKernel",
    "EarlinessReport",
    "EvaluationReport",
    "EventSeries",
    "GrmsError",
    "InfeasibleC",
    "InvalidInput",
    "ModelConfig",
    "MultimodalDataset",
    "MultimodalInstance",
    "ShapeMismatch",
    "SvddSolution",
    "TrainedModel",
    "WrongPath",
    "assemble_dataset",
    "classify_modalities",
    "evaluate_earliness",
    "fuse",
    "predict",
    "project",
    "reliability_metrics",
    "score",
    "solve_svdd",
    "split_train_test",
    "train",
]
