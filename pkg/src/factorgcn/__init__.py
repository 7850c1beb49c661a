"""Graph-level disentanglement toolkit.

Factorized graph convolutions over a from-scratch autodiff engine, a
synthetic multi-factor benchmark, edge-edit disentanglement metrics, and a
train/eval/generate CLI.
"""

from .graphs import (
    CATALOG_ORDER,
    Dataset,
    FactorGroundTruth,
    Graph,
    Sample,
    generate_synthetic,
    load_dataset,
    predefined_graph,
    save_dataset,
)
from .metrics import MetricsReport, c_score, feature_correlation, hungarian, micro_f1
from .models import (
    FactorGCN,
    ModelConfig,
    TrainReport,
    build_model,
    default_config,
    evaluate,
    load_model,
    save_model,
    train,
)
from .optim import Adam
from .tensor import Tensor, backward, no_grad, zero_grads

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CATALOG_ORDER",
    "Dataset",
    "FactorGCN",
    "FactorGroundTruth",
    "Graph",
    "MetricsReport",
    "ModelConfig",
    "Sample",
    "Tensor",
    "TrainReport",
    "backward",
    "build_model",
    "c_score",
    "default_config",
    "evaluate",
    "feature_correlation",
    "generate_synthetic",
    "hungarian",
    "load_dataset",
    "load_model",
    "micro_f1",
    "no_grad",
    "predefined_graph",
    "save_dataset",
    "save_model",
    "train",
    "zero_grads",
    "__version__",
]
