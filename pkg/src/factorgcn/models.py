"""Model assembly, baselines, training loop, and model persistence.

The main model stacks disentangle layers, pools the final node features, and
maps them through one affine head.  A structure discriminator classifies the
first layer's factor graphs; its loss joins the task loss as
``total = task + disc_weight * disc``.  Training takes one optimizer step per
graph and keeps the parameters from the best-validation epoch.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics
from . import tensor as T
from .discriminator import Discriminator, readout
from .graphs import Dataset, Graph
from .layers import DisentangleLayer
from .optim import Adam
from .seeding import RNG_ALGORITHM, glorot_uniform, new_rng
from .tensor import Tensor

MODEL_FILE_VERSION = 1

TASKS = ("multi-label", "multi-class", "regression")
MODEL_KINDS = ("factorgcn", "mlp", "gcn")

_TASK_LOSS = {
    "multi-label": "binary_cross_entropy",
    "multi-class": "cross_entropy",
    "regression": "l1",
}


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""


class ModelFormatError(ValueError):
    """A model file is malformed or inconsistent with its config."""


class IncompatibleModelError(ValueError):
    """Model and dataset disagree on a structural field."""


@dataclass
class ModelConfig:
    """Architecture plus optimizer settings; defaults follow the synthetic task."""

    model: str = "factorgcn"
    task: str = "multi-label"
    feature_dim: int = 15
    n_labels: int = 4
    factors_per_layer: tuple[int, ...] = (4, 4)
    hidden_dim: int = 32
    disc_weight: float = 0.5
    learning_rate: float = 0.005
    weight_decay: float = 5e-5
    epochs: int = 80
    seed: int = 0
    rng: str = RNG_ALGORITHM

    def __post_init__(self):
        self.factors_per_layer = tuple(int(f) for f in self.factors_per_layer)
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}, expected one of {MODEL_KINDS}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if not self.factors_per_layer:
            raise ValueError("need at least one layer")
        if any(f < 1 for f in self.factors_per_layer):
            raise ValueError("factor counts must be positive")
        if self.disc_weight < 0:
            raise ValueError("disc_weight must be non-negative")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["factors_per_layer"] = list(self.factors_per_layer)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ModelFormatError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)


def default_config(dataset: Dataset, model: str = "factorgcn", **overrides) -> ModelConfig:
    """Paper-default hyper-parameters sized to a synthetic dataset."""
    n = dataset.n_factors
    base = {
        "model": model,
        "feature_dim": dataset.feature_dim,
        "n_labels": n,
        "factors_per_layer": (n, n),
        "hidden_dim": 32 if n <= 4 else 64,
    }
    base.update(overrides)
    return ModelConfig(**base)


def _affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return T.add(T.matmul(x, weight), bias)


class FactorGCN:
    """Stacked disentangle layers with a discriminator and a pooled affine head."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        if config.model != "factorgcn":
            raise ValueError(f"config is for model {config.model!r}")
        self.config = config
        rng = rng if rng is not None else new_rng(config.seed)
        self.layers: list[DisentangleLayer] = []
        in_dim = config.feature_dim
        last = len(config.factors_per_layer) - 1
        for idx, n_factors in enumerate(config.factors_per_layer):
            activation = "identity" if idx == last else "relu"
            self.layers.append(
                DisentangleLayer(in_dim, config.hidden_dim, n_factors, rng, activation)
            )
            in_dim = n_factors * config.hidden_dim
        self.discriminator = Discriminator(config.hidden_dim, config.factors_per_layer[0], rng)
        self.head_weight = Tensor(
            glorot_uniform(rng, in_dim, config.n_labels, (in_dim, config.n_labels)),
            requires_grad=True,
        )
        self.head_bias = Tensor(np.zeros(config.n_labels), requires_grad=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, layer in enumerate(self.layers):
            named += [(f"layers.{i}.{n}", t) for n, t in layer.parameters()]
        named += [(f"discriminator.{n}", t) for n, t in self.discriminator.parameters()]
        named += [("head.weight", self.head_weight), ("head.bias", self.head_bias)]
        return named

    def _backbone(self, graph: Graph):
        feats = Tensor(graph.node_features)
        coeffs = []
        for layer in self.layers:
            feats, c = layer.forward(feats, graph)
            coeffs.append(c)
        return feats, coeffs

    def forward(self, graph: Graph):
        """Task output logits (1, n_labels) and the coefficients of every layer."""
        feats, coeffs = self._backbone(graph)
        return _affine(readout(feats), self.head_weight, self.head_bias), coeffs

    def loss_terms(self, graph: Graph, label) -> tuple[Tensor, Tensor, Tensor | None]:
        """(total, task, discriminator) losses for one sample.

        The discriminator sees the first layer's factor graphs; it is skipped
        entirely when its weight is zero, so its parameters then receive no
        gradient at all.
        """
        logits, coeffs = self.forward(graph)
        task = _task_loss(self.config.task, logits, label)
        if self.config.disc_weight == 0:
            return task, task, None
        first = coeffs[0]
        disc = self.discriminator.loss([(first, first.hidden)])
        return T.add(task, T.mul(disc, Tensor(self.config.disc_weight))), task, disc

    def predict(self, graph: Graph):
        """Detached (probabilities, (arcs, first-layer coefficient matrix))."""
        with T.no_grad():
            logits, coeffs = self.forward(graph)
            probs = _output_probs(self.config.task, logits)
        first = coeffs[0]
        return probs, (first.arcs, first.values.data.copy())

    def embed(self, graph: Graph) -> np.ndarray:
        """Mean-pooled final-layer node features (the correlation-analysis input)."""
        with T.no_grad():
            feats, _ = self._backbone(graph)
            return readout(feats).data[0].copy()


class MLPBaseline:
    """Two per-node affine layers; ignores the arc structure entirely."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        if config.model != "mlp":
            raise ValueError(f"config is for model {config.model!r}")
        self.config = config
        rng = rng if rng is not None else new_rng(config.seed)
        h = config.hidden_dim
        dims = [(config.feature_dim, h), (h, h)]
        self.weights = [
            Tensor(glorot_uniform(rng, a, b, (a, b)), requires_grad=True) for a, b in dims
        ]
        self.biases = [Tensor(np.zeros(b), requires_grad=True) for _, b in dims]
        self.head_weight = Tensor(
            glorot_uniform(rng, h, config.n_labels, (h, config.n_labels)), requires_grad=True
        )
        self.head_bias = Tensor(np.zeros(config.n_labels), requires_grad=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named += [(f"layers.{i}.weight", w), (f"layers.{i}.bias", b)]
        named += [("head.weight", self.head_weight), ("head.bias", self.head_bias)]
        return named

    def _backbone(self, graph: Graph) -> Tensor:
        feats = Tensor(graph.node_features)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            feats = _affine(feats, w, b)
            if i < last:
                feats = T.relu(feats)
        return feats

    def forward(self, graph: Graph):
        pooled = readout(self._backbone(graph))
        return _affine(pooled, self.head_weight, self.head_bias), []

    def loss_terms(self, graph: Graph, label):
        logits, _ = self.forward(graph)
        task = _task_loss(self.config.task, logits, label)
        return task, task, None

    def predict(self, graph: Graph):
        with T.no_grad():
            logits, _ = self.forward(graph)
            return _output_probs(self.config.task, logits), None

    def embed(self, graph: Graph) -> np.ndarray:
        with T.no_grad():
            return readout(self._backbone(graph)).data[0].copy()


class GCNBaseline:
    """Plain symmetric-normalized propagation: every arc coefficient fixed to 1."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        if config.model != "gcn":
            raise ValueError(f"config is for model {config.model!r}")
        self.config = config
        rng = rng if rng is not None else new_rng(config.seed)
        h = config.hidden_dim
        dims = [(config.feature_dim, h), (h, h)]
        self.weights = [
            Tensor(glorot_uniform(rng, a, b, (a, b)), requires_grad=True) for a, b in dims
        ]
        self.head_weight = Tensor(
            glorot_uniform(rng, h, config.n_labels, (h, config.n_labels)), requires_grad=True
        )
        self.head_bias = Tensor(np.zeros(config.n_labels), requires_grad=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = [(f"layers.{i}.weight", w) for i, w in enumerate(self.weights)]
        named += [("head.weight", self.head_weight), ("head.bias", self.head_bias)]
        return named

    @staticmethod
    def propagation(graph: Graph) -> Tensor:
        """Constant degree-normalized adjacency (no self loops)."""
        from .layers import arc_inv_norm

        adj = np.zeros((graph.num_nodes, graph.num_nodes))
        if graph.arcs.shape[0]:
            inv = arc_inv_norm(graph.arcs, graph.degrees)
            adj[graph.arcs[:, 0], graph.arcs[:, 1]] = inv
        return Tensor(adj)

    def _backbone(self, graph: Graph) -> Tensor:
        adj = self.propagation(graph)
        feats = Tensor(graph.node_features)
        last = len(self.weights) - 1
        for i, w in enumerate(self.weights):
            feats = T.matmul(adj, T.matmul(feats, w))
            if i < last:
                feats = T.relu(feats)
        return feats

    def forward(self, graph: Graph):
        pooled = readout(self._backbone(graph))
        return _affine(pooled, self.head_weight, self.head_bias), []

    def loss_terms(self, graph: Graph, label):
        logits, _ = self.forward(graph)
        task = _task_loss(self.config.task, logits, label)
        return task, task, None

    def predict(self, graph: Graph):
        with T.no_grad():
            logits, _ = self.forward(graph)
            return _output_probs(self.config.task, logits), None

    def embed(self, graph: Graph) -> np.ndarray:
        with T.no_grad():
            return readout(self._backbone(graph)).data[0].copy()


class RandomBaseline:
    """Reference point: random factor graphs and random task outputs.

    Each generated factor graph draws a uniform(0, 1) coefficient for every
    arc of the complete graph on the sample's nodes, so its support is not
    tied to the input edges the way a learned factor graph is.
    """

    def __init__(self, n_factors: int, n_labels: int, seed: int = 0):
        self.n_factors = n_factors
        self.n_labels = n_labels
        self._rng = new_rng(seed)
        self._complete: dict[int, np.ndarray] = {}

    def _complete_arcs(self, num_nodes: int) -> np.ndarray:
        if num_nodes not in self._complete:
            arcs = [(i, j) for i in range(num_nodes) for j in range(num_nodes) if i != j]
            self._complete[num_nodes] = np.array(arcs, dtype=np.int64)
        return self._complete[num_nodes]

    def predict(self, graph: Graph):
        probs = self._rng.uniform(0.0, 1.0, self.n_labels)
        arcs = self._complete_arcs(graph.num_nodes)
        values = self._rng.uniform(0.0, 1.0, (arcs.shape[0], self.n_factors))
        return probs, (arcs, values)


def build_model(config: ModelConfig, rng: np.random.Generator | None = None):
    if config.model == "factorgcn":
        return FactorGCN(config, rng)
    if config.model == "mlp":
        return MLPBaseline(config, rng)
    if config.model == "gcn":
        return GCNBaseline(config, rng)
    raise ValueError(f"unknown model {config.model!r}")


def _task_loss(task: str, logits: Tensor, label) -> Tensor:
    target = np.atleast_2d(np.asarray(label))
    if task == "multi-label":
        return T.binary_cross_entropy(T.sigmoid(logits), target)
    if task == "multi-class":
        return T.cross_entropy(logits, np.asarray(label).reshape(-1))
    return T.l1_loss(logits, np.asarray(label, dtype=np.float64).reshape(logits.shape))


def _output_probs(task: str, logits: Tensor) -> np.ndarray:
    if task == "multi-label":
        return T.sigmoid(logits).data[0].copy()
    if task == "multi-class":
        return T.softmax(logits, axis=1).data[0].copy()
    return logits.data[0].copy()


def total_loss(task: Tensor, disc: Tensor | None, disc_weight: float) -> Tensor:
    """Combine task and discriminator losses: task + disc_weight * disc."""
    if disc is None or disc_weight == 0:
        return task
    return T.add(task, T.mul(disc, Tensor(disc_weight)))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainReport:
    """Per-epoch history plus the checkpoint and final test metrics."""

    train_losses: list[float]
    val_losses: list[float]
    val_metrics: list[float]
    best_epoch: int
    final_metrics: dict[str, float]
    wall_clock_seconds: float
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def _task_metric(task: str, probs: np.ndarray, labels: np.ndarray) -> float:
    """Scalar validation metric, oriented so larger is better."""
    if task == "multi-label":
        return metrics.micro_f1(probs, labels)
    if task == "multi-class":
        return float(np.mean(probs.argmax(axis=1) == labels.reshape(-1)))
    return -metrics.mae(probs, labels)


def _eval_split(model, dataset: Dataset, split: str) -> tuple[float, float]:
    """(mean task loss, task metric) over one split, without recording a tape."""
    samples = dataset.split_samples(split)
    losses = []
    probs = []
    labels = []
    with T.no_grad():
        for s in samples:
            logits, _ = model.forward(s.graph)
            losses.append(_task_loss(model.config.task, logits, s.label).item())
            probs.append(_output_probs(model.config.task, logits))
            labels.append(s.label)
    metric = _task_metric(model.config.task, np.stack(probs), np.stack(labels))
    return float(np.mean(losses)), metric


def train(dataset: Dataset, config: ModelConfig, log=None):
    """Train per the config; returns (model, TrainReport).

    One optimizer step per graph.  The returned model carries the parameters
    of the epoch with the best validation task metric (earliest epoch on
    ties), not the last epoch.
    """
    for split in ("train", "val", "test"):
        if not dataset.splits.get(split):
            raise ValueError(f"dataset has an empty '{split}' split")
    started = time.perf_counter()
    rng = new_rng(config.seed)
    model = build_model(config, rng)
    params = model.parameters()
    opt = Adam(
        [t for _, t in params],
        lr=config.learning_rate,
        weight_decay=config.weight_decay,
    )
    train_indices = dataset.splits["train"]

    train_losses: list[float] = []
    val_losses: list[float] = []
    val_metrics: list[float] = []
    best_metric = -np.inf
    best_epoch = -1
    best_params: dict[str, np.ndarray] = {}

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_indices))
        epoch_losses = np.empty(len(order))
        for pos, k in enumerate(order):
            sample = dataset.samples[train_indices[k]]
            total, _, _ = model.loss_terms(sample.graph, sample.label)
            if not np.isfinite(total.data):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, sample {train_indices[k]}"
                )
            opt.zero_grad()
            T.backward(total)
            opt.step()
            epoch_losses[pos] = total.item()
        val_loss, val_metric = _eval_split(model, dataset, "val")
        train_losses.append(float(epoch_losses.mean()))
        val_losses.append(val_loss)
        val_metrics.append(val_metric)
        # >= so ties favor the later epoch: the task metric saturates early on
        # the synthetic data while the discriminator keeps improving.
        if val_metric >= best_metric:
            best_metric = val_metric
            best_epoch = epoch
            best_params = {name: t.data.copy() for name, t in params}
        if log is not None:
            log(
                f"epoch {epoch + 1:3d}/{config.epochs}  "
                f"train loss {train_losses[-1]:.4f}  val loss {val_loss:.4f}  "
                f"val metric {val_metric:.4f}"
            )

    for name, t in params:
        t.data = best_params[name].copy()
    test_loss, test_metric = _eval_split(model, dataset, "test")
    metric_name = "micro_f1" if config.task == "multi-label" else (
        "accuracy" if config.task == "multi-class" else "neg_mae"
    )
    report = TrainReport(
        train_losses=train_losses,
        val_losses=val_losses,
        val_metrics=val_metrics,
        best_epoch=best_epoch,
        final_metrics={f"test_{metric_name}": test_metric, "test_loss": test_loss},
        wall_clock_seconds=time.perf_counter() - started,
        config=config.to_dict(),
    )
    return model, report


# ---------------------------------------------------------------------------
# evaluation against ground-truth factors


def check_compatible(config: ModelConfig, dataset: Dataset) -> None:
    if config.feature_dim != dataset.feature_dim:
        raise IncompatibleModelError(
            f"feature_dim: model expects {config.feature_dim}, dataset has {dataset.feature_dim}"
        )
    if config.n_labels != dataset.n_factors:
        raise IncompatibleModelError(
            f"n_labels: model predicts {config.n_labels}, dataset has {dataset.n_factors} factors"
        )


def evaluate(model, dataset: Dataset, split: str = "test") -> metrics.MetricsReport:
    """Task and disentanglement metrics for one model over one split.

    Disentanglement uses the first layer's coefficients, matched against each
    sample's ground-truth factors; models without coefficients only get the
    task metric.
    """
    samples = dataset.split_samples(split)
    if not samples:
        raise ValueError(f"split {split!r} is empty")
    probs = []
    labels = []
    matches = []
    n_factors = 0
    for s in samples:
        p, coeff = model.predict(s.graph)
        probs.append(p)
        labels.append(s.label)
        if coeff is not None:
            arcs, values = coeff
            n_factors = values.shape[1]
            matches.append(metrics.match_factors(arcs, values, s.factors))
    probs = np.stack(probs)
    labels = np.stack(labels)

    task = getattr(model, "config", None)
    task_kind = task.task if task is not None else "multi-label"
    f1 = metrics.micro_f1(probs, labels) if task_kind != "regression" else None
    err = metrics.mae(probs, labels) if task_kind == "regression" else None

    if matches:
        totals = np.array([m.total for m in matches], dtype=np.float64)
        report = metrics.MetricsReport(
            micro_f1=f1,
            ged_mean=float(totals.mean()),
            ged_std=float(totals.std()),
            c_score=metrics.c_score(matches, n_factors),
            n_samples=len(samples),
            n_factors=n_factors,
            per_sample=matches,
            histograms=metrics.match_histograms(matches, n_factors),
            mae=err,
        )
    else:
        report = metrics.MetricsReport(
            micro_f1=f1,
            ged_mean=None,
            ged_std=None,
            c_score=None,
            n_samples=len(samples),
            n_factors=0,
            mae=err,
        )
    return report


def split_features(model, dataset: Dataset, split: str = "test") -> np.ndarray:
    """Stack mean-pooled final-layer features over a split (correlation input)."""
    return np.stack([model.embed(s.graph) for s in dataset.split_samples(split)])


# ---------------------------------------------------------------------------
# model persistence


def save_model(model, path) -> None:
    """Write config and all named parameters as JSON; lossless round-trip."""
    doc = {
        "version": MODEL_FILE_VERSION,
        "config": model.config.to_dict(),
        "params": [
            {"name": name, "shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in model.parameters()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))


def load_model(path):
    """Rebuild a model from a file written by :func:`save_model`."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    for key in ("version", "config", "params"):
        if key not in doc:
            raise ModelFormatError(f"model file missing field '{key}'")
    if doc["version"] != MODEL_FILE_VERSION:
        raise ModelFormatError(f"unsupported model file version {doc['version']!r}")
    try:
        config = ModelConfig.from_dict(doc["config"])
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad config: {exc}") from exc
    model = build_model(config)
    stored = {}
    for entry in doc["params"]:
        for key in ("name", "shape", "data"):
            if key not in entry:
                raise ModelFormatError(f"param entry missing field '{key}'")
        stored[entry["name"]] = entry
    for name, t in model.parameters():
        if name not in stored:
            raise ModelFormatError(f"model file missing parameter '{name}'")
        entry = stored.pop(name)
        shape = tuple(entry["shape"])
        if shape != t.shape:
            raise ModelFormatError(f"parameter '{name}' has shape {shape}, expected {t.shape}")
        values = np.asarray(entry["data"], dtype=np.float64)
        if values.size != t.data.size:
            raise ModelFormatError(f"parameter '{name}' has {values.size} values, expected {t.data.size}")
        t.data = values.reshape(shape)
    if stored:
        raise ModelFormatError(f"model file has unexpected parameters: {sorted(stored)}")
    return model


def clone_config(config: ModelConfig, **overrides) -> ModelConfig:
    return replace(config, **overrides)
