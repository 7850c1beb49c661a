"""Graph data model and the synthetic multi-factor benchmark.

A benchmark sample is built by picking half of a fixed catalog of small
well-known graphs, padding each with isolated nodes to a shared node count,
and merging their edge sets by union on that shared index set.  Node features
are the rows of the merged adjacency matrix, and the label marks which
catalog entries went into the sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import RNG_ALGORITHM, new_rng

DATASET_VERSION = 1
PADDED_NODES = 15


class DatasetFormatError(ValueError):
    """A dataset file is missing or mangles a required field."""


@dataclass(frozen=True)
class FactorGroundTruth:
    """One latent factor: a named edge set on a shared node indexing."""

    kind: str
    num_nodes: int
    edges: tuple[tuple[int, int], ...]  # pairs with i < j, lexicographically sorted

    def __post_init__(self):
        for i, j in self.edges:
            if not 0 <= i < j < self.num_nodes:
                raise ValueError(f"edge ({i}, {j}) invalid on {self.num_nodes} nodes")


@dataclass
class Graph:
    """Undirected graph stored as directed arc pairs plus adjacency-row features."""

    num_nodes: int
    node_features: np.ndarray  # (num_nodes, F)
    arcs: np.ndarray  # (m, 2) int, both directions of every edge, sorted lexicographically
    degrees: np.ndarray  # (num_nodes,) undirected degree

    @property
    def num_edges(self) -> int:
        return self.arcs.shape[0] // 2

    def undirected_edges(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.arcs if i < j}


@dataclass
class Sample:
    graph: Graph
    label: np.ndarray  # (n_factors,) 0/1
    factors: list[FactorGroundTruth]


@dataclass
class Dataset:
    samples: list[Sample]
    n_factors: int
    feature_dim: int
    seed: int
    splits: dict[str, list[int]] = field(default_factory=dict)

    def split_samples(self, name: str) -> list[Sample]:
        return [self.samples[i] for i in self.splits[name]]


def _normalize_edges(edges) -> tuple[tuple[int, int], ...]:
    unique = {(int(i), int(j)) if i < j else (int(j), int(i)) for i, j in edges}
    return tuple(sorted(unique))


def graph_from_edges(num_nodes: int, edges, node_features: np.ndarray | None = None) -> Graph:
    """Build a Graph from undirected edges, validating the structural invariants."""
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop ({i}, {j}) not allowed")
        if not (0 <= i < num_nodes and 0 <= j < num_nodes):
            raise ValueError(f"edge ({i}, {j}) references a node >= {num_nodes}")
    undirected = _normalize_edges(edges)
    arc_set = sorted({(i, j) for i, j in undirected} | {(j, i) for i, j in undirected})
    arcs = np.array(arc_set, dtype=np.int64).reshape(len(arc_set), 2)
    degrees = np.zeros(num_nodes, dtype=np.int64)
    for i, j in undirected:
        degrees[i] += 1
        degrees[j] += 1
    if node_features is None:
        node_features = np.zeros((num_nodes, num_nodes))
        for i, j in undirected:
            node_features[i, j] = 1.0
            node_features[j, i] = 1.0
    return Graph(num_nodes, node_features, arcs, degrees)


# ---------------------------------------------------------------------------
# predefined graph catalog


def turan(num_nodes: int, num_parts: int) -> FactorGroundTruth:
    """Complete multipartite graph with part sizes as equal as possible."""
    if num_nodes > PADDED_NODES:
        raise ValueError(f"catalog graphs are capped at {PADDED_NODES} nodes")
    if not 1 <= num_parts <= num_nodes:
        raise ValueError("need 1 <= parts <= nodes")
    base, extra = divmod(num_nodes, num_parts)
    part_of = []
    for p in range(num_parts):
        part_of.extend([p] * (base + (1 if p < extra else 0)))
    edges = [
        (i, j)
        for i in range(num_nodes)
        for j in range(i + 1, num_nodes)
        if part_of[i] != part_of[j]
    ]
    return FactorGroundTruth(f"turan_{num_nodes}_{num_parts}", num_nodes, _normalize_edges(edges))


def house_x() -> FactorGroundTruth:
    """House graph whose square base also contains both diagonals."""
    square = [(0, 1), (1, 2), (2, 3), (0, 3)]
    diagonals = [(0, 2), (1, 3)]
    roof = [(2, 4), (3, 4)]
    return FactorGroundTruth("house_x", 5, _normalize_edges(square + diagonals + roof))


def balanced_binary_tree(depth: int) -> FactorGroundTruth:
    """Complete binary tree; depth 3 fills all fifteen shared nodes."""
    num_nodes = 2 ** (depth + 1) - 1
    if num_nodes > PADDED_NODES:
        raise ValueError(f"catalog graphs are capped at {PADDED_NODES} nodes")
    edges = []
    for i in range((num_nodes - 1) // 2):
        edges.append((i, 2 * i + 1))
        edges.append((i, 2 * i + 2))
    return FactorGroundTruth(f"btree_2_{depth}", num_nodes, _normalize_edges(edges))


def wheel(num_nodes: int) -> FactorGroundTruth:
    """Hub node 0 joined to every node of an outer cycle."""
    if num_nodes > PADDED_NODES:
        raise ValueError(f"catalog graphs are capped at {PADDED_NODES} nodes")
    rim = num_nodes - 1
    edges = [(0, i) for i in range(1, num_nodes)]
    edges += [(i, i % rim + 1) for i in range(1, num_nodes)]
    return FactorGroundTruth(f"wheel_{num_nodes}", num_nodes, _normalize_edges(edges))


def circular_ladder(cycle_len: int) -> FactorGroundTruth:
    """Two concentric cycles joined by rungs."""
    num_nodes = 2 * cycle_len
    if num_nodes > PADDED_NODES:
        raise ValueError(f"catalog graphs are capped at {PADDED_NODES} nodes")
    outer = [(i, (i + 1) % cycle_len) for i in range(cycle_len)]
    inner = [(cycle_len + i, cycle_len + (i + 1) % cycle_len) for i in range(cycle_len)]
    rungs = [(i, cycle_len + i) for i in range(cycle_len)]
    return FactorGroundTruth(
        f"circular_ladder_{cycle_len}", num_nodes, _normalize_edges(outer + inner + rungs)
    )


def star(num_leaves: int) -> FactorGroundTruth:
    """Center node 0 joined to each leaf."""
    num_nodes = num_leaves + 1
    if num_nodes > PADDED_NODES:
        raise ValueError(f"catalog graphs are capped at {PADDED_NODES} nodes")
    edges = [(0, i) for i in range(1, num_nodes)]
    return FactorGroundTruth(f"star_{num_leaves}", num_nodes, _normalize_edges(edges))


CATALOG = {
    "turan_7_3": lambda: turan(7, 3),
    "house_x": house_x,
    "btree_2_3": lambda: balanced_binary_tree(3),
    "wheel_8": lambda: wheel(8),
    "circular_ladder_5": lambda: circular_ladder(5),
    "star_9": lambda: star(9),
}
CATALOG_ORDER = list(CATALOG)


def predefined_graph(kind: str) -> FactorGroundTruth:
    """Look up one of the fixed catalog graphs by name."""
    if kind not in CATALOG:
        raise ValueError(f"unknown graph kind {kind!r}, expected one of {CATALOG_ORDER}")
    return CATALOG[kind]()


def pad_to(factor: FactorGroundTruth, num_nodes: int) -> FactorGroundTruth:
    """Extend the node set with isolated nodes; the edge set is unchanged."""
    if num_nodes < factor.num_nodes:
        raise ValueError(f"cannot pad {factor.num_nodes} nodes down to {num_nodes}")
    return FactorGroundTruth(factor.kind, num_nodes, factor.edges)


def merge_factors(chosen: list[FactorGroundTruth]) -> Graph:
    """Union the chosen factors' edge sets on their shared node indexing."""
    if not chosen:
        raise ValueError("merge_factors needs at least one factor")
    num_nodes = chosen[0].num_nodes
    for f in chosen:
        if f.num_nodes != num_nodes:
            raise ValueError("factors must be padded to a common node count before merging")
    edges: set[tuple[int, int]] = set()
    for f in chosen:
        edges |= set(f.edges)
    return graph_from_edges(num_nodes, edges)


# ---------------------------------------------------------------------------
# synthetic dataset generation


def generate_synthetic(n_factors: int, num_samples: int, seed: int) -> Dataset:
    """Generate the multi-factor benchmark: each sample merges half the catalog.

    Every sample picks ceil(n_factors / 2) distinct factor kinds uniformly at
    random, pads them to a shared 15-node index set, merges by edge union, and
    labels the chosen kinds with ones.  Split indices (80/10/10) come from the
    same seeded generator, so the whole dataset is a pure function of the seed.
    """
    if not 2 <= n_factors <= len(CATALOG_ORDER):
        raise ValueError(f"n_factors must be in [2, {len(CATALOG_ORDER)}], got {n_factors}")
    if num_samples <= 0:
        raise ValueError("num_samples must be positive")
    rng = new_rng(seed)
    kinds = CATALOG_ORDER[:n_factors]
    padded = [pad_to(predefined_graph(k), PADDED_NODES) for k in kinds]
    per_sample = (n_factors + 1) // 2

    samples = []
    for _ in range(num_samples):
        chosen = np.sort(rng.choice(n_factors, size=per_sample, replace=False))
        factors = [padded[i] for i in chosen]
        graph = merge_factors(factors)
        label = np.zeros(n_factors, dtype=np.int64)
        label[chosen] = 1
        union = set()
        for f in factors:
            union |= set(f.edges)
        if union != graph.undirected_edges():
            raise AssertionError("merged graph does not equal the union of its factors")
        samples.append(Sample(graph, label, factors))

    order = rng.permutation(num_samples)
    n_train = int(num_samples * 0.8)
    n_val = int(num_samples * 0.1)
    splits = {
        "train": [int(i) for i in order[:n_train]],
        "val": [int(i) for i in order[n_train : n_train + n_val]],
        "test": [int(i) for i in order[n_train + n_val :]],
    }
    return Dataset(samples, n_factors, PADDED_NODES, seed, splits)


# ---------------------------------------------------------------------------
# dataset file format (JSON; features are recomputed from adjacency on load)


def dataset_to_json(dataset: Dataset) -> str:
    doc = {
        "version": DATASET_VERSION,
        "n_factors": dataset.n_factors,
        "feature_dim": dataset.feature_dim,
        "seed": dataset.seed,
        "rng": RNG_ALGORITHM,
        "splits": dataset.splits,
        "samples": [
            {
                "n": s.graph.num_nodes,
                "edges": [[i, j] for i, j in sorted(s.graph.undirected_edges())],
                "label": [int(v) for v in s.label],
                "factors": [
                    {"kind": f.kind, "edges": [[i, j] for i, j in f.edges]} for f in s.factors
                ],
            }
            for s in dataset.samples
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_json(dataset))


def _require(mapping, key, context):
    if not isinstance(mapping, dict):
        raise DatasetFormatError(f"{context} must be an object")
    if key not in mapping:
        raise DatasetFormatError(f"{context} missing field '{key}'")
    return mapping[key]


def load_dataset(path) -> Dataset:
    """Load and validate a dataset file; raises DatasetFormatError on bad input."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"not valid JSON: {exc}") from exc

    version = _require(doc, "version", "dataset")
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version!r}")
    n_factors = _require(doc, "n_factors", "dataset")
    feature_dim = _require(doc, "feature_dim", "dataset")
    seed = _require(doc, "seed", "dataset")
    splits_doc = _require(doc, "splits", "dataset")
    samples_doc = _require(doc, "samples", "dataset")
    if not isinstance(samples_doc, list):
        raise DatasetFormatError("field 'samples' must be a list")

    samples = []
    for idx, s in enumerate(samples_doc):
        ctx = f"samples[{idx}]"
        n = _require(s, "n", ctx)
        edges = _require(s, "edges", ctx)
        label = _require(s, "label", ctx)
        factors_doc = _require(s, "factors", ctx)
        if len(label) != n_factors:
            raise DatasetFormatError(f"{ctx} field 'label' has length {len(label)}, expected {n_factors}")
        try:
            graph = graph_from_edges(n, [tuple(e) for e in edges])
        except (ValueError, TypeError) as exc:
            raise DatasetFormatError(f"{ctx} field 'edges' invalid: {exc}") from exc
        factors = []
        for fidx, f in enumerate(factors_doc):
            fctx = f"{ctx}.factors[{fidx}]"
            kind = _require(f, "kind", fctx)
            fedges = _require(f, "edges", fctx)
            try:
                factors.append(
                    FactorGroundTruth(kind, n, _normalize_edges([tuple(e) for e in fedges]))
                )
            except (ValueError, TypeError) as exc:
                raise DatasetFormatError(f"{fctx} field 'edges' invalid: {exc}") from exc
        if sum(label) != len(factors):
            raise DatasetFormatError(f"{ctx}: label weight {sum(label)} != {len(factors)} factors")
        samples.append(Sample(graph, np.asarray(label, dtype=np.int64), factors))

    splits = {}
    for name in ("train", "val", "test"):
        part = _require(splits_doc, name, "splits")
        if not isinstance(part, list):
            raise DatasetFormatError(f"splits field '{name}' must be a list")
        splits[name] = [int(i) for i in part]
    covered = sorted(splits["train"] + splits["val"] + splits["test"])
    if covered != list(range(len(samples))):
        raise DatasetFormatError("splits do not partition the sample indices")

    return Dataset(samples, int(n_factors), int(feature_dim), int(seed), splits)
