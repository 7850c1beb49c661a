"""Disentanglement and task metrics.

The edge-restricted edit distance compares a binarized factor graph against a
ground-truth edge set after equalizing edge counts, a minimum-cost bipartite
assignment matches generated factors to ground truths, and the consistency
score measures how stable those matches are across a test split.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .graphs import FactorGroundTruth

Edge = tuple[int, int]


def symmetrize_coefficients(arcs: np.ndarray, values: np.ndarray) -> dict[Edge, float]:
    """Average each arc with its reverse, keyed by the undirected pair (i < j)."""
    by_arc = {(int(i), int(j)): float(v) for (i, j), v in zip(arcs, values)}
    out: dict[Edge, float] = {}
    for (i, j), v in by_arc.items():
        if i < j:
            out[(i, j)] = (v + by_arc.get((j, i), v)) / 2.0
    return out


def binarize_to_count(edge_values: dict[Edge, float], count: int) -> set[Edge]:
    """Keep the ``count`` highest-valued undirected edges.

    Ties break toward the lexicographically smaller pair so the result is
    stable across runs.
    """
    if count > len(edge_values):
        raise ValueError(f"cannot keep {count} edges, only {len(edge_values)} candidates")
    ranked = sorted(edge_values.items(), key=lambda kv: (-kv[1], kv[0]))
    return {edge for edge, _ in ranked[:count]}


def ged_edges(edge_values: dict[Edge, float], truth: set[Edge]) -> int:
    """Edit distance restricted to edge flips, after equalizing edge counts.

    Both sides end up with |truth| edges, so the distance is the size of the
    symmetric difference: always even and at most 2 |truth|.
    """
    kept = binarize_to_count(edge_values, len(truth))
    return len(kept ^ truth)


def hungarian(cost: np.ndarray) -> tuple[dict[int, int], float]:
    """Minimum-cost assignment of every column to a distinct row.

    Requires a finite, non-negative cost matrix.  Rectangular inputs are
    padded to square with zero-cost dummies, which are stripped from the
    returned mapping {column: row}.  O(n^3) shortest-augmenting-path scheme
    with row/column potentials.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("costs must be finite and non-negative")
    rows, cols = cost.shape
    n = max(rows, cols)
    padded = np.zeros((n, n))
    padded[:rows, :cols] = cost

    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    row_of = [0] * (n + 1)  # row_of[j]: row currently assigned to column j (1-based)
    prev_col = [0] * (n + 1)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        min_slack = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = padded[i0 - 1][j - 1] - u[i0] - v[j]
                    if cur < min_slack[j]:
                        min_slack[j] = cur
                        prev_col[j] = j0
                    if min_slack[j] < delta:
                        delta = min_slack[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[row_of[j]] += delta
                    v[j] -= delta
                else:
                    min_slack[j] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0:
            j1 = prev_col[j0]
            row_of[j0] = row_of[j1]
            j0 = j1

    assignment = {}
    total = 0.0
    for j in range(1, n + 1):
        col, row = j - 1, row_of[j] - 1
        if col < cols and row < rows:
            assignment[col] = row
            total += float(cost[row, col])
    return assignment, total


@dataclass
class MatchResult:
    """Best assignment of one sample's ground truths to generated factors."""

    assignment: dict[str, int]  # ground-truth kind -> factor index
    pair_costs: dict[str, int]
    total: int


def match_factors(
    arcs: np.ndarray,
    values: np.ndarray,
    truths: list[FactorGroundTruth],
) -> MatchResult:
    """Score every (factor, truth) pair by edit distance and match optimally.

    ``values`` is (num_arcs, n_factors); the per-sample score is the sum of
    matched pair costs.
    """
    if not truths:
        raise ValueError("need at least one ground-truth factor")
    n_factors = values.shape[1]
    cost = np.zeros((n_factors, len(truths)))
    for e in range(n_factors):
        edge_values = symmetrize_coefficients(arcs, values[:, e])
        for t, truth in enumerate(truths):
            cost[e, t] = ged_edges(edge_values, set(truth.edges))
    assignment, total = hungarian(cost)
    by_kind = {truths[t].kind: factor for t, factor in assignment.items()}
    pair_costs = {truths[t].kind: int(cost[factor, t]) for t, factor in assignment.items()}
    return MatchResult(by_kind, pair_costs, int(total))


def c_score(matches: list[MatchResult], n_factors: int) -> float:
    """Mean, over ground-truth kinds, of how often each kind hits its modal factor."""
    if not matches:
        raise ValueError("need at least one match result")
    counts: dict[str, dict[int, int]] = {}
    for m in matches:
        for kind, factor in m.assignment.items():
            if not 0 <= factor < n_factors:
                raise ValueError(f"matched factor index {factor} out of range [0, {n_factors})")
            counts.setdefault(kind, {})
            counts[kind][factor] = counts[kind].get(factor, 0) + 1
    freqs = []
    for kind_counts in counts.values():
        total = sum(kind_counts.values())
        freqs.append(max(kind_counts.values()) / total)
    return float(np.mean(freqs))


def match_histograms(matches: list[MatchResult], n_factors: int) -> dict[str, list[int]]:
    """Per-kind counts of which factor index the kind was matched to."""
    hist: dict[str, list[int]] = {}
    for m in matches:
        for kind, factor in m.assignment.items():
            hist.setdefault(kind, [0] * n_factors)
            hist[kind][factor] += 1
    return hist


def micro_f1(pred: np.ndarray, target: np.ndarray, threshold: float = 0.5) -> float:
    """F1 from TP/FP/FN pooled across every label of a multi-label task."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    hard = pred >= threshold
    truth = target > 0
    tp = int(np.sum(hard & truth))
    fp = int(np.sum(hard & ~truth))
    fn = int(np.sum(~hard & truth))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def mae(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean absolute error."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.abs(pred - target).mean())


def feature_correlation(features: np.ndarray) -> np.ndarray:
    """Absolute Pearson correlation between feature dimensions.

    ``features`` is (samples, dims) with samples >= 2.  Zero-variance
    dimensions produce zero rows/columns with a unit diagonal.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two samples")
    centered = features - features.mean(axis=0)
    std = centered.std(axis=0)
    live = std > 0
    corr = np.zeros((features.shape[1], features.shape[1]))
    if np.any(live):
        normed = centered[:, live] / std[live]
        block = np.abs(normed.T @ normed / features.shape[0])
        np.clip(block, 0.0, 1.0, out=block)
        corr[np.ix_(live, live)] = block
    np.fill_diagonal(corr, 1.0)
    return corr


def save_correlation_csv(matrix: np.ndarray, path) -> None:
    """Write the matrix as plain CSV, one row per dimension, six decimals."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([f"{v:.6f}" for v in row])


def load_correlation_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh)])


@dataclass
class MetricsReport:
    """Evaluation summary over one split.

    Disentanglement fields are ``None`` for models that expose no factor
    coefficients (the MLP and plain GCN baselines).
    """

    micro_f1: float | None
    ged_mean: float | None
    ged_std: float | None
    c_score: float | None
    n_samples: int
    n_factors: int
    per_sample: list[MatchResult] = field(default_factory=list)
    histograms: dict[str, list[int]] = field(default_factory=dict)
    mae: float | None = None

    def to_dict(self) -> dict:
        doc = {
            "micro_f1": self.micro_f1,
            "ged_e": {"mean": self.ged_mean, "std": self.ged_std},
            "c_score": self.c_score,
            "n_samples": self.n_samples,
            "n_factors": self.n_factors,
            "match_histograms": self.histograms,
            "matches": [
                {"assignment": m.assignment, "pair_costs": m.pair_costs, "total": m.total}
                for m in self.per_sample
            ],
        }
        if self.mae is not None:
            doc["mae"] = self.mae
        return doc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
