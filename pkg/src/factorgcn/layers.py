"""Disentangle layer: factor scoring, per-factor aggregation, and merging.

One layer transforms node features once, scores every directed arc against
each factor with a per-factor affine map squashed through a sigmoid, runs a
degree-normalized aggregation independently per factor, and concatenates the
per-factor features block-wise.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .graphs import Graph
from .seeding import glorot_uniform
from .tensor import Tensor

_ACTIVATIONS = ("relu", "identity")


class FactorCoefficients:
    """Per-arc, per-factor coefficients of one layer applied to one graph.

    ``values`` is an (m, n_factors) tensor of sigmoid outputs, row k scoring
    arc ``arcs[k]``.  The coefficient for arc (i, j) and its reverse (j, i)
    are independent values; metrics symmetrize them later.
    """

    def __init__(
        self,
        arcs: np.ndarray,
        values: Tensor,
        num_nodes: int,
        inv_norm: np.ndarray,
        hidden: Tensor | None = None,
    ):
        self.arcs = arcs
        self.values = values
        self.num_nodes = num_nodes
        self.inv_norm = inv_norm  # per-arc 1 / sqrt(deg_i * deg_j)
        self.hidden = hidden  # transformed node features the coefficients were scored from
        self._adjacency: dict[int, Tensor] = {}

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]

    def factor_values(self, factor: int) -> np.ndarray:
        """Detached coefficient vector for one factor (metrics input)."""
        return self.values.data[:, factor]

    def propagation_matrix(self, factor: int) -> Tensor:
        """Dense matrix M with M[i, j] = coeff(i, j) / sqrt(deg_i * deg_j).

        Memoized per factor so the aggregation step and any later consumer
        share one tape node.
        """
        if factor not in self._adjacency:
            column = T.reshape(T.narrow(self.values, 1, factor, 1), (-1,))
            self._adjacency[factor] = T.arc_matrix(
                column, self.arcs, self.inv_norm, self.num_nodes
            )
        return self._adjacency[factor]


def arc_inv_norm(arcs: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    """Per-arc normalization 1 / sqrt(deg_i * deg_j) from undirected degrees."""
    if arcs.shape[0] == 0:
        return np.zeros(0)
    d = degrees.astype(np.float64)
    return 1.0 / np.sqrt(d[arcs[:, 0]] * d[arcs[:, 1]])


def aggregate(
    hidden: Tensor,
    coeffs: FactorCoefficients,
    factor: int,
    activation: str = "relu",
) -> Tensor:
    """Weighted-neighbor sum for one factor graph, then the activation.

    Node i receives sum_j coeff(i, j) / sqrt(deg_i * deg_j) * hidden_j over
    its input-graph neighbors; isolated nodes receive the zero vector.
    """
    out = T.matmul(coeffs.propagation_matrix(factor), hidden)
    if activation == "relu":
        return T.relu(out)
    if activation == "identity":
        return out
    raise ValueError(f"unknown activation {activation!r}, expected one of {_ACTIVATIONS}")


def merge(parts: list[Tensor]) -> Tensor:
    """Concatenate per-factor node features block-wise in factor order."""
    if len(parts) == 1:
        return parts[0]
    return T.concat(parts, axis=1)


class DisentangleLayer:
    """One disentangling block: transform, score arcs per factor, aggregate, merge.

    Parameters:
        weight: (in_dim, out_dim) shared transform; the transformed features
            feed the arc scorer, every factor's aggregation, and any
            downstream head.
        score_weight: (2 * out_dim, n_factors); column e scores the
            concatenated endpoint features of an arc for factor e.
        score_bias: (n_factors,), initialized to zero.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        n_factors: int,
        rng: np.random.Generator,
        activation: str = "relu",
    ):
        if n_factors < 1:
            raise ValueError("need at least one factor")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}, expected one of {_ACTIVATIONS}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.n_factors = n_factors
        self.activation = activation
        self.weight = Tensor(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)), requires_grad=True)
        self.score_weight = Tensor(
            glorot_uniform(rng, 2 * out_dim, 1, (2 * out_dim, n_factors)), requires_grad=True
        )
        self.score_bias = Tensor(np.zeros(n_factors), requires_grad=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [
            ("weight", self.weight),
            ("score_weight", self.score_weight),
            ("score_bias", self.score_bias),
        ]

    def transform(self, feats: Tensor) -> Tensor:
        """Shared linear transform of the node features."""
        return T.matmul(feats, self.weight)

    def disentangle(self, hidden: Tensor, graph: Graph) -> FactorCoefficients:
        """Score every arc against every factor; each score lands in (0, 1)."""
        arcs = graph.arcs
        inv_norm = arc_inv_norm(arcs, graph.degrees)
        if arcs.shape[0] == 0:
            empty = Tensor(np.zeros((0, self.n_factors)))
            return FactorCoefficients(arcs, empty, graph.num_nodes, inv_norm, hidden)
        src = T.gather_rows(hidden, arcs[:, 0])
        dst = T.gather_rows(hidden, arcs[:, 1])
        pair = T.concat([src, dst], axis=1)
        scores = T.add(T.matmul(pair, self.score_weight), self.score_bias)
        return FactorCoefficients(arcs, T.sigmoid(scores), graph.num_nodes, inv_norm, hidden)

    def forward(self, feats: Tensor, graph: Graph) -> tuple[Tensor, FactorCoefficients]:
        """Full layer pass; returns merged features and the factor coefficients."""
        hidden = self.transform(feats)
        coeffs = self.disentangle(hidden, graph)
        parts = [aggregate(hidden, coeffs, e, self.activation) for e in range(self.n_factors)]
        return merge(parts), coeffs
