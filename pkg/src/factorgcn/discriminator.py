"""Structure discriminator that pushes the factor graphs apart.

Each factor graph is encoded by three rounds of the same degree-normalized
propagation used in the aggregation step, pooled into one vector, and
classified back to its factor index.  All factor graphs share the encoder
weights and the same input node features, so the classifier can only exploit
differences in structure.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .layers import FactorCoefficients
from .seeding import glorot_uniform
from .tensor import Tensor


def readout(node_feats: Tensor) -> Tensor:
    """Mean over nodes; a (1, F) graph-level vector, permutation invariant."""
    if node_feats.shape[0] == 0:
        raise ValueError("readout needs at least one node")
    return T.mean(node_feats, axis=0, keepdims=True)


class Discriminator:
    """Three propagation rounds, mean readout, and a one-layer classifier."""

    def __init__(self, feat_dim: int, n_factors: int, rng: np.random.Generator):
        self.feat_dim = feat_dim
        self.n_factors = n_factors
        self.prop_weights = [
            Tensor(glorot_uniform(rng, feat_dim, feat_dim, (feat_dim, feat_dim)), requires_grad=True)
            for _ in range(3)
        ]
        self.cls_weight = Tensor(
            glorot_uniform(rng, feat_dim, n_factors, (feat_dim, n_factors)), requires_grad=True
        )
        self.cls_bias = Tensor(np.zeros(n_factors), requires_grad=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        named = [(f"prop_{k}", w) for k, w in enumerate(self.prop_weights)]
        named += [("cls_weight", self.cls_weight), ("cls_bias", self.cls_bias)]
        return named

    def encode(self, coeffs: FactorCoefficients, factor: int, hidden: Tensor) -> Tensor:
        """Three propagation rounds over one factor graph, ReLU after each."""
        feats = hidden
        for w in self.prop_weights:
            feats = T.relu(T.matmul(coeffs.propagation_matrix(factor), T.matmul(feats, w)))
        return feats

    def factor_logits(self, coeffs: FactorCoefficients, factor: int, hidden: Tensor) -> Tensor:
        pooled = readout(self.encode(coeffs, factor, hidden))
        return T.add(T.matmul(pooled, self.cls_weight), self.cls_bias)

    def classify(self, coeffs: FactorCoefficients, factor: int, hidden: Tensor) -> Tensor:
        """Probability that the factor graph carries each factor index."""
        return T.softmax(self.factor_logits(coeffs, factor, hidden), axis=1)

    def loss(self, batch: list[tuple[FactorCoefficients, Tensor]]) -> Tensor:
        """Mean cross entropy over (input graph x factor graph) samples.

        Every factor graph of every batched input graph is one classification
        sample whose target class is its own factor index.
        """
        if not batch:
            raise ValueError("discriminator loss needs at least one graph")
        rows = []
        labels = []
        for coeffs, hidden in batch:
            for factor in range(self.n_factors):
                rows.append(self.factor_logits(coeffs, factor, hidden))
                labels.append(factor)
        stacked = T.concat(rows, axis=0)
        return T.cross_entropy(stacked, np.array(labels))
