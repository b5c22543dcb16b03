"""Structured hinge loss and the adaptive / hierarchical objectives.

The loss on a dataset is the multiclass structured hinge with 0-1 label
cost: for each sample, max over categories of (score + [wrong label])
minus the true category's score, summed over samples without averaging.

The hierarchical objective anchors each tree node to its parent (the root
to the fixed source weights) with a quadratic penalty and charges every
node the hinge loss of all leaf datasets below it:

    J(w) = sum_nodes [ 0.5 * ||w_node - w_anchor||^2
                       + C * sum_{leaf under node} hinge(w_node; leaf data) ]

With a single-node tree this reduces to the one-to-one adaptive objective
0.5 * ||w - w_src||^2 + C * hinge(w; data), and with zero source weights
that in turn is the plain structured SVM objective.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DomainDataset, LabeledSample, category_scores, pool_datasets
from .errors import DimensionError, TreeValidationError
from .tree import AdaptationTree, WeightStack, stack_flatten

__all__ = [
    "LossReport",
    "ObjectiveReport",
    "loss_augmented_argmax",
    "structured_hinge",
    "assvm_objective",
    "hassvm_objective",
    "AdaptiveObjective",
    "HierarchicalObjective",
]


@dataclass(frozen=True, eq=False)
class LossReport:
    """Hinge loss value, its subgradient, and the count of violated margins."""

    value: float
    subgradient: np.ndarray
    violations: int


@dataclass(frozen=True, eq=False)
class ObjectiveReport:
    """Hierarchical objective value with per-node breakdown.

    Satisfies value == sum(per_node_reg) + C * sum(per_node_loss) exactly,
    because that is how the value is computed.
    """

    value: float
    gradient: np.ndarray
    per_node_loss: dict
    per_node_reg: dict


def loss_augmented_argmax(w, sample: LabeledSample,
                          category_count: int) -> tuple[int, float]:
    """Most violating category for one sample, with its augmented score.

    Maximizes score(w, x, y) + [y != sample.label] over categories; ties
    break toward the lowest category index.
    """
    scores = category_scores(w, sample.features)
    if scores.shape[0] != category_count:
        raise DimensionError(
            f"weights encode {scores.shape[0]} categories, expected {category_count}"
        )
    augmented = scores + 1.0
    augmented[sample.label - 1] -= 1.0
    best = int(np.argmax(augmented))
    return best + 1, float(augmented[best])


def _hinge_on_matrix(w: np.ndarray, X: np.ndarray, y: np.ndarray,
                     category_count: int) -> tuple[float, np.ndarray, int]:
    """Vectorized hinge over a feature matrix; returns (value, grad, violations).

    The subgradient at ties uses the lowest-index augmented argmax, which
    is what np.argmax yields.
    """
    n = X.shape[1]
    if w.shape[0] != category_count * n:
        raise DimensionError(
            f"weight length {w.shape[0]} does not match "
            f"{category_count} categories x {n} features"
        )
    if X.shape[0] == 0:
        return 0.0, np.zeros_like(w), 0
    rows = np.arange(X.shape[0])
    truth = y - 1
    scores = X @ w.reshape(category_count, n).T
    augmented = scores + 1.0
    augmented[rows, truth] -= 1.0
    worst = np.argmax(augmented, axis=1)
    hinges = augmented[rows, worst] - scores[rows, truth]
    # Rows with worst == truth cancel to zero in the coefficient matrix.
    coeff = np.zeros_like(scores)
    coeff[rows, worst] += 1.0
    coeff[rows, truth] -= 1.0
    grad = (coeff.T @ X).ravel()
    return float(np.sum(hinges)), grad, int(np.count_nonzero(hinges > 0.0))


def structured_hinge(w, data) -> LossReport:
    """Summed structured hinge loss of one or more datasets.

    Empty data yields a zero report rather than an error.
    """
    w = np.asarray(w, dtype=np.float64)
    if isinstance(data, DomainDataset):
        datasets = [data]
    else:
        datasets = list(data)
    if not datasets:
        return LossReport(0.0, np.zeros_like(w), 0)
    X, y = pool_datasets(datasets)
    category_count = datasets[0].category_count
    value, grad, violations = _hinge_on_matrix(w, X, y, category_count)
    return LossReport(value, grad, violations)


def assvm_objective(w, source_weights, C: float, data) -> tuple[float, np.ndarray]:
    """Value and subgradient of 0.5*||w - w_src||^2 + C * hinge(w; data)."""
    w = np.asarray(w, dtype=np.float64)
    source_weights = np.asarray(source_weights, dtype=np.float64)
    if w.shape != source_weights.shape:
        raise DimensionError(
            f"weights ({w.shape}) and source weights ({source_weights.shape}) "
            "differ in shape"
        )
    delta = w - source_weights
    loss = structured_hinge(w, data)
    value = 0.5 * float(delta @ delta) + C * loss.value
    gradient = delta + C * loss.subgradient
    return value, gradient


class AdaptiveObjective:
    """Prepared single-model objective for repeated solver evaluations."""

    def __init__(self, source_weights, C: float, data):
        self.source_weights = np.asarray(source_weights, dtype=np.float64)
        self.C = float(C)
        if isinstance(data, DomainDataset):
            data = [data]
        self.datasets = list(data)
        self.X, self.y = pool_datasets(self.datasets)
        self.category_count = self.datasets[0].category_count
        expected = self.category_count * self.X.shape[1]
        if self.source_weights.shape[0] != expected:
            raise DimensionError(
                f"source weight length {self.source_weights.shape[0]} does not "
                f"match data ({expected})"
            )

    def __call__(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        delta = w - self.source_weights
        value, grad, _ = _hinge_on_matrix(w, self.X, self.y, self.category_count)
        return 0.5 * float(delta @ delta) + self.C * value, delta + self.C * grad


class HierarchicalObjective:
    """Prepared tree objective: per-node data is stacked once up front.

    `node_loss_scale` optionally rescales the loss weight of individual
    nodes (all 1.0 by default, matching a single global C).
    """

    def __init__(self, tree: AdaptationTree, source_weights, C: float,
                 datasets: Sequence[DomainDataset],
                 node_loss_scale: dict | None = None):
        self.tree = tree
        self.source_weights = np.asarray(source_weights, dtype=np.float64)
        self.C = float(C)
        by_domain = {}
        for d in datasets:
            if d.domain_id in by_domain:
                raise TreeValidationError(
                    f"more than one dataset for domain {d.domain_id!r}"
                )
            by_domain[d.domain_id] = d
        known = set(tree.domain_leaves)
        for domain in by_domain:
            if domain not in known:
                raise TreeValidationError(
                    f"dataset for domain {domain!r} matches no tree leaf"
                )
        missing = [d for d in known if d not in by_domain]
        if missing:
            raise TreeValidationError(
                f"no dataset for leaf domain(s) {sorted(missing)}"
            )

        sample = next(iter(by_domain.values()))
        self.category_count = sample.category_count
        self.feature_dim = sample.feature_dim
        self.slice_len = self.category_count * self.feature_dim
        if self.source_weights.shape[0] != self.slice_len:
            raise DimensionError(
                f"source weight length {self.source_weights.shape[0]} does not "
                f"match {self.category_count} categories x "
                f"{self.feature_dim} features"
            )
        scale = dict(node_loss_scale or {})
        unknown = set(scale) - set(tree.node_order)
        if unknown:
            raise TreeValidationError(
                f"loss scale given for unknown node(s) {sorted(unknown)}"
            )
        self.node_loss_scale = {
            name: float(scale.get(name, 1.0)) for name in tree.node_order
        }
        # Per node: features and labels of every leaf dataset below it.
        self._node_data = {}
        for name in tree.node_order:
            leaves = [by_domain[dom] for dom in tree.descendant_domains[name]]
            self._node_data[name] = pool_datasets(leaves)
        self._index = {name: i for i, name in enumerate(tree.node_order)}

    @property
    def dimension(self) -> int:
        return self.tree.node_count * self.slice_len

    def _slice(self, flat: np.ndarray, name: str) -> np.ndarray:
        i = self._index[name]
        return flat[i * self.slice_len:(i + 1) * self.slice_len]

    def report(self, flat: np.ndarray) -> ObjectiveReport:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape[0] != self.dimension:
            raise DimensionError(
                f"stack has length {flat.shape[0]}, expected {self.dimension}"
            )
        tree = self.tree
        gradient = np.zeros_like(flat)
        per_node_loss = {}
        per_node_reg = {}
        for name in tree.node_order:
            w = self._slice(flat, name)
            parent = tree.parent[name]
            anchor = (self.source_weights if parent is None
                      else self._slice(flat, parent))
            delta = w - anchor
            per_node_reg[name] = 0.5 * float(delta @ delta)

            X, y = self._node_data[name]
            loss, loss_grad, _ = _hinge_on_matrix(w, X, y, self.category_count)
            scale = self.node_loss_scale[name]
            per_node_loss[name] = scale * loss

            i = self._index[name]
            seg = slice(i * self.slice_len, (i + 1) * self.slice_len)
            gradient[seg] += delta + self.C * scale * loss_grad
            if parent is not None:
                j = self._index[parent]
                pseg = slice(j * self.slice_len, (j + 1) * self.slice_len)
                gradient[pseg] -= delta
        value = sum(per_node_reg.values()) + self.C * sum(per_node_loss.values())
        return ObjectiveReport(value=value, gradient=gradient,
                               per_node_loss=per_node_loss,
                               per_node_reg=per_node_reg)

    def __call__(self, flat: np.ndarray) -> tuple[float, np.ndarray]:
        rep = self.report(flat)
        return rep.value, rep.gradient


def hassvm_objective(stack: WeightStack, tree: AdaptationTree, source_weights,
                     C: float, datasets: Sequence[DomainDataset],
                     node_loss_scale: dict | None = None) -> ObjectiveReport:
    """One-shot evaluation of the hierarchical objective at a weight stack."""
    objective = HierarchicalObjective(tree, source_weights, C, datasets,
                                      node_loss_scale)
    return objective.report(stack_flatten(stack))
