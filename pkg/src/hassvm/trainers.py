"""Training entry points for every comparison method.

SRC, TAR and MIX share one code path (plain structured SVM from zero
initialization) and differ only in the data the caller passes. The
adaptive trainers anchor to a fixed source model and start the solver
there; by convexity the optimum is unchanged and the warm start shortens
the solve.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import DomainDataset, SourceModel, pool_datasets, predict_batch
from .errors import DegenerateProblemError, DimensionError, HassvmError
from .objective import AdaptiveObjective, HierarchicalObjective
from .solver import SolveOptions, SolveResult, minimize
from .tree import AdaptationTree, WeightStack, stack_unflatten

BASELINE_KINDS = ("SRC", "TAR", "MIX")
KINDS = BASELINE_KINDS + ("A-SSVM", "A-SSVM-ALL", "HA-SSVM")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted classifier: one weight vector, or a stack over a tree."""

    kind: str
    category_count: int
    feature_dim: int
    C: float
    weights: np.ndarray | None = None
    stack: WeightStack | None = None
    tree: AdaptationTree | None = None
    provenance: dict | None = None
    bias_appended: bool = False
    normalization: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise HassvmError(f"unknown model kind {self.kind!r}")
        if self.kind == "HA-SSVM":
            if self.stack is None or self.tree is None:
                raise HassvmError("HA-SSVM models carry a weight stack and tree")
        else:
            if self.weights is None or self.stack is not None:
                raise HassvmError(
                    f"{self.kind} models carry exactly one weight vector"
                )

    def node_weights(self, name: str) -> np.ndarray:
        if self.stack is None:
            raise HassvmError(f"{self.kind} model has no named nodes")
        if name not in self.stack.per_node:
            raise HassvmError(
                f"unknown node {name!r}; valid nodes: {list(self.stack.node_order)}"
            )
        return self.stack.per_node[name]

    def weights_for_domain(self, domain: str) -> np.ndarray:
        """The vector used to classify samples of a given target domain."""
        if self.stack is None:
            return self.weights
        leaf = self.tree.domain_leaves.get(domain)
        if leaf is None:
            raise HassvmError(
                f"no tree leaf for domain {domain!r}; leaves cover "
                f"{sorted(self.tree.domain_leaves)}"
            )
        return self.stack.per_node[leaf]

    def predict(self, features: np.ndarray, domain: str | None = None) -> np.ndarray:
        w = (self.weights if self.stack is None
             else self.weights_for_domain(domain))
        if w is None:
            raise HassvmError("tree models need a domain to predict for")
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return predict_batch(w, features, self.category_count)

    def to_source_model(self, bias_appended: bool = False,
                        normalization=None) -> SourceModel:
        if self.weights is None:
            raise HassvmError(
                "tree models cannot act as a source prior directly; "
                "extract a node slice first"
            )
        return SourceModel(
            weights=self.weights,
            feature_dim=self.feature_dim,
            category_count=self.category_count,
            bias_appended=bias_appended,
            normalization=normalization,
        )


def _as_dataset_list(data) -> list:
    if isinstance(data, DomainDataset):
        return [data]
    datasets = list(data)
    if not datasets:
        raise DimensionError("training requires at least one dataset")
    return datasets


def _solver_provenance(result: SolveResult, started: float) -> dict:
    return {
        "objective_value": result.value,
        "iterations": result.iterations,
        "status": result.status,
        "gradient_norm": result.gradient_norm,
        "wall_time_s": time.perf_counter() - started,
    }


_MAX_RESTARTS = 5


def _solve(objective, x0, opts: SolveOptions | None) -> SolveResult:
    """Minimize with deterministic stall-escape restarts.

    At points where many augmented argmaxes tie (notably the all-zero
    start), the reported subgradient can fail to be a descent direction
    and the line search gives up. A tiny nudge along the subgradient
    breaks the ties; re-solving from there keeps the better outcome. By
    convexity the optimum is unchanged and the whole procedure stays
    deterministic.
    """
    result = minimize(objective, x0, opts)
    for _ in range(_MAX_RESTARTS):
        if result.status != "line-search-failure":
            break
        value, gradient = objective(result.point)
        gnorm = float(np.linalg.norm(gradient))
        if gnorm == 0.0:
            break
        nudge = 1e-3 * max(1.0, float(np.linalg.norm(result.point))) / gnorm
        retry = minimize(objective, result.point - nudge * gradient, opts)
        if retry.value >= result.value:
            break
        result = retry
    return result


def train_ssvm(data, C: float, opts: SolveOptions | None = None,
               kind: str = "SRC") -> TrainedModel:
    """Plain structured SVM on the pooled data, from zero initialization.

    The same routine backs the SRC, TAR and MIX baselines; the caller
    chooses the data (source only, target only, or their union) and the
    reported kind.
    """
    if kind not in BASELINE_KINDS:
        raise HassvmError(
            f"train_ssvm produces one of {BASELINE_KINDS}, not {kind!r}"
        )
    datasets = _as_dataset_list(data)
    X, _ = pool_datasets(datasets)
    if X.shape[0] == 0:
        raise DimensionError("training data is empty")
    category_count = datasets[0].category_count
    feature_dim = datasets[0].feature_dim
    if category_count < 2:
        raise DegenerateProblemError("training requires at least two categories")

    zeros = np.zeros(category_count * feature_dim)
    objective = AdaptiveObjective(zeros, C, datasets)
    started = time.perf_counter()
    result = _solve(objective, zeros, opts)
    provenance = _solver_provenance(result, started)
    provenance["domains"] = [d.domain_id for d in datasets]
    provenance["sample_count"] = int(X.shape[0])
    return TrainedModel(kind=kind, category_count=category_count,
                        feature_dim=feature_dim, C=C, weights=result.point,
                        provenance=provenance)


def train_assvm(source: SourceModel, target_data, C: float,
                opts: SolveOptions | None = None,
                kind: str = "A-SSVM") -> TrainedModel:
    """Adapt the source model to the pooled target data (one-to-one)."""
    datasets = _as_dataset_list(target_data)
    if datasets[0].feature_dim != source.feature_dim or \
            datasets[0].category_count != source.category_count:
        raise DimensionError(
            f"source model is {source.category_count}x{source.feature_dim}, "
            f"data is {datasets[0].category_count}x{datasets[0].feature_dim}"
        )
    objective = AdaptiveObjective(source.weights, C, datasets)
    started = time.perf_counter()
    result = _solve(objective, source.weights, opts)
    provenance = _solver_provenance(result, started)
    provenance["domains"] = [d.domain_id for d in datasets]
    provenance["source_delta"] = result.point - source.weights
    return TrainedModel(kind=kind, category_count=source.category_count,
                        feature_dim=source.feature_dim, C=C,
                        weights=result.point, provenance=provenance,
                        bias_appended=source.bias_appended,
                        normalization=source.normalization)


def train_assvm_all(source: SourceModel, target_datasets, C: float,
                    opts: SolveOptions | None = None) -> TrainedModel:
    """Adapt the source model once to the union of all target domains."""
    datasets = _as_dataset_list(target_datasets)
    model = train_assvm(source, datasets, C, opts, kind="A-SSVM-ALL")
    return model


def train_hassvm(source: SourceModel, tree: AdaptationTree, datasets, C: float,
                 opts: SolveOptions | None = None,
                 node_loss_scale: dict | None = None) -> TrainedModel:
    """Jointly fit the whole adaptation tree, every node starting at the
    source weights. Domain predictions use the matching leaf slice; any
    node slice (e.g. the root) can be extracted for evaluation."""
    datasets = _as_dataset_list(datasets)
    objective = HierarchicalObjective(tree, source.weights, C, datasets,
                                      node_loss_scale)
    x0 = np.tile(source.weights, tree.node_count)
    started = time.perf_counter()
    result = _solve(objective, x0, opts)
    provenance = _solver_provenance(result, started)
    provenance["domains"] = [d.domain_id for d in datasets]
    stack = stack_unflatten(result.point, tree, objective.category_count,
                            objective.feature_dim)
    return TrainedModel(kind="HA-SSVM", category_count=objective.category_count,
                        feature_dim=objective.feature_dim, C=C, stack=stack,
                        tree=tree, provenance=provenance,
                        bias_appended=source.bias_appended,
                        normalization=source.normalization)
