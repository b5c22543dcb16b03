"""Dataset and model file formats.

Datasets are plain text, one sample per line: `domain_id,label,f1,...,fn`
with `#` starting a comment line. Models are a single JSON document with
fields version, K, n, bias_appended, normalization, tree and weights;
floats survive the round trip bit-exactly (shortest-repr encoding).
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import DomainDataset, Normalization, SourceModel
from .errors import DatasetParseError, DimensionError, ModelFormatError
from .tree import AdaptationTree, WeightStack, validate_tree

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class LoadedData:
    """Datasets plus the load-time metadata a model must reproduce."""

    datasets: list
    category_count: int
    feature_dim: int
    bias_appended: bool
    normalization: Normalization | None

    def dataset(self, domain_id: str) -> DomainDataset:
        for d in self.datasets:
            if d.domain_id == domain_id:
                return d
        raise DatasetParseError(f"no domain {domain_id!r} in loaded data")

    @property
    def domain_ids(self) -> list:
        return [d.domain_id for d in self.datasets]


def _parse_rows(path: str):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 3:
                raise DatasetParseError(
                    f"{path}:{lineno}: expected domain,label,features"
                )
            domain = parts[0]
            try:
                label = int(parts[1])
            except ValueError:
                raise DatasetParseError(
                    f"{path}:{lineno}: label {parts[1]!r} is not an integer"
                ) from None
            if label < 1:
                raise DatasetParseError(
                    f"{path}:{lineno}: label must be >= 1, got {label}"
                )
            try:
                features = [float(p) for p in parts[2:]]
            except ValueError:
                raise DatasetParseError(
                    f"{path}:{lineno}: non-numeric feature value"
                ) from None
            if not all(np.isfinite(features)):
                raise DatasetParseError(
                    f"{path}:{lineno}: feature values must be finite"
                )
            rows.append((lineno, domain, label, features))
    if not rows:
        raise DatasetParseError(f"{path}: no samples found")
    width = len(rows[0][3])
    for lineno, _, _, features in rows:
        if len(features) != width:
            raise DatasetParseError(
                f"{path}:{lineno}: row has {len(features)} features, "
                f"expected {width}"
            )
    return rows, width


def load_dataset(path: str, append_bias: bool = True, normalize: bool = False,
                 category_count: int | None = None) -> LoadedData:
    """Load a dataset file into one DomainDataset per distinct domain.

    The category count defaults to the largest label seen. With
    `normalize`, per-feature z-scoring is fitted on the loaded data and
    recorded; zero-variance features keep scale 1. With `append_bias`, a
    constant 1.0 feature is appended after normalization (its
    normalization entry is the identity).
    """
    rows, width = _parse_rows(path)
    labels = [label for _, _, label, _ in rows]
    inferred = max(labels)
    if category_count is None:
        category_count = inferred
    elif inferred > category_count:
        raise DatasetParseError(
            f"{path}: label {inferred} exceeds configured category count "
            f"{category_count}"
        )

    features = np.array([f for _, _, _, f in rows], dtype=np.float64)
    normalization = None
    if normalize:
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale[scale == 0.0] = 1.0
        features = (features - mean) / scale
        normalization = Normalization(mean=mean, scale=scale)
    if append_bias:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
        if normalization is not None:
            normalization = Normalization(
                mean=np.append(normalization.mean, 0.0),
                scale=np.append(normalization.scale, 1.0),
            )

    order = []
    by_domain = {}
    for i, (_, domain, label, _) in enumerate(rows):
        if domain not in by_domain:
            by_domain[domain] = []
            order.append(domain)
        by_domain[domain].append((features[i], label))

    datasets = []
    for domain in order:
        feats = np.vstack([f for f, _ in by_domain[domain]])
        labs = [l for _, l in by_domain[domain]]
        datasets.append(DomainDataset.from_arrays(domain, feats, labs,
                                                  category_count))
    return LoadedData(
        datasets=datasets,
        category_count=category_count,
        feature_dim=features.shape[1],
        bias_appended=append_bias,
        normalization=normalization,
    )


def apply_normalization(data: LoadedData,
                        normalization: Normalization | None) -> LoadedData:
    """Re-express raw-loaded data under a model's stored normalization.

    The data must have been loaded without `normalize`; the bias column,
    when present, is covered by the identity entries stored with the model.
    """
    if normalization is None:
        return data
    if data.normalization is not None:
        raise DimensionError(
            "data was already normalized at load time; load it raw instead"
        )
    if normalization.mean.shape[0] != data.feature_dim:
        raise DimensionError(
            f"normalization has {normalization.mean.shape[0]} entries, "
            f"data has {data.feature_dim} features"
        )
    datasets = []
    for d in data.datasets:
        feats = normalization.apply(d.feature_matrix)
        datasets.append(DomainDataset.from_arrays(
            d.domain_id, feats, d.labels, d.category_count))
    return LoadedData(
        datasets=datasets,
        category_count=data.category_count,
        feature_dim=data.feature_dim,
        bias_appended=data.bias_appended,
        normalization=normalization,
    )


def save_dataset(datasets, path: str) -> None:
    """Write datasets in the one-sample-per-line text format."""
    if isinstance(datasets, DomainDataset):
        datasets = [datasets]
    with open(path, "w", encoding="utf-8") as fh:
        for d in datasets:
            for s in d.samples:
                feats = ",".join(repr(v) for v in s.features.tolist())
                fh.write(f"{s.domain},{s.label},{feats}\n")


@dataclass(frozen=True, eq=False)
class LoadedModel:
    """A deserialized model file: one or more named weight vectors."""

    category_count: int
    feature_dim: int
    bias_appended: bool
    normalization: Normalization | None
    tree: AdaptationTree | None
    weights: dict  # name -> (K*n,) array

    @property
    def node_names(self) -> list:
        return list(self.weights)

    def single_weights(self) -> np.ndarray:
        if len(self.weights) != 1:
            raise ModelFormatError(
                "model holds multiple weight vectors; select a node "
                f"(one of {sorted(self.weights)})"
            )
        return next(iter(self.weights.values()))

    def node_weights(self, name: str) -> np.ndarray:
        if name not in self.weights:
            raise ModelFormatError(
                f"unknown node {name!r}; valid nodes: {sorted(self.weights)}"
            )
        return self.weights[name]

    def weights_for_domain(self, domain: str) -> np.ndarray:
        """Leaf slice for a domain on tree models, else the single vector."""
        if self.tree is None:
            return self.single_weights()
        leaf = self.tree.domain_leaves.get(domain)
        if leaf is None:
            raise ModelFormatError(
                f"no tree leaf for domain {domain!r}; leaves cover "
                f"{sorted(self.tree.domain_leaves)}"
            )
        return self.weights[leaf]

    def to_source_model(self, node: str | None = None) -> SourceModel:
        w = self.node_weights(node) if node is not None else self.single_weights()
        return SourceModel(
            weights=w,
            feature_dim=self.feature_dim,
            category_count=self.category_count,
            bias_appended=self.bias_appended,
            normalization=self.normalization,
        )


def _normalization_to_payload(norm: Normalization | None):
    if norm is None:
        return None
    return {"mean": norm.mean.tolist(), "scale": norm.scale.tolist()}


def _normalization_from_payload(payload) -> Normalization | None:
    if payload is None:
        return None
    try:
        return Normalization(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            scale=np.asarray(payload["scale"], dtype=np.float64),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupted normalization payload: {exc}") from None


def save_model(model, path: str, *, tree: AdaptationTree | None = None,
               category_count: int | None = None,
               feature_dim: int | None = None) -> None:
    """Serialize a model to JSON.

    Accepts a SourceModel, a trained model (single weights, or a weight
    stack plus tree), or a bare WeightStack together with explicit `tree`,
    `category_count` and `feature_dim` keywords.
    """
    normalization = getattr(model, "normalization", None)
    bias_appended = bool(getattr(model, "bias_appended", False))

    if isinstance(model, WeightStack):
        stack = model
    else:
        stack = getattr(model, "stack", None)
        tree = tree or getattr(model, "tree", None)

    if stack is not None:
        if tree is None:
            raise ModelFormatError("saving a weight stack requires its tree")
        weights = {name: stack.per_node[name] for name in stack.node_order}
    else:
        weights = {"model": np.asarray(model.weights, dtype=np.float64)}

    category_count = category_count or getattr(model, "category_count", None)
    feature_dim = feature_dim or getattr(model, "feature_dim", None)
    if category_count is None or feature_dim is None:
        raise ModelFormatError(
            "category_count and feature_dim are required to save this model"
        )
    slice_len = next(iter(weights.values())).shape[0]
    if slice_len != category_count * feature_dim:
        raise ModelFormatError(
            f"weight length {slice_len} does not equal "
            f"{category_count} categories x {feature_dim} features"
        )

    payload = {
        "version": MODEL_FORMAT_VERSION,
        "K": int(category_count),
        "n": int(feature_dim),
        "bias_appended": bias_appended,
        "normalization": _normalization_to_payload(normalization),
        "tree": tree.to_dict() if tree is not None else None,
        "weights": {name: w.tolist() for name, w in weights.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path: str) -> LoadedModel:
    """Deserialize a model file, rejecting unknown versions."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupted model file: {exc}") from None
    if not isinstance(payload, dict):
        raise ModelFormatError(f"{path}: corrupted model file: not an object")
    version = payload.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported model format version {version!r} "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        category_count = int(payload["K"])
        feature_dim = int(payload["n"])
        bias_appended = bool(payload["bias_appended"])
        weights_raw = payload["weights"]
        tree_raw = payload["tree"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: corrupted model file: {exc}") from None

    expected = category_count * feature_dim
    weights = {}
    for name, values in weights_raw.items():
        w = np.asarray(values, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != expected:
            raise ModelFormatError(
                f"{path}: weight vector {name!r} has length {w.size}, "
                f"expected {expected}"
            )
        weights[name] = w

    adaptation_tree = validate_tree(tree_raw) if tree_raw is not None else None
    if adaptation_tree is not None:
        if set(adaptation_tree.node_order) != set(weights):
            raise ModelFormatError(
                f"{path}: tree nodes and weight names disagree"
            )
    return LoadedModel(
        category_count=category_count,
        feature_dim=feature_dim,
        bias_appended=bias_appended,
        normalization=_normalization_from_payload(payload.get("normalization")),
        tree=adaptation_tree,
        weights=weights,
    )


def load_tree_config(path: str) -> AdaptationTree:
    """Read a tree description file ({"root": {...}} JSON)."""
    if not os.path.exists(path):
        raise ModelFormatError(f"tree config {path!r} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid tree config: {exc}") from None
    return validate_tree(payload)
