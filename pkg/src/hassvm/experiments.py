"""Evaluation protocol: per-category splits, repeated training runs,
accuracy aggregation, a synthetic hierarchical domain-shift generator,
and the latent-domain plumbing (pseudo-labels, clustering, assignment
files).
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    DomainDataset,
    LabeledSample,
    SourceModel,
    predict_batch,
)
from .errors import ConfigError, DatasetParseError, DimensionError, ProtocolError
from .solver import SolveOptions
from .trainers import (
    KINDS,
    TrainedModel,
    train_assvm,
    train_assvm_all,
    train_hassvm,
    train_ssvm,
)
from .tree import AdaptationTree, TreeNode, validate_tree

ADAPTIVE_KINDS = ("A-SSVM", "A-SSVM-ALL", "HA-SSVM")


@dataclass(frozen=True)
class SplitProtocol:
    """How many samples to draw per category, and how often to repeat."""

    source_per_category: int
    target_per_category: int
    repetitions: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.source_per_category < 1 or self.target_per_category < 1:
            raise ProtocolError("per-category sample counts must be >= 1")
        if self.repetitions < 1:
            raise ProtocolError("repetitions must be >= 1")


@dataclass(frozen=True, eq=False)
class RepetitionSplit:
    """One repetition's training draws and held-out test sets."""

    repetition: int
    source_train: DomainDataset
    source_test: DomainDataset
    target_train: dict   # domain -> DomainDataset
    target_test: dict    # domain -> DomainDataset
    deficiencies: tuple = ()


def _draw_per_category(dataset: DomainDataset, per_category: int,
                       rng: np.random.Generator, on_insufficient: str):
    """Sorted row indices of a without-replacement per-category draw."""
    labels = dataset.labels
    chosen = []
    deficiencies = []
    for category in range(1, dataset.category_count + 1):
        cell = np.flatnonzero(labels == category)
        if cell.size < per_category:
            if on_insufficient == "error":
                raise ProtocolError(
                    f"domain {dataset.domain_id!r} category {category} has "
                    f"{cell.size} samples, protocol needs {per_category}"
                )
            deficiencies.append(
                f"domain {dataset.domain_id!r} category {category}: "
                f"{cell.size} of {per_category} samples"
            )
            if cell.size == 0:
                continue
        take = min(per_category, cell.size)
        picked = rng.choice(cell.size, size=take, replace=False)
        chosen.extend(cell[picked].tolist())
    return np.sort(np.array(chosen, dtype=np.int64)), deficiencies


def _subset(dataset: DomainDataset, indices: np.ndarray) -> DomainDataset:
    samples = tuple(dataset.samples[i] for i in indices)
    return DomainDataset(dataset.domain_id, samples, dataset.feature_dim,
                         dataset.category_count)


def make_splits(source: DomainDataset, targets, protocol: SplitProtocol,
                on_insufficient: str = "error") -> list:
    """Per-repetition source/target draws, deterministic in the seed.

    Repetition r draws with seed protocol.seed + r. Target test sets are
    the samples not drawn for training, so train and test partition each
    target domain. With on_insufficient="take-available", short or absent
    (domain, category) cells are drawn as far as possible and recorded as
    deficiencies instead of raising.
    """
    if on_insufficient not in ("error", "take-available"):
        raise ProtocolError(
            f"on_insufficient must be 'error' or 'take-available', "
            f"got {on_insufficient!r}"
        )
    targets = list(targets)
    splits = []
    for rep in range(protocol.repetitions):
        rng = np.random.default_rng(protocol.seed + rep)
        deficiencies = []
        src_idx, defs = _draw_per_category(
            source, protocol.source_per_category, rng, on_insufficient)
        deficiencies.extend(defs)
        src_mask = np.zeros(len(source), dtype=bool)
        src_mask[src_idx] = True
        target_train = {}
        target_test = {}
        for dataset in targets:
            idx, defs = _draw_per_category(
                dataset, protocol.target_per_category, rng, on_insufficient)
            deficiencies.extend(defs)
            mask = np.zeros(len(dataset), dtype=bool)
            mask[idx] = True
            target_train[dataset.domain_id] = _subset(dataset, idx)
            target_test[dataset.domain_id] = _subset(
                dataset, np.flatnonzero(~mask))
        splits.append(RepetitionSplit(
            repetition=rep,
            source_train=_subset(source, src_idx),
            source_test=_subset(source, np.flatnonzero(~src_mask)),
            target_train=target_train,
            target_test=target_test,
            deficiencies=tuple(deficiencies),
        ))
    return splits


def accuracy(weights, test) -> float:
    """Fraction of samples whose predicted category equals the label."""
    if isinstance(test, DomainDataset):
        features, labels = test.feature_matrix, test.labels
    else:
        samples = list(test)
        if not samples:
            raise ProtocolError("accuracy needs a non-empty test set")
        features = np.vstack([s.features for s in samples])
        labels = np.array([s.label for s in samples], dtype=np.int64)
    if features.shape[0] == 0:
        raise ProtocolError("accuracy needs a non-empty test set")
    weights = np.asarray(weights, dtype=np.float64)
    category_count = weights.shape[0] // features.shape[1]
    predicted = predict_batch(weights, features, category_count)
    return float(np.mean(predicted == labels))


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Mean and standard deviation of accuracy per method and domain."""

    methods: tuple
    domains: tuple
    means: dict    # method -> domain -> float
    stds: dict
    values: dict   # method -> domain -> list over repetitions
    config: dict
    seeds: tuple
    deficiencies: tuple = ()

    def table(self) -> str:
        """Tab-separated table; cells are percent 'mean±std' to 1 decimal."""
        lines = ["method\t" + "\t".join(self.domains)]
        for method in self.methods:
            cells = [
                f"{100 * self.means[method][d]:.1f}"
                f"±{100 * self.stds[method][d]:.1f}"
                for d in self.domains
            ]
            lines.append(method + "\t" + "\t".join(cells))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seeds": list(self.seeds),
            "methods": list(self.methods),
            "domains": list(self.domains),
            "means": {m: dict(self.means[m]) for m in self.methods},
            "stds": {m: dict(self.stds[m]) for m in self.methods},
            "values": {m: {d: list(v) for d, v in self.values[m].items()}
                       for m in self.methods},
            "deficiencies": list(self.deficiencies),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def average(self, method: str) -> float:
        """Mean accuracy of a method across all target domains."""
        return float(np.mean([self.means[method][d] for d in self.domains]))


def default_tree(target_domains) -> AdaptationTree:
    """Two-layer tree: one root, one leaf per target domain."""
    leaves = tuple(TreeNode(name=d, domain=d) for d in target_domains)
    if len(leaves) == 1:
        return validate_tree(leaves[0])
    return validate_tree(TreeNode(name="root", children=leaves))


def _validate_methods(methods) -> tuple:
    methods = tuple(methods)
    for m in methods:
        if m not in KINDS:
            raise ConfigError(
                f"unknown method name {m!r}; valid methods: {', '.join(KINDS)}"
            )
    if not methods:
        raise ConfigError("at least one method is required")
    return methods


def evaluate_split(split: RepetitionSplit, methods, tree: AdaptationTree | None,
                   C: float, opts: SolveOptions | None = None) -> dict:
    """Train every requested method on one split; accuracy per domain.

    All methods consume identical training draws. The source prior for the
    adaptive methods is the SRC baseline trained on this split's source
    draw.
    """
    domains = list(split.target_train)
    out = {m: {} for m in methods}
    need_source = any(m in ("SRC", "MIX") or m in ADAPTIVE_KINDS
                      for m in methods)
    source_prior = None
    src_model = None
    if need_source:
        src_model = train_ssvm(split.source_train, C, opts, kind="SRC")
        source_prior = src_model.to_source_model()

    if "SRC" in out:
        for d in domains:
            out["SRC"][d] = accuracy(src_model.weights, split.target_test[d])
    if "TAR" in out:
        for d in domains:
            model = train_ssvm(split.target_train[d], C, opts, kind="TAR")
            out["TAR"][d] = accuracy(model.weights, split.target_test[d])
    if "MIX" in out:
        for d in domains:
            model = train_ssvm([split.source_train, split.target_train[d]],
                               C, opts, kind="MIX")
            out["MIX"][d] = accuracy(model.weights, split.target_test[d])
    if "A-SSVM" in out:
        for d in domains:
            model = train_assvm(source_prior, split.target_train[d], C, opts)
            out["A-SSVM"][d] = accuracy(model.weights, split.target_test[d])
    if "A-SSVM-ALL" in out:
        model = train_assvm_all(
            source_prior, [split.target_train[d] for d in domains], C, opts)
        for d in domains:
            out["A-SSVM-ALL"][d] = accuracy(model.weights, split.target_test[d])
    if "HA-SSVM" in out:
        model = train_hassvm(
            source_prior, tree, [split.target_train[d] for d in domains],
            C, opts)
        for d in domains:
            out["HA-SSVM"][d] = accuracy(model.weights_for_domain(d),
                                         split.target_test[d])
    return out


def _split_worker(args):
    return evaluate_split(*args)


def run_experiment(datasets, source_id: str, tree: AdaptationTree | None,
                   methods, protocol: SplitProtocol, C: float,
                   opts: SolveOptions | None = None, jobs: int = 1,
                   on_insufficient: str = "error") -> ExperimentReport:
    """The full protocol: repeated splits, shared draws, mean and std.

    `datasets` holds the source domain and every target domain; `tree`
    defaults to the two-layer tree over the targets (in dataset order).
    """
    methods = _validate_methods(methods)
    datasets = list(datasets)
    by_id = {d.domain_id: d for d in datasets}
    if source_id not in by_id:
        raise ConfigError(f"source domain {source_id!r} not among datasets")
    source = by_id[source_id]
    targets = [d for d in datasets if d.domain_id != source_id]
    if not targets:
        raise ConfigError("no target domains besides the source")
    domains = tuple(d.domain_id for d in targets)

    if "HA-SSVM" in methods:
        if tree is None:
            tree = default_tree(domains)
        covered = set(tree.domain_leaves)
        if covered != set(domains):
            raise ConfigError(
                f"tree leaves cover {sorted(covered)}, targets are "
                f"{sorted(domains)}"
            )

    splits = make_splits(source, targets, protocol, on_insufficient)
    tasks = [(split, methods, tree, C, opts) for split in splits]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_rep = list(pool.map(_split_worker, tasks))
    else:
        per_rep = [evaluate_split(*task) for task in tasks]

    values = {m: {d: [rep[m][d] for rep in per_rep] for d in domains}
              for m in methods}
    means = {m: {d: float(np.mean(values[m][d])) for d in domains}
             for m in methods}
    stds = {m: {d: float(np.std(values[m][d])) for d in domains}
            for m in methods}
    deficiencies = tuple(
        f"repetition {split.repetition}: {item}"
        for split in splits for item in split.deficiencies
    )
    config = {
        "source": source_id,
        "methods": list(methods),
        "C": C,
        "protocol": {
            "source_per_category": protocol.source_per_category,
            "target_per_category": protocol.target_per_category,
            "repetitions": protocol.repetitions,
            "seed": protocol.seed,
        },
        "tree": tree.to_dict() if tree is not None else None,
    }
    return ExperimentReport(
        methods=methods,
        domains=domains,
        means=means,
        stds=stds,
        values=values,
        config=config,
        seeds=tuple(protocol.seed + r for r in range(protocol.repetitions)),
        deficiencies=deficiencies,
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Hierarchical domain-shift generator settings.

    Category means are drawn from a zero-centered Gaussian with
    per-coordinate deviation `class_scale`. Every tree node at depth d
    adds an offset drawn with per-coordinate deviation `level_shifts[d-1]`,
    shared by all categories below that node; a leaf's distribution is
    Gaussian noise around (category mean + offsets accumulated along the
    root-to-leaf path). The source domain has no offsets.
    """

    category_count: int = 10
    feature_dim: int = 20
    tree_depth: int = 2
    branching: int = 3
    source_samples_per_category: int = 60
    target_samples_per_category: int = 40
    class_scale: float = 1.0
    level_shifts: tuple = (1.0, 0.5)
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "level_shifts", tuple(self.level_shifts))
        if self.category_count < 2:
            raise ConfigError("need at least two categories")
        if self.feature_dim < 1:
            raise ConfigError("feature dimension must be >= 1")
        if self.tree_depth < 1 or self.branching < 1:
            raise ConfigError("tree depth and branching must be >= 1")
        if len(self.level_shifts) != self.tree_depth:
            raise ConfigError(
                f"need one shift magnitude per level: got "
                f"{len(self.level_shifts)} for depth {self.tree_depth}"
            )
        if any(s < 0 for s in self.level_shifts):
            raise ConfigError("shift magnitudes must be >= 0")
        if self.noise <= 0:
            raise ConfigError("noise deviation must be > 0")
        if self.class_scale < 0:
            raise ConfigError("class scale must be >= 0")
        if (self.source_samples_per_category < 1
                or self.target_samples_per_category < 1):
            raise ConfigError("per-category sample counts must be >= 1")


def _build_synthetic_tree(depth: int, branching: int):
    """Complete tree of the given node depth; leaf names double as domains."""
    leaf_counter = [0]
    group_counter = [0]

    def build(level: int) -> TreeNode:
        if level == depth:
            leaf_counter[0] += 1
            name = f"target-{leaf_counter[0]}"
            return TreeNode(name=name, domain=name)
        children = tuple(build(level + 1) for _ in range(branching))
        if level == 1:
            return TreeNode(name="root", children=children)
        group_counter[0] += 1
        return TreeNode(name=f"group-{group_counter[0]}", children=children)

    return build(1)


def generate_synthetic(cfg: SyntheticConfig):
    """Draw (source dataset, per-leaf target datasets, ground-truth tree)."""
    rng = np.random.default_rng(cfg.seed)
    K, n = cfg.category_count, cfg.feature_dim
    class_means = rng.normal(0.0, cfg.class_scale, size=(K, n))

    root = _build_synthetic_tree(cfg.tree_depth, cfg.branching)
    tree = validate_tree(root)

    # One offset per node, drawn in pre-order; leaves accumulate the path.
    offsets = {}
    depth_of = {tree.node_order[0]: 1}
    for name in tree.node_order:
        parent = tree.parent[name]
        if parent is not None:
            depth_of[name] = depth_of[parent] + 1
        scale = cfg.level_shifts[depth_of[name] - 1]
        own = rng.normal(0.0, scale, size=n) if scale > 0 else np.zeros(n)
        base = offsets[parent] if parent is not None else np.zeros(n)
        offsets[name] = base + own

    def draw_domain(domain_id: str, offset: np.ndarray,
                    per_category: int) -> DomainDataset:
        feats = []
        labels = []
        for category in range(1, K + 1):
            center = class_means[category - 1] + offset
            feats.append(rng.normal(center, cfg.noise, size=(per_category, n)))
            labels.extend([category] * per_category)
        return DomainDataset.from_arrays(domain_id, np.vstack(feats), labels, K)

    source = draw_domain("source", np.zeros(n),
                         cfg.source_samples_per_category)
    targets = [
        draw_domain(tree.leaf_domains[name], offsets[name],
                    cfg.target_samples_per_category)
        for name in tree.node_order if name in tree.leaf_domains
    ]
    return source, targets, tree


def append_bias_feature(dataset: DomainDataset) -> DomainDataset:
    """Copy of a dataset with a constant 1.0 feature appended."""
    features = np.hstack([dataset.feature_matrix,
                          np.ones((len(dataset), 1))])
    return DomainDataset.from_arrays(dataset.domain_id, features,
                                     dataset.labels, dataset.category_count)


def _benchmark_seed(cfg: SyntheticConfig, seed: int, methods, C: float,
                    source_train_per_category: int,
                    target_train_per_category: int,
                    opts: SolveOptions | None, append_bias: bool):
    source, targets, gt_tree = generate_synthetic(replace(cfg, seed=seed))
    if append_bias:
        source = append_bias_feature(source)
        targets = [append_bias_feature(t) for t in targets]
    protocol = SplitProtocol(
        source_per_category=source_train_per_category,
        target_per_category=target_train_per_category,
        repetitions=1, seed=seed)
    split = make_splits(source, targets, protocol)[0]
    return evaluate_split(split, methods, gt_tree, C, opts), gt_tree


def _benchmark_worker(args):
    return _benchmark_seed(*args)


def run_synthetic_benchmark(cfg: SyntheticConfig, seeds, methods, C: float = 1.0,
                            source_train_per_category: int = 40,
                            target_train_per_category: int = 3,
                            opts: SolveOptions | None = None,
                            jobs: int = 1,
                            append_bias: bool = True) -> ExperimentReport:
    """Generate fresh data per seed and run one repetition on each.

    The reported mean/std are taken across seeds; within a seed the same
    value also seeds the split draw. A constant 1.0 feature is appended
    by default, matching the dataset loader's default, so per-domain
    threshold corrections are directly expressible.
    """
    methods = _validate_methods(methods)
    seeds = list(seeds)
    tasks = [(cfg, seed, methods, C, source_train_per_category,
              target_train_per_category, opts, append_bias) for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_benchmark_worker, tasks))
    else:
        results = [_benchmark_seed(*task) for task in tasks]
    per_seed = [r[0] for r in results]
    tree = results[0][1]
    domains = tuple(tree.domains)

    values = {m: {d: [rep[m][d] for rep in per_seed] for d in domains}
              for m in methods}
    means = {m: {d: float(np.mean(values[m][d])) for d in domains}
             for m in methods}
    stds = {m: {d: float(np.std(values[m][d])) for d in domains}
            for m in methods}
    config = {
        "generator": {
            "category_count": cfg.category_count,
            "feature_dim": cfg.feature_dim,
            "tree_depth": cfg.tree_depth,
            "branching": cfg.branching,
            "source_samples_per_category": cfg.source_samples_per_category,
            "target_samples_per_category": cfg.target_samples_per_category,
            "class_scale": cfg.class_scale,
            "level_shifts": list(cfg.level_shifts),
            "noise": cfg.noise,
        },
        "methods": list(methods),
        "C": C,
        "source_train_per_category": source_train_per_category,
        "target_train_per_category": target_train_per_category,
        "append_bias": append_bias,
    }
    return ExperimentReport(
        methods=methods, domains=domains, means=means, stds=stds,
        values=values, config=config, seeds=tuple(seeds))


def predict_labels(source: SourceModel, pool) -> list:
    """Pseudo-label a pool of samples with the source classifier.

    Accepts LabeledSample sequences (existing labels are ignored, domains
    kept) or a raw feature matrix (samples get the domain tag "pool").
    Order and count are preserved.
    """
    if isinstance(pool, np.ndarray):
        features = np.atleast_2d(np.asarray(pool, dtype=np.float64))
        domains = ["pool"] * features.shape[0]
    else:
        samples = list(pool)
        if not samples:
            return []
        features = np.vstack([s.features for s in samples])
        domains = [s.domain for s in samples]
    if features.shape[1] != source.feature_dim:
        raise DimensionError(
            f"pool features have dimension {features.shape[1]}, source model "
            f"expects {source.feature_dim}"
        )
    labels = predict_batch(source.weights, features, source.category_count)
    return [
        LabeledSample(features[i], int(labels[i]), domains[i])
        for i in range(features.shape[0])
    ]


def _pool_features(pool) -> np.ndarray:
    if isinstance(pool, np.ndarray):
        return np.atleast_2d(np.asarray(pool, dtype=np.float64))
    samples = list(pool)
    if not samples:
        raise DimensionError("cannot partition an empty pool")
    return np.vstack([s.features for s in samples])


def partition_domains(pool, domain_count: int, seed: int = 0) -> np.ndarray:
    """Cluster raw features into `domain_count` groups, labels 1..D.

    Farthest-point initialization (first center drawn by the seed, each
    next center the point farthest from all chosen ones), then at most
    100 Lloyd iterations. Deterministic given the seed.
    """
    X = _pool_features(pool)
    m = X.shape[0]
    if domain_count < 1:
        raise ProtocolError("domain count must be >= 1")
    if domain_count > m:
        raise ProtocolError(
            f"cannot split {m} samples into {domain_count} domains"
        )
    if domain_count == 1:
        return np.ones(m, dtype=np.int64)

    rng = np.random.default_rng(seed)
    centers = np.empty((domain_count, X.shape[1]))
    centers[0] = X[int(rng.integers(m))]
    dist = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, domain_count):
        centers[k] = X[int(np.argmax(dist))]
        dist = np.minimum(dist, np.sum((X - centers[k]) ** 2, axis=1))

    assign = None
    for _ in range(100):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        for k in range(domain_count):
            members = new_assign == k
            if not np.any(members):
                # Re-seed an empty cluster with the worst-fit point.
                worst = int(np.argmax(d2[np.arange(m), new_assign]))
                centers[k] = X[worst]
                new_assign[worst] = k
                members = new_assign == k
            centers[k] = X[members].mean(axis=0)
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
    return assign + 1


def ingest_assignments(path: str, pool) -> np.ndarray:
    """Read one integer domain id per line and renumber them to 1..D.

    The number of ids must match the pool size; renumbering maps distinct
    ids to 1..D in sorted order, preserving identity.
    """
    if isinstance(pool, np.ndarray):
        expected = np.atleast_2d(pool).shape[0]
    else:
        expected = len(list(pool))
    raw = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                raw.append(int(text))
            except ValueError:
                raise DatasetParseError(
                    f"{path}:{lineno}: domain id {text!r} is not an integer"
                ) from None
    if len(raw) != expected:
        raise DatasetParseError(
            f"{path}: {len(raw)} assignments for {expected} samples"
        )
    ids = np.asarray(raw, dtype=np.int64)
    remap = {old: new for new, old in enumerate(np.unique(ids), start=1)}
    return np.array([remap[v] for v in ids], dtype=np.int64)


def split_pool_by_assignment(pool, assignments, category_count: int,
                             prefix: str = "discovered") -> list:
    """Group pooled samples into one DomainDataset per assigned domain."""
    samples = list(pool)
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape[0] != len(samples):
        raise DimensionError(
            f"{assignments.shape[0]} assignments for {len(samples)} samples"
        )
    datasets = []
    for domain in np.unique(assignments):
        members = [samples[i] for i in np.flatnonzero(assignments == domain)]
        domain_id = f"{prefix}-{int(domain)}"
        relabeled = tuple(
            LabeledSample(s.features, s.label, domain_id) for s in members
        )
        datasets.append(DomainDataset(domain_id, relabeled,
                                      members[0].features.shape[0],
                                      category_count))
    return datasets
