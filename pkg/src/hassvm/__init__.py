"""Hierarchical adaptation of linear multiclass classifiers.

Adapts a fixed source-domain classifier to one or more target domains,
optionally organized in an adaptation tree whose internal nodes capture
structure shared between sub-domains. Includes the single-layer baselines
(plain, one-to-one adaptive, pooled adaptive) and an experiment harness
with repeated per-category splits.
"""

from .core import (
    DomainDataset,
    LabeledSample,
    Normalization,
    SourceModel,
    joint_feature,
    predict,
    predict_batch,
    score,
)
from .dataio import (
    LoadedData,
    LoadedModel,
    apply_normalization,
    load_dataset,
    load_model,
    load_tree_config,
    save_dataset,
    save_model,
)
from .errors import (
    ConfigError,
    DatasetParseError,
    DegenerateProblemError,
    DimensionError,
    HassvmError,
    InvalidCategoryError,
    ModelFormatError,
    ProtocolError,
    TreeValidationError,
)
from .experiments import (
    ExperimentReport,
    SplitProtocol,
    SyntheticConfig,
    accuracy,
    default_tree,
    generate_synthetic,
    ingest_assignments,
    make_splits,
    partition_domains,
    predict_labels,
    run_experiment,
    run_synthetic_benchmark,
    split_pool_by_assignment,
)
from .objective import (
    AdaptiveObjective,
    HierarchicalObjective,
    LossReport,
    ObjectiveReport,
    assvm_objective,
    hassvm_objective,
    loss_augmented_argmax,
    structured_hinge,
)
from .solver import (
    LineSearchResult,
    SolveOptions,
    SolveResult,
    line_search,
    minimize,
)
from .trainers import (
    TrainedModel,
    train_assvm,
    train_assvm_all,
    train_hassvm,
    train_ssvm,
)
from .tree import (
    AdaptationTree,
    TreeNode,
    WeightStack,
    stack_flatten,
    stack_unflatten,
    uniform_stack,
    validate_tree,
)

__version__ = "0.1.0"
