"""Command-line interface: train models, evaluate them, run the full
experiment protocol, and generate synthetic benchmark data.

All commands are deterministic given their arguments and input files;
randomness flows from explicit seeds only. Validation failures exit with
status 1 and a single-line diagnostic on stderr.
"""

import argparse
import json
import os
import sys

from . import dataio, experiments
from .errors import ConfigError, HassvmError
from .solver import SolveOptions
from .trainers import train_assvm, train_assvm_all, train_hassvm, train_ssvm

TRAIN_METHODS = ("ssvm", "assvm", "assvm-all", "hassvm")


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _solver_options(args) -> SolveOptions:
    return SolveOptions(
        max_iterations=args.max_iterations,
        gradient_tolerance=args.gradient_tolerance,
    )


def _add_solver_flags(parser):
    parser.add_argument("--max-iterations", type=int, default=2000,
                        help="solver iteration cap (default 2000)")
    parser.add_argument("--gradient-tolerance", type=float, default=1e-5,
                        help="relative gradient stopping tolerance")


def _load_training_data(args, source_model=None):
    """Load a dataset honoring either the flags or the source model's
    stored preprocessing (which wins, so train and test transforms match)."""
    if source_model is not None:
        data = dataio.load_dataset(
            args.data,
            append_bias=source_model.bias_appended,
            normalize=False,
            category_count=source_model.category_count,
        )
        return dataio.apply_normalization(data, source_model.normalization)
    return dataio.load_dataset(args.data, append_bias=args.append_bias,
                               normalize=args.normalize,
                               category_count=args.categories)


def cmd_train(args) -> int:
    opts = _solver_options(args)
    if args.method == "ssvm":
        data = _load_training_data(args)
        model = train_ssvm(data.datasets, args.C, opts)
        model = _attach_load_meta(model, data)
    else:
        if not args.source_model:
            raise ConfigError(f"train {args.method} requires --source-model")
        loaded = dataio.load_model(args.source_model)
        source = loaded.to_source_model(node=args.source_node)
        data = _load_training_data(args, source)
        if args.method == "assvm":
            model = train_assvm(source, data.datasets, args.C, opts)
        elif args.method == "assvm-all":
            model = train_assvm_all(source, data.datasets, args.C, opts)
        else:
            if not args.tree:
                raise ConfigError("train hassvm requires --tree")
            tree = dataio.load_tree_config(args.tree)
            model = train_hassvm(source, tree, data.datasets, args.C, opts)
    dataio.save_model(model, args.out)
    prov = model.provenance
    print(f"objective {prov['objective_value']:.6f} "
          f"iterations {prov['iterations']} "
          f"time {prov['wall_time_s']:.2f}s")
    return 0


def _attach_load_meta(model, data):
    """Carry the dataset's bias/normalization settings onto the model."""
    from dataclasses import replace
    return replace(model, bias_appended=data.bias_appended,
                   normalization=data.normalization)


def cmd_eval(args) -> int:
    model = dataio.load_model(args.model)
    data = dataio.load_dataset(args.data, append_bias=model.bias_appended,
                               normalize=False,
                               category_count=model.category_count)
    data = dataio.apply_normalization(data, model.normalization)
    if args.node is not None:
        weights = model.node_weights(args.node)
        resolve = lambda domain: weights
    elif model.tree is not None:
        resolve = model.weights_for_domain
    else:
        weights = model.single_weights()
        resolve = lambda domain: weights

    total_correct = 0
    total_count = 0
    for dataset in data.datasets:
        acc = experiments.accuracy(resolve(dataset.domain_id), dataset)
        print(f"{dataset.domain_id} accuracy {acc:.4f}")
        total_correct += acc * len(dataset)
        total_count += len(dataset)
    if len(data.datasets) > 1:
        print(f"overall accuracy {total_correct / total_count:.4f}")
    return 0


def _experiment_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file {path!r} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid config: {exc}") from None
    for key in ("data", "source", "methods"):
        if key not in config:
            raise ConfigError(f"{path}: missing required field {key!r}")
    return config


def cmd_experiment(args) -> int:
    config = _experiment_config(args.config)
    paths = config["data"]
    if isinstance(paths, str):
        paths = [paths]
    datasets = []
    category_count = config.get("categories")
    for path in paths:
        loaded = dataio.load_dataset(
            path,
            append_bias=config.get("append_bias", True),
            normalize=config.get("normalize", False),
            category_count=category_count,
        )
        category_count = loaded.category_count
        datasets.extend(loaded.datasets)

    protocol_cfg = config.get("protocol", {})
    protocol = experiments.SplitProtocol(
        source_per_category=protocol_cfg.get("source_per_category", 20),
        target_per_category=protocol_cfg.get("target_per_category", 3),
        repetitions=protocol_cfg.get("repetitions", 20),
        seed=protocol_cfg.get("seed", args.seed),
    )
    tree = None
    if config.get("tree") is not None:
        tree = dataio.validate_tree(config["tree"])
    elif config.get("tree_path"):
        tree = dataio.load_tree_config(config["tree_path"])

    report = experiments.run_experiment(
        datasets,
        source_id=config["source"],
        tree=tree,
        methods=config["methods"],
        protocol=protocol,
        C=config.get("C", 1.0),
        jobs=args.jobs,
    )
    print(report.table())
    for line in report.deficiencies:
        print(f"# deficiency: {line}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return 0


def cmd_synth(args) -> int:
    shifts = tuple(float(s) for s in args.shifts.split(","))
    cfg = experiments.SyntheticConfig(
        category_count=args.categories,
        feature_dim=args.features,
        tree_depth=args.depth,
        branching=args.branching,
        source_samples_per_category=args.source_per_category,
        target_samples_per_category=args.target_per_category,
        class_scale=args.class_scale,
        level_shifts=shifts,
        noise=args.noise,
        seed=args.seed,
    )
    source, targets, tree = experiments.generate_synthetic(cfg)
    os.makedirs(args.out, exist_ok=True)
    source_path = os.path.join(args.out, "source.csv")
    targets_path = os.path.join(args.out, "targets.csv")
    tree_path = os.path.join(args.out, "tree.json")
    dataio.save_dataset(source, source_path)
    dataio.save_dataset(targets, targets_path)
    with open(tree_path, "w", encoding="utf-8") as fh:
        json.dump({"root": tree.to_dict()}, fh, indent=1)
        fh.write("\n")
    print(f"wrote {source_path}, {targets_path}, {tree_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hassvm",
                     description="Hierarchical adaptation of linear "
                                 "multiclass classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and save it")
    p_train.add_argument("method", choices=TRAIN_METHODS)
    p_train.add_argument("--data", required=True, help="training dataset file")
    p_train.add_argument("--C", type=float, default=1.0,
                         help="loss weight (default 1.0)")
    p_train.add_argument("--out", required=True, help="output model path")
    p_train.add_argument("--source-model", help="prior model to adapt from")
    p_train.add_argument("--source-node",
                         help="node of a tree-structured source model to use")
    p_train.add_argument("--tree", help="adaptation tree config (hassvm)")
    p_train.add_argument("--append-bias", action=argparse.BooleanOptionalAction,
                         default=True, help="append a constant 1.0 feature")
    p_train.add_argument("--normalize", action="store_true",
                         help="z-score features on the training data")
    p_train.add_argument("--categories", type=int, default=None,
                         help="category count (default: max label seen)")
    _add_solver_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="accuracy of a saved model")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--node", default=None,
                        help="evaluate one tree node's slice everywhere")
    p_eval.set_defaults(func=cmd_eval)

    p_exp = sub.add_parser("experiment",
                           help="run the repeated-splits protocol")
    p_exp.add_argument("--config", required=True, help="experiment JSON config")
    p_exp.add_argument("--out", default=None,
                       help="write the machine-readable report here")
    p_exp.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for repetitions (default 1)")
    p_exp.add_argument("--seed", type=int, default=0,
                       help="seed when the config does not set one")
    p_exp.set_defaults(func=cmd_experiment)

    p_synth = sub.add_parser("synth", help="generate synthetic benchmark data")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--categories", type=int, default=10)
    p_synth.add_argument("--features", type=int, default=20)
    p_synth.add_argument("--depth", type=int, default=2)
    p_synth.add_argument("--branching", type=int, default=3)
    p_synth.add_argument("--source-per-category", type=int, default=60)
    p_synth.add_argument("--target-per-category", type=int, default=40)
    p_synth.add_argument("--class-scale", type=float, default=1.0)
    p_synth.add_argument("--shifts", default="1.0,0.5",
                         help="comma-separated per-level shift magnitudes")
    p_synth.add_argument("--noise", type=float, default=1.0)
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except HassvmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
