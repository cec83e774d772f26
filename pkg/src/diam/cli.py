"""Command-line entry point: ``diam <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical fault.
Config files are flat ``key = value`` documents whose keys are the
:class:`~diam.train.TrainConfig` field names; command-line flags win.
"""

import argparse
import configparser
import csv
import dataclasses
import logging
import os
import sys

import numpy as np

from . import gradcheck, metrics
from .graph import GraphError
from .ingest import (DataError, load_edges, load_labels, load_split, split, subsample_illicit,
                     write_split)
from .model import CheckpointError, load_checkpoint, save_checkpoint
from .synth import SynthConfig, generate, has_parallel_edges, write
from .tensor import NumericalFault
from .train import TrainConfig, TrainingAborted, predict, train, write_history

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_ENV = "DIAM_DATA_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fanouts(text):
    try:
        values = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fanout list {text!r}") from None
    return values


def read_config_file(path):
    """Parse a flat ``key = value`` file into TrainConfig keyword arguments."""
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        parser.read_string("[config]\n" + fh.read())
    types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    out = {}
    for key, raw in parser["config"].items():
        if key not in types:
            raise UsageError(f"{path}: unknown config key {key!r}")
        kind = types[key]
        try:
            if kind in (bool, "bool"):
                out[key] = parser["config"].getboolean(key)
            elif kind in (tuple, "tuple"):
                out[key] = _fanouts(raw)
            elif kind in (int, "int"):
                out[key] = int(raw)
            elif kind in (float, "float"):
                out[key] = float(raw)
            else:
                out[key] = raw.strip()
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}: bad value for {key}: {raw!r}") from exc
    return out


def _data_paths(args):
    root = args.data or os.environ.get(DATA_ENV)
    if root is None:
        raise UsageError(f"--data is required (or set {DATA_ENV})")
    return {name: os.path.join(root, f"{name}.csv") for name in ("edges", "labels", "splits")}


def _load_dataset(args):
    paths = _data_paths(args)
    for name in ("edges", "labels"):
        if not os.path.exists(paths[name]):
            raise DataError(f"missing {paths[name]}")
    g, ids = load_edges(paths["edges"], getattr(args, "schema", None))
    labels = load_labels(paths["labels"], ids)
    return g, ids, labels, paths


# ---------------------------------------------------------------- commands

def cmd_gen_synth(args):
    cfg = SynthConfig(n_normal=args.normal, n_illicit=args.illicit,
                      mean_out_degree=args.degree, attr_dim=args.attr_dim,
                      amount_ratio=args.ratio, camouflage=args.camouflage, seed=args.seed)
    g, labels = generate(cfg)
    paths = write(g, labels, args.out, split_seed=args.seed)
    counts = labels.counts()
    print(f"nodes {g.node_count} edges {g.edge_count} d {g.attr_dim} "
          f"illicit {counts['illicit']} normal {counts['normal']}")
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_ingest_check(args):
    g, ids = load_edges(args.edges, args.schema)
    print(f"nodes {g.node_count} edges {g.edge_count} d {g.attr_dim} "
          f"parallel_edges {'yes' if has_parallel_edges(g) else 'no'}")
    if args.labels:
        counts = load_labels(args.labels, ids).counts()
        print(f"labeled illicit {counts['illicit']} normal {counts['normal']}")
    return EXIT_OK


def _train_config(args):
    values = read_config_file(args.config) if args.config else {}
    for key in ("c", "layers", "t_max", "lr", "dropout", "batch_size", "epochs", "fanouts",
                "seed", "ablation"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if args.no_standardize:
        values["standardize"] = False
    if args.full_neighborhood:
        values["full_neighborhood"] = True
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_train(args):
    config = _train_config(args)
    g, ids, labels, paths = _load_dataset(args)
    if os.path.exists(paths["splits"]):
        splits = load_split(paths["splits"], ids)
    else:
        splits = split(labels, config.seed)
    if args.illicit_ratio is not None:
        try:
            splits = subsample_illicit(splits, labels, args.illicit_ratio, config.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.npz")
    write_split(splits, os.path.join(args.out, "splits.csv"), ids)

    def save(result):
        extras = {}
        if result.stats is not None:
            extras = {"attr_mean": result.stats[0], "attr_std": result.stats[1]}
        save_checkpoint(ckpt, result.params, config.to_dict(), extras)
        write_history(result.history, os.path.join(args.out, "history.csv"))

    try:
        result = train(config, g, labels, splits)
    except TrainingAborted as exc:
        save(exc.result)
        print(f"numerical fault: {exc}; best checkpoint so far kept at {ckpt}", file=sys.stderr)
        return EXIT_NUMERIC
    save(result)
    print(f"best epoch {result.best_epoch} val f1 {result.history[result.best_epoch - 1].val_f1:.4f}")
    print(ckpt)
    return EXIT_OK


def _restore(args):
    params, cfg_dict, extras = load_checkpoint(args.checkpoint)
    config = TrainConfig.from_dict({**cfg_dict, "fanouts": tuple(cfg_dict["fanouts"])})
    if args.full_neighborhood:
        config = dataclasses.replace(config, full_neighborhood=True)
    stats = (extras["attr_mean"], extras["attr_std"]) if "attr_mean" in extras else None
    return params, config, stats


def _check_compat(params, g):
    if params.d != g.attr_dim:
        raise CheckpointError(f"checkpoint expects d={params.d}, data has d={g.attr_dim}")


def cmd_evaluate(args):
    params, config, stats = _restore(args)
    g, ids, labels, paths = _load_dataset(args)
    _check_compat(params, g)
    split_path = args.splits or paths["splits"]
    if not os.path.exists(split_path):
        raise DataError(f"missing split file {split_path}")
    nodes = load_split(split_path, ids).part(args.split)
    if len(nodes) == 0:
        raise DataError(f"split {args.split!r} is empty")
    probs = predict(params, g, nodes, config, stats=stats, workers=args.workers)
    report = metrics.evaluate(probs, labels.label_of(nodes), config.threshold)
    print(f"split {args.split} ({len(nodes)} nodes)")
    print(report.format())
    if args.out:
        report.write_csv(args.out)
    return EXIT_OK


def cmd_predict(args):
    params, config, stats = _restore(args)
    paths = _data_paths(args)
    g, ids = load_edges(paths["edges"], args.schema)
    _check_compat(params, g)
    nodes = np.arange(g.node_count)
    probs = predict(params, g, nodes, config, stats=stats, workers=args.workers)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "probability", "label"])
        for v, p in zip(nodes.tolist(), probs.tolist()):
            writer.writerow([ids.name(v), repr(p), int(p >= config.threshold)])
    print(f"wrote {len(nodes)} predictions to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args):
    report = gradcheck.run(seed=args.seed, coords_per_block=args.coords, tolerance=args.tolerance)
    for block, (n, worst) in report.per_block().items():
        print(f"{block:14s} {n:4d} coords  max rel err {worst:.2e}")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {len(report.coords)} coordinates, {len(report.failures)} beyond "
          f"{args.tolerance:g} ({report.seconds:.1f}s)")
    if not report.passed:
        for c in report.worst(10):
            print(f"  {c.block}{list(c.index)} analytic {c.analytic:.6e} numeric {c.numeric:.6e} "
                  f"rel {c.rel_error:.2e}")
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = _Parser(prog="diam", description="Illicit-account detection on transaction multigraphs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--normal", type=int, default=4000)
    p.add_argument("--illicit", type=int, default=1000)
    p.add_argument("--degree", type=float, default=6.0)
    p.add_argument("--attr-dim", type=int, default=2)
    p.add_argument("--ratio", type=float, default=3.0)
    p.add_argument("--camouflage", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("ingest-check", help="parse an edge file and report its shape")
    p.add_argument("--edges", required=True)
    p.add_argument("--labels")
    p.add_argument("--schema", choices=("ethereum", "bitcoin"))
    p.set_defaults(func=cmd_ingest_check)

    def data_flags(p):
        p.add_argument("--data", help=f"dataset directory (default ${DATA_ENV})")
        p.add_argument("--schema", choices=("ethereum", "bitcoin"))
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", help="train a model")
    data_flags(p)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config")
    p.add_argument("--c", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--fanouts", type=_fanouts)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablation", choices=("none", "no_attention", "no_mgd"))
    p.add_argument("--illicit-ratio", dest="illicit_ratio", type=float)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--full-neighborhood", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on one split")
    data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--splits", help="split file (default: <data>/splits.csv)")
    p.add_argument("--out", help="CSV report path")
    p.add_argument("--full-neighborhood", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="illicit probability for every node")
    data_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--full-neighborhood", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=gradcheck.TOLERANCE)
    p.add_argument("--coords", type=int, default=100, help="coordinates per parameter block")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"diam: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GraphError, CheckpointError, FileNotFoundError, KeyError) as exc:
        print(f"diam: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFault as exc:
        print(f"diam: numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
