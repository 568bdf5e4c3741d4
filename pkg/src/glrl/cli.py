"""Command-line entry point: ``glrl {train,eval,split,trace-check,selftest}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (including failed checks).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from glrl.errors import ConfigError, DataError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _add_data_args(p):
    p.add_argument("--data", required=True, help="ratings file or signed edge list")
    p.add_argument("--format", default="ml-tab", choices=["ml-tab", "ml-colon", "signed"])
    p.add_argument("--zero-one", action="store_true",
                   help="signed files: read sign 0 as -1")
    p.add_argument("--rating-range", type=float, nargs=2, default=(1.0, 5.0),
                   metavar=("LO", "HI"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.5)
    p.add_argument("--folds", type=int, default=1)


def _add_solver_args(p):
    p.add_argument("--loss", default="square", choices=["square", "logistic", "l1"])
    p.add_argument("--ridge", type=float, default=0.0, metavar="MU")
    p.add_argument("--solver", default="glrl",
                   choices=["glrl", "eglrl", "glrl-norefine", "nonsmooth"])
    p.add_argument("--rank", type=int, default=None,
                   help="target rank (smooth) or rank budget (nonsmooth)")
    p.add_argument("--iters", type=int, default=None, help="nonsmooth iterations T")
    p.add_argument("--nu", type=float, default=0.99)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=0.05)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--power-iters", type=int, default=30)
    p.add_argument("--qn-iters", type=int, default=5)
    p.add_argument("--stop-rel-tol", type=float, default=None,
                   help="nonsmooth: stop when the relative objective change drops below this")


def build_parser():
    parser = argparse.ArgumentParser(prog="glrl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write model / trace / metrics")
    _add_data_args(p)
    _add_solver_args(p)
    p.add_argument("--out-model")
    p.add_argument("--out-trace")
    p.add_argument("--out-metrics")
    p.add_argument("--out-snapshots", help="directory for per-iteration model files")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 for elapsed times so traces are reproducible byte for byte")

    p = sub.add_parser("eval", help="score a saved model on a held-out file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="ml-tab", choices=["ml-tab", "ml-colon", "signed"])
    p.add_argument("--zero-one", action="store_true")
    p.add_argument("--out-metrics")

    p = sub.add_parser("split", help="write a random train/test split in raw ids")
    _add_data_args(p)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)

    p = sub.add_parser("trace-check", help="recompute trace objectives from snapshots")
    _add_data_args(p)
    _add_solver_args(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--spots", type=int, default=3)

    p = sub.add_parser("selftest", help="run a fast subset of the property checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args, **extra):
    from glrl.experiment import ExperimentConfig

    rank = args.rank
    if rank is None and args.solver != "nonsmooth":
        rank = 10
    return ExperimentConfig(
        data=args.data, format=args.format, loss=args.loss, ridge=args.ridge,
        solver=args.solver, rank=rank, iters=args.iters, nu=args.nu, c1=args.c1,
        c2=args.c2, power_iters=args.power_iters, qn_iters=args.qn_iters,
        k_max=args.k_max, seed=args.seed, train_frac=args.train_frac, folds=args.folds,
        stop_rel_tol=args.stop_rel_tol, rating_range=tuple(args.rating_range),
        zero_one=args.zero_one, **extra)


def cmd_train(args):
    from glrl.experiment import run_experiment

    cfg = _config(args, out_model=args.out_model, out_trace=args.out_trace,
                  out_metrics=args.out_metrics, snapshots=args.out_snapshots,
                  timing=not args.no_timing)
    metrics = run_experiment(cfg)
    summary = {k: v for k, v in metrics.items() if k not in ("folds", "config")}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_eval(args):
    from glrl.data_io import (Dataset, encode_observed, load_id_maps, load_model,
                              load_ratings, load_signed_edges)
    from glrl.experiment import evaluate
    from glrl.sparse_core import ObservedMatrix

    model = load_model(args.model)
    row_ids, col_ids = load_id_maps(args.model)
    if row_ids is None:
        raise DataError(f"{args.model}: missing id sidecar {args.model}.ids.json")
    if args.format == "signed":
        held = load_signed_edges(args.data, zero_one=args.zero_one, min_degree=0)
    else:
        held = load_ratings(args.data, "tab" if args.format == "ml-tab" else "colon",
                            rating_range=(-np.inf, np.inf))
    raw_r, raw_c = held.decode(held.observed.rows, held.observed.cols)
    if (len(row_ids), len(col_ids)) != model.shape:
        raise DataError("id sidecar does not match the model shape")
    empty = np.zeros(0, dtype=np.int64)
    train_space = Dataset(ObservedMatrix(model.m, model.n, empty, empty, np.zeros(0)),
                          held.kind, row_ids, col_ids)
    test = encode_observed(train_space, raw_r.tolist(), raw_c.tolist(), held.observed.values)
    metrics = evaluate(model, test, held.kind)
    metrics["n_test"] = test.nnz
    print(json.dumps(metrics, indent=2, sort_keys=True))
    if args.out_metrics:
        with open(args.out_metrics, "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_split(args):
    from glrl.data_io import split, write_triples
    from glrl.experiment import ExperimentConfig, load_dataset

    cfg = ExperimentConfig(data=args.data, format=args.format, seed=args.seed,
                           train_frac=args.train_frac, zero_one=args.zero_one,
                           rating_range=tuple(args.rating_range))
    dataset = load_dataset(cfg)
    train, test = split(dataset, args.train_frac, args.seed)
    write_triples(args.out_train, dataset, train)
    write_triples(args.out_test, dataset, test)
    print(f"train {train.nnz} / test {test.nnz} entries")
    return EXIT_OK


def cmd_trace_check(args):
    from glrl.experiment import check_trace
    from glrl.trace import read_trace

    cfg = _config(args)
    rows = read_trace(args.trace)
    results = check_trace(cfg, rows, args.snapshots, spots=args.spots)
    ok = True
    for t, rec, f, good in results:
        print(f"t={t:<5d} trace={rec!r} recomputed={f!r} {'ok' if good else 'MISMATCH'}")
        ok &= good
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_selftest(args):
    from glrl.selftest import run_selftest

    return EXIT_OK if run_selftest(args.seed) else EXIT_NUMERIC


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "split": cmd_split,
    "trace-check": cmd_trace_check,
    "selftest": cmd_selftest,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
