"""Command-line interface: ``mkl01 {train,predict,cv,bench,synth}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from .admm import SolverError, SolverParams, solve
from .data import DataError, apply_normalizer, load_dataset, save_csv, synth_2d
from .experiments import (GridCell, cross_validate, grid_cells, prepare,
                          run_benchmark)
from .kernels import DEFAULT_SIGMAS
from .model import (ModelFormatError, accuracy, decision_values, load_model,
                    predict, save_model)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
FULL_GRID_CELLS = 11 ** 4
SYNTHETIC = "synthetic"


class UsageError(Exception):
    pass


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"values must be positive, got {text!r}")
    return vals


def _write_json(path, doc):
    if path:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def _load(args, path=None):
    path = path or args.data
    if path is None:
        raise UsageError("--data is required")
    return load_dataset(path, args.format)


def _single(values, name):
    if values is None:
        return 1.0
    if len(values) != 1:
        raise UsageError(f"--{name} takes one value here")
    return values[0]


def _axes(args):
    return dict(C=args.C, rho1=args.rho1, rho2=args.rho2, rho3=args.rho3)


def _cells(args):
    if args.full_grid:
        _warn(f"full grid requested: {FULL_GRID_CELLS} cells x {args.folds} folds")
    return grid_cells(full=args.full_grid, **_axes(args))


def cmd_synth(args) -> int:
    if args.out is None:
        raise UsageError("--out is required")
    if args.m_per_class < 1:
        raise UsageError(f"--m-per-class must be >= 1, got {args.m_per_class}")
    save_csv(synth_2d(args.m_per_class, args.seed), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    ds = _load(args)
    ds.require_trainable()
    stats, trn, _, bank = prepare(ds, None, args.sigmas)
    axes = _axes(args)
    metrics = {"command": "train", "m": ds.m, "n": ds.n}
    if args.full_grid or any(v is not None and len(v) > 1 for v in axes.values()):
        cv = cross_validate(trn, bank, _cells(args), args.folds, args.seed,
                            args.tol, args.max_iter, args.workers)
        cell = cv[0].cell
        metrics["cv_accuracy"] = cv[0].mean_acc
    else:
        cell = GridCell(*(_single(axes[k], k) for k in ("C", "rho1", "rho2", "rho3")))
    params = cell.params(args.tol, args.max_iter)
    if params.C / params.rho1 <= 2.0:
        _warn("C/rho1 <= 2: the initial point is already a fixed point; "
              "choose C > 2*rho1 or run `cv`")
    metrics["params"] = params.as_dict()
    try:
        model, trace, report = solve(trn, bank, params, norm=stats)
    except SolverError as exc:
        metrics.update(converged=False, aborted=True, error=str(exc),
                       iterations=exc.trace.iterations if exc.trace else 0)
        _write_json(args.out_metrics, metrics)
        if exc.trace is not None and args.out_trace:
            exc.trace.to_csv(args.out_trace)
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    last = trace.records[-1]
    metrics.update(
        converged=trace.converged,
        aborted=False,
        iterations=trace.iterations,
        J=last.J,
        betas={f"beta{k + 1}": v for k, v in enumerate(last.betas)},
        size_T=last.size_T,
        size_S=last.size_S,
        d=model.d.tolist(),
        b=model.b,
        n_support=len(model.sv_index),
        train_accuracy=accuracy(predict(model, trn.features), trn.labels),
        stationarity=report.to_dict(),
    )
    if args.out_model:
        save_model(model, args.out_model)
    if args.out_trace:
        trace.to_csv(args.out_trace)
    _write_json(args.out_metrics, metrics)
    print(json.dumps({k: metrics[k] for k in
                      ("converged", "iterations", "J", "train_accuracy")}))
    return EXIT_OK


def cmd_predict(args) -> int:
    if not args.model:
        raise UsageError("--model is required")
    model = load_model(args.model)
    ds = _load(args)
    X = apply_normalizer(model.norm, ds).features if model.norm is not None else ds.features
    f = decision_values(model, X)
    pred = np.where(f >= 0.0, 1, -1)
    if args.out_pred:
        with open(args.out_pred, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["decision", "prediction", "label"])
            for fv, p, yv in zip(f, pred, ds.labels):
                out.writerow([repr(float(fv)), int(p), int(yv)])
    acc = accuracy(pred, ds.labels)
    _write_json(args.out_metrics, {"command": "predict", "m": ds.m, "accuracy": acc})
    print(json.dumps({"accuracy": acc}))
    return EXIT_OK


def cmd_cv(args) -> int:
    ds = _load(args)
    ds.require_trainable()
    _, trn, _, bank = prepare(ds, None, args.sigmas)
    results = cross_validate(trn, bank, _cells(args), args.folds, args.seed,
                             args.tol, args.max_iter, args.workers)
    best = results[0]
    doc = {"command": "cv", "folds": args.folds, "seed": args.seed,
           "cells": len(results), "best": asdict(best.cell),
           "best_accuracy": best.mean_acc}
    _write_json(args.out_metrics, doc)
    if args.out_grid:
        with open(args.out_grid, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["C", "rho1", "rho2", "rho3", "mean_acc", "failed"])
            for r in results:
                c = r.cell
                out.writerow([c.C, c.rho1, c.rho2, c.rho3, repr(r.mean_acc),
                              int(r.failed)])
    print(json.dumps(doc["best"] | {"accuracy": best.mean_acc}))
    return EXIT_OK


TABLE_FIELDS = ("dataset", "m", "n", "C", "rho1", "rho2", "rho3", "acc_mean",
                "acc_std", "iterations_mean", "size_T_mean", "d_nnz_mean",
                "converged", "repeats", "status")


def cmd_bench(args) -> int:
    sources = args.data or [SYNTHETIC]
    rows = []
    cells = _cells(args)
    for src in sources:
        if src == SYNTHETIC:
            ds, name = synth_2d(args.m_per_class, args.seed), SYNTHETIC
        else:
            name = os.path.splitext(os.path.basename(src))[0]
            try:
                ds = load_dataset(src, args.format)
            except DataError as exc:
                _warn(f"skipping {src}: {exc}")
                rows.append({"dataset": name, "status": f"skipped: {exc}"})
                continue
        res = run_benchmark(ds, name, args.sigmas, cells, args.repeats, args.seed,
                            args.train_frac, args.folds, args.tol, args.max_iter,
                            args.workers)
        rows.append(res.summary() | {"status": "ok"})

    _write_json(args.out_metrics, {"command": "bench", "rows": rows})
    if args.out_table:
        with open(args.out_table, "w", newline="") as fh:
            out = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, restval="")
            out.writeheader()
            out.writerows(rows)
    print(f"{'Dataset':<14}{'m':>6}{'n':>5}{'ACC':>10}{'std':>8}")
    for r in rows:
        if r["status"] == "ok":
            print(f"{r['dataset']:<14}{r['m']:>6}{r['n']:>5}"
                  f"{100 * r['acc_mean']:>9.2f}%{100 * r['acc_std']:>7.2f}")
        else:
            print(f"{r['dataset']:<14}  {r['status']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    shared.add_argument("--sigmas", type=_floats, default=list(DEFAULT_SIGMAS),
                        help="comma-separated Gaussian bandwidths")
    for name in ("C", "rho1", "rho2", "rho3"):
        shared.add_argument(f"--{name}", type=_floats, default=None,
                            help="one value, or a comma-separated grid")
    shared.add_argument("--tol", type=float, default=1e-3)
    shared.add_argument("--max-iter", type=int, default=1000)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--train-frac", type=float, default=0.7)
    shared.add_argument("--folds", type=int, default=10)
    shared.add_argument("--repeats", type=int, default=20)
    shared.add_argument("--workers", type=int, default=1)
    shared.add_argument("--full-grid", action="store_true",
                        help="use all 11^4 cells of {2^-2..2^8} instead of the reduced grid")
    shared.add_argument("--out-model")
    shared.add_argument("--out-metrics")
    shared.add_argument("--out-trace")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="mkl01", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", parents=[shared], help="fit a model")
    p.add_argument("--data", help="dataset file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[shared], help="apply a saved model")
    p.add_argument("--data", help="dataset file")
    p.add_argument("--model")
    p.add_argument("--out-pred")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", parents=[shared], help="k-fold grid search")
    p.add_argument("--data", help="dataset file")
    p.add_argument("--out-grid", help="CSV of every grid cell, best first")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", parents=[shared], help="repeated 70/30 benchmark")
    p.add_argument("--data", action="append",
                   help=f"dataset file or '{SYNTHETIC}' (repeatable)")
    p.set_defaults(func=cmd_bench)
    p.add_argument("--m-per-class", type=int, default=100)
    p.add_argument("--out-table")

    p = sub.add_parser("synth", parents=[shared], help="write the 2-d synthetic set")
    p.add_argument("--m-per-class", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth, data=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if not 0.0 < args.train_frac < 1.0:
            raise UsageError("--train-frac must lie in (0, 1)")
        SolverParams(tol=args.tol, max_iter=args.max_iter)
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, (DataError, ModelFormatError)):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"solver aborted: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
