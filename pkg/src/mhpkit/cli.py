"""Command-line front end.

Exit codes: 0 success, 2 validation or configuration error, 3 the solver
stopped at ``max_iter`` without meeting the tolerance (outputs are still
written).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path as FsPath

import numpy as np

from . import io
from .calibrate import CalibrationChoice
from .classify import (ClassBank, accuracy, confusion, fit_erm, fit_ermlr, make_classification,
                       predict, predict_proba)
from .core import ValidationError
from .learner import FitConfig, fit, score
from .metrics import evaluate
from .model import DomainError
from .optim import OptimConfig, OptimizationError
from .simulate import SimulationConfig, simulate_cluster

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 2, 3
THREADS_ENV = "MHPKIT_THREADS"


class CliError(Exception):
    """Bad usage detected after argument parsing."""


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if value < 1:
            raise CliError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return value
    return os.cpu_count() or 1


def _threads(args) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise CliError(f"--threads must be >= 1, got {args.threads}")
        return args.threads
    return default_threads()


def _out_dir(path):
    out = FsPath(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_matrices(out_dir, mu, alpha, figures: bool, prefix=""):
    """CSV matrices plus (optionally) PNG heatmaps of ``[mu | alpha]`` and the support."""
    out = _out_dir(out_dir)
    support = (np.asarray(alpha) != 0).astype(int)
    io.write_csv_matrix(out / f"{prefix}mu.csv", np.asarray(mu, dtype=float).reshape(-1, 1))
    io.write_csv_matrix(out / f"{prefix}alpha.csv", alpha)
    io.write_csv_matrix(out / f"{prefix}support.csv", support)
    if figures:
        from . import plotting

        plotting.plot_params(mu, alpha, out / f"{prefix}values.png")
        plotting.plot_support(alpha, out / f"{prefix}support.png")


def cmd_simulate(args) -> int:
    params = io.read_params(args.params)
    n_jobs = _threads(args)
    if isinstance(params, ClassBank):
        data = make_classification(params, args.n_samples, args.end_time, args.seed)
        io.write_labeled(args.out, data)
        dataset = data.data
    else:
        config = SimulationConfig(params, args.end_time, args.n_samples, args.seed,
                                  args.allow_degenerate)
        dataset = simulate_cluster(config, n_jobs)
        io.write_dataset(args.out, dataset)
    total = dataset.total_events()
    print(f"n={dataset.n} d={dataset.dim} total_events={total} "
          f"mean_events_per_path={total / dataset.n!r}")
    return EXIT_OK


def _fit_config(args, n_jobs) -> FitConfig:
    kappa_choice = CalibrationChoice(args.kappa_choice,
                                     args.cv_folds if args.kappa_choice == "cv" else 5,
                                     args.ebic_gamma)
    optim = OptimConfig(args.optimizer, args.lr_scheduler, args.max_iter, args.tol,
                        args.record_every, args.print_every, args.verbose)
    grid = None if args.grid is None else tuple(float(v) for v in args.grid.split(","))
    return FitConfig(args.decay, args.loss, args.penalty, args.kappa, kappa_choice, args.zeta,
                     optim, grid, args.grid_size, True, args.penalize_mu, args.seed, n_jobs)


def cmd_fit(args) -> int:
    config = _fit_config(args, _threads(args))
    data = io.read_dataset(args.dataset)
    result = fit(data, config)
    train_score = score(result, data)
    io.write_fit_result(args.out, result, train_score)
    if args.plot_dir:
        _emit_matrices(args.plot_dir, result.theta_hat.mu_hat, result.theta_hat.alpha_hat,
                       not args.no_figures)
    print(result.trace.summary())
    print(f"selected_kappa={result.selected_kappa!r} score={train_score!r}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_classify(args) -> int:
    train = io.read_labeled(args.train)
    test = io.read_labeled(args.test)
    if train.dim != test.dim:
        raise CliError(f"train dimension {train.dim} != test dimension {test.dim}")
    n_jobs = _threads(args)
    if args.method == "erm":
        model = fit_erm(train, args.decay, args.gamma0, args.max_iter, args.tol, n_jobs)
    else:
        model = fit_ermlr(train, args.decay, args.gamma0, args.ebic_gamma, args.max_iter,
                          args.tol, args.grid_size, n_jobs)
    out = _out_dir(args.out)
    io.write_classifier(out / "model.json", model)
    proba = predict_proba(model, test.data)
    labels = predict(model, test.data)
    acc = accuracy(model, test)
    conf = confusion(model, test)
    io.write_csv_matrix(out / "predictions.csv",
                        np.column_stack([np.arange(test.n), labels]).astype(int),
                        header=["index", "label"])
    io.write_csv_matrix(out / "proba.csv", proba,
                        header=[f"class_{k}" for k in range(model.n_classes)])
    io.write_csv_matrix(out / "confusion.csv", conf)
    io.write_csv_matrix(out / "accuracy.csv", np.array([[acc]]), header=["accuracy"])
    if not args.no_figures:
        from . import plotting

        plotting.plot_confusion(conf, out / "confusion.png",
                                f"{args.method.upper()} accuracy {acc:.3f}")
    print(f"method={args.method} accuracy={acc!r}")
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = io.read_estimate(args.truth)
    estimate = io.read_estimate(args.estimate)
    report = evaluate(truth.alpha_hat, estimate.alpha_hat)
    print(report.format_table())
    if args.out:
        row = report.as_row()
        io.write_csv_matrix(args.out, np.array([list(row.values())]), header=list(row))
    return EXIT_OK


def cmd_plot(args) -> int:
    theta = io.read_estimate(args.source)
    _emit_matrices(args.out, theta.mu_hat, theta.alpha_hat, not args.no_figures)
    print(f"wrote matrices to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhpkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads (default: ${THREADS_ENV} or the CPU count)")

    p = sub.add_parser("simulate", help="simulate a dataset (labeled when given a class bank)")
    p.add_argument("params")
    p.add_argument("--end-time", type=float, required=True)
    p.add_argument("--n-samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--allow-degenerate", action="store_true",
                   help="accept all-zero baselines")
    p.add_argument("--out", required=True)
    threads(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit (mu, alpha) to a dataset")
    p.add_argument("dataset")
    p.add_argument("--decay", type=float, required=True)
    p.add_argument("--loss", default="least-squares", choices=["least-squares", "log-likelihood"])
    p.add_argument("--penalty", default="none", choices=["none", "lasso", "ridge", "elasticnet"])
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--kappa-choice", default="ebic", choices=["cv", "bic", "ebic"])
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--ebic-gamma", type=float, default=1.0)
    p.add_argument("--zeta", type=float, default=0.5)
    p.add_argument("--grid", default=None, help="comma-separated decreasing kappa values")
    p.add_argument("--grid-size", type=int, default=20)
    p.add_argument("--penalize-mu", action="store_true")
    p.add_argument("--optimizer", default="agd", choices=["gd", "agd"])
    p.add_argument("--lr-scheduler", default="backtracking", choices=["lipschitz", "backtracking"])
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--print-every", type=int, default=10)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=0, help="cross-validation fold seed")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-dir", default=None, help="write CSV matrices and figures here")
    p.add_argument("--no-figures", action="store_true", help="CSV only")
    threads(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="train a classifier and evaluate it on a test set")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--decay", type=float, required=True)
    p.add_argument("--method", default="ermlr", choices=["erm", "ermlr"])
    p.add_argument("--gamma0", type=float, default=0.1)
    p.add_argument("--ebic-gamma", type=float, default=1.0)
    p.add_argument("--grid-size", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    threads(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="support and ranking metrics of an estimate")
    p.add_argument("truth")
    p.add_argument("estimate")
    p.add_argument("--out", default=None, help="also write the metrics as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot", help="emit the matrices behind the heatmaps")
    p.add_argument("source", help="params or fit-result file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, CliError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OptimizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
