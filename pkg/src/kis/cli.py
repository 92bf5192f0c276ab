"""Command-line interface: ``kis train | predict | tune | benchmark``.

Exit codes: 0 success, 2 data error, 3 solver stall, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend
from .data import (Dataset, balance_and_split, build_windows, explicit_windows, load_csv,
                   load_features_csv, load_libsvm, mutual_information_scores, zscore_fit_transform)
from .errors import ConfigError, DataError, KisError, SolverStalled
from .fastsum import FastsumConfig
from .ipm import IpmConfig, ipm_train
from .kernels import AnovaKernelSpec
from .lowrank import METHODS, build_factor, window_ranks
from .model_io import load_model, save_model
from .pipeline import OPERATORS, PrecondConfig, fit, make_operator
from .synthetic import windowed_problem
from .tuning import SearchSpace, accuracy, random_search, write_trial_log

log = logging.getLogger("kis")

METRICS_HEADER = ["n_train", "d", "P", "rank", "fit_s", "ipm_iters", "mean_gmres",
                  "xi_alpha", "xi_lambda", "mu_final"]
BENCH_HEADER = ["method", "rank", "n_train", "achieved_rank", "setup_s", "mean_gmres",
                "ipm_iters", "status"]


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 4), not data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rank(text):
    ranks = _int_list(text)
    if not ranks:
        raise argparse.ArgumentTypeError("empty rank")
    return ranks[0] if len(ranks) == 1 else tuple(ranks)


def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="dataset path")
    p.add_argument("--format", choices=("libsvm", "csv"), default=None,
                   help="input format (default: from the file extension)")
    p.add_argument("--label-col", default="-1",
                   help="CSV label column, by index or name; 'none' for unlabeled input")


def _add_model_args(p):
    p.add_argument("--precond", choices=METHODS, default="cholesky-greedy")
    p.add_argument("--rank", type=_rank, default=200,
                   help="total preconditioner rank, or comma-separated per-window ranks")
    p.add_argument("--bandwidth", type=int, default=32)
    p.add_argument("--cutoff", type=int, default=4)
    p.add_argument("--oversampling", type=float, default=2.0)
    p.add_argument("--C", type=float, default=0.4)
    p.add_argument("--sigma", type=float, default=0.6)
    p.add_argument("--gamma0", type=float, default=0.99995)
    p.add_argument("--tol-ip", type=float, default=1e-1)
    p.add_argument("--tol-gmres", type=float, default=1e-3)
    p.add_argument("--max-ip", type=int, default=50)
    p.add_argument("--max-gmres", type=int, default=100)
    p.add_argument("--windows", default="auto",
                   help="'auto' (mutual-information ranking) or explicit 1-based groups like '1,2,3;4,5'")
    p.add_argument("--operator", choices=OPERATORS, default="fast",
                   help="kernel matvec backend used in training")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = _Parser(prog="kis", description="Interior point kernel SVM with fast ANOVA kernels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model; writes model.json and metrics.csv")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--ell", type=float, default=1.0, help="length-scale for every window")

    p = sub.add_parser("predict", help="predict labels; writes predictions.txt")
    p.add_argument("--model", required=True)
    _add_data_args(p)
    p.add_argument("--backend", choices=("fast", "exact"), default="fast")
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("tune", help="random search; writes trials.csv and best_model.json")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--shared-lengthscale", action="store_true",
                   help="sample one length-scale for all windows")
    p.add_argument("--holdout", type=float, default=None,
                   help="carve this fraction of the training split out for validation")

    p = sub.add_parser("benchmark", help="preconditioner setup time and GMRES iterations; writes benchmark.csv")
    _add_data_args(p, required=False)
    _add_model_args(p)
    p.add_argument("--synthetic", type=int, default=None,
                   help="use a generated 6-feature problem of this size instead of --data")
    p.add_argument("--methods", default=",".join(m for m in METHODS if m != "none"))
    p.add_argument("--ranks", type=_int_list, default=[50, 200, 1000])
    p.add_argument("--sizes", type=_int_list, default=[1000, 5000])
    return parser


def _format(args):
    if args.format:
        return args.format
    return "csv" if str(args.data).lower().endswith(".csv") else "libsvm"


def _load(args):
    if _format(args) == "libsvm":
        return load_libsvm(args.data)
    label = args.label_col
    if label.lower() == "none":
        return load_features_csv(args.data)
    return load_csv(args.data, label)


def _configs(args):
    ipm = IpmConfig(C=args.C, sigma=args.sigma, gamma0=args.gamma0, tol_ip=args.tol_ip,
                    max_ip_iters=args.max_ip, tol_gmres=args.tol_gmres, max_gmres_iters=args.max_gmres)
    fs = FastsumConfig(bandwidth=args.bandwidth, cutoff=args.cutoff, oversampling=args.oversampling)
    pc = PrecondConfig(method=args.precond, rank=args.rank, seed=args.seed)
    return ipm, fs, pc


def _prepare(args):
    data = _load(args)
    if not isinstance(data, Dataset):
        raise DataError("training needs labeled data")
    train, test = balance_and_split(data, args.train_fraction, args.seed)
    train, test = zscore_fit_transform(train, test)
    if args.windows == "auto":
        windowing = build_windows(mutual_information_scores(train), train.d)
    else:
        windowing = explicit_windows(args.windows, train.d)
    return train, test, windowing


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _num(x):
    return repr(float(x))


def _backend_for(operator):
    return "fast" if operator == "fast" else "exact"


def cmd_train(args):
    ipm_cfg, fs_cfg, pc = _configs(args)
    train, test, windowing = _prepare(args)
    spec = AnovaKernelSpec(windowing.with_length_scales(args.ell))
    out = _out_dir(args)
    report = fit(train, spec, ipm_cfg, pc, args.operator, fs_cfg)
    res = report.result
    save_model(res.model, out / "model.json")
    last = res.records[-1]
    _write_csv(out / "metrics.csv", METRICS_HEADER, [[
        train.n, train.d, spec.P, report.rank, f"{report.fit_seconds:.6f}", len(res.records),
        _num(res.mean_gmres_iterations), _num(last.rel_xi_alpha), _num(last.rel_xi_lambda), _num(last.mu),
    ]])
    print(f"trained on {train.n} points, {spec.P} window(s), status {res.status}, "
          f"{len(res.records)} IPM iterations, {report.fit_seconds:.3f} s")
    if test.n:
        acc = accuracy(res.model.predict(test.points, _backend_for(args.operator)), test.labels)
        print(f"test_accuracy={acc:.6f}")
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    data = _load(args)
    labeled = isinstance(data, Dataset)
    X = data.points if labeled else np.atleast_2d(data)
    if X.shape[1] < model.d and _format(args) == "libsvm":
        # trailing features that are zero everywhere never appear in a sparse file
        X = np.hstack([X, np.zeros((X.shape[0], model.d - X.shape[1]))])
    if X.shape[1] != model.d:
        raise ConfigError(f"model expects {model.d} features, data has {X.shape[1]}")
    if model.normalization is not None:
        X = model.normalization.transform(X)
    out = _out_dir(args)
    t0 = time.perf_counter()
    pred = model.predict(X, args.backend)
    elapsed = time.perf_counter() - t0
    with open(out / "predictions.txt", "w", newline="\n", encoding="utf-8") as fh:
        fh.writelines(f"{int(p):d}\n" for p in pred)
    print(f"predict_seconds={elapsed:.6f}")
    if labeled:
        print(f"accuracy={accuracy(pred, data.labels):.6f}")
    return 0


def cmd_tune(args):
    ipm_cfg, fs_cfg, pc = _configs(args)
    train, test, windowing = _prepare(args)
    validation = test
    if args.holdout is not None:
        if not 0 < args.holdout < 1:
            raise ConfigError("--holdout must lie strictly between 0 and 1")
        raw_train = Dataset(train.normalization.mean + train.points * train.normalization.std, train.labels)
        train, validation = balance_and_split(raw_train, 1 - args.holdout, args.seed + 1)
        train, validation = zscore_fit_transform(train, validation)
    if validation.n == 0:
        raise DataError("validation split is empty")
    space = SearchSpace(trials=args.trials, seed=args.seed, shared_lengthscale=args.shared_lengthscale)
    out = _out_dir(args)
    try:
        result = random_search(train, validation, windowing, space, ipm_cfg, pc, args.operator, fs_cfg)
    except SolverStalled as exc:
        write_trial_log(exc.result, out / "trials.csv", windowing.P)
        raise
    write_trial_log(result.log, out / "trials.csv", windowing.P)
    save_model(result.best_model, out / "best_model.json")
    best = result.best_trial
    print(f"best trial {best.trial}: accuracy={best.accuracy:.6f} C={best.C:.6g} "
          f"ell={','.join(f'{v:.6g}' for v in best.length_scales)}")
    return 0


def _balanced_subset(data, size, rng):
    per = size // 2
    idx = []
    for cls in (-1.0, 1.0):
        members = np.flatnonzero(data.labels == cls)
        if members.size < per:
            raise DataError(f"subset of {size} points needs {per} per class, have {members.size}")
        idx.append(rng.choice(members, size=per, replace=False))
    return data.subset(np.sort(np.concatenate(idx)))


def cmd_benchmark(args):
    ipm_cfg, fs_cfg, _ = _configs(args)
    if args.synthetic:
        raw = windowed_problem(args.synthetic, seed=args.seed)
    elif args.data:
        raw = _load(args)
    else:
        raise ConfigError("benchmark needs --data or --synthetic")
    train, _ = balance_and_split(raw, args.train_fraction, args.seed)
    train, _ = zscore_fit_transform(train)
    if args.windows == "auto":
        windowing = build_windows(mutual_information_scores(train), train.d)
    else:
        windowing = explicit_windows(args.windows, train.d)
    spec = AnovaKernelSpec(windowing)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown preconditioner {m!r}")
    out = _out_dir(args)
    rows = []
    for size in args.sizes:
        subset = _balanced_subset(train, size, np.random.default_rng(args.seed))
        op = make_operator(subset, spec, args.operator, fs_cfg)
        for method in methods:
            for rank in args.ranks:
                status, achieved, setup, mean_it, ipm_it = "ok", "", "", "", ""
                try:
                    t0 = time.perf_counter()
                    factor = build_factor(op, method, rank, args.seed)
                    setup = f"{time.perf_counter() - t0:.6f}"
                    achieved = 0 if factor is None else factor.rank
                    if factor is not None and achieved < sum(window_ranks(rank, spec.P)):
                        status = "early-exit"
                    kind = "identity" if factor is None else "lowrank"
                    try:
                        res = ipm_train(subset, spec, op, factor, ipm_cfg, kind, fs_cfg)
                    except SolverStalled as exc:
                        res, status = exc.result, "stalled"
                    mean_it, ipm_it = _num(res.mean_gmres_iterations), len(res.records)
                except (KisError, np.linalg.LinAlgError, MemoryError) as exc:
                    status = f"failed: {exc}".replace("\n", " ")
                rows.append([method, rank, size, achieved, setup, mean_it, ipm_it, status])
                log.info("benchmark %s rank=%d n=%d: %s", method, rank, size, status)
    _write_csv(out / "benchmark.csv", BENCH_HEADER, rows)
    print(f"wrote {len(rows)} rows to {out / 'benchmark.csv'}")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "tune": cmd_tune, "benchmark": cmd_benchmark}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("gridding backend: %s", _backend.BACKEND)
    try:
        return COMMANDS[args.command](args)
    except KisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
