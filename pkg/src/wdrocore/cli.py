"""Command-line front end: ``wdrocore <command> [flags]``.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical or
domain error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bench import (
    BenchConfig,
    default_threads,
    emit_csv,
    emit_plotdata,
    format_csv,
    run_bench,
    substream,
    summarize,
)
from .coreset import Coreset, build_grid, sample_coreset, uniform_coreset
from .dataio import (
    CLASSIFICATION,
    Dataset,
    MetricSpec,
    flip_labels,
    load_dataset,
    normalize,
    perturb_gaussian,
    synth_blobs,
    write_libsvm,
)
from .errors import BudgetError, DomainError, ParseError, TaskError, UnsupportedError
from .losses import LossModel
from .wdro import TrainResult, WdroProblem, brute_force_risk, train, worst_case_risk

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model_flags(p, sigma_required=True):
    p.add_argument("--input", required=True, help="LIBSVM or .csv training data")
    p.add_argument("--loss", default="logistic",
                   help="svm | logistic | huber:<delta> | hypercube-svm:<side> (default: logistic)")
    p.add_argument("--sigma", type=float, required=sigma_required, help="Wasserstein radius")
    p.add_argument("--gamma", type=float, default=7.0, help="label-distance weight (default: 7)")
    p.add_argument("--norm", choices=("l1", "l2", "linf"), default="l2", help="feature norm")
    p.add_argument("--theta-anc", default=None,
                   help="ball centre: comma-separated values or a theta JSON file (default: 0)")
    p.add_argument("--lp", type=float, default=10.0, help="radius of the parameter ball")
    _data_flags(p)


def _data_flags(p):
    p.add_argument("--label-col", type=int, default=-1, help="label column for CSV input")
    p.add_argument("--header", action="store_true", help="CSV input has a header row")
    p.add_argument("--normalize", action="store_true", help="min-max scale features to [0,1]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wdrocore", description="Dual coresets for Wasserstein robust learning.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("coreset", help="build a grid-sampling (or uniform) coreset")
    _model_flags(p)
    p.add_argument("--budget", type=float, required=True,
                   help="coreset size: a fraction of n if <= 1, else an absolute count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--uniform", action="store_true", help="uniform sampling baseline instead")
    p.add_argument("--out", default="-", help="output JSON file (default: stdout)")

    p = sub.add_parser("train", help="fit the robust model, optionally on a coreset")
    _model_flags(p)
    p.add_argument("--coreset", default=None, help="coreset JSON file")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--eta0", type=float, default=None, help="base step size (default: l_p / L)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output theta JSON (default: stdout)")

    p = sub.add_parser("eval", help="worst-case risk of a parameter on the data")
    _model_flags(p)
    p.add_argument("--theta", required=True, help="theta JSON file or comma-separated values")
    p.add_argument("--coreset", default=None, help="evaluate on a coreset instead of the full set")
    p.add_argument("--brute", action="store_true", help="also print the brute-force estimate")

    p = sub.add_parser("perturb", help="add Gaussian feature noise and flip labels")
    p.add_argument("--input", required=True)
    p.add_argument("--task", choices=("classification", "regression"), default=CLASSIFICATION)
    _data_flags(p)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--flip-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling-out", default=None, help="write the scaling record here")
    p.add_argument("--out", default="-", help="output LIBSVM file (default: stdout)")

    p = sub.add_parser("bench", help="compression-rate benchmark")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable; wins over --config)")
    p.add_argument("--input", default=None, help="dataset path (overrides config 'dataset')")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: WDRO_THREADS or CPU count)")
    p.add_argument("--out-csv", default="-", help="summary CSV (default: stdout)")
    p.add_argument("--raw-csv", default=None, help="per-trial CSV")
    p.add_argument("--out-plot", default=None, help="plot-data file")

    p = sub.add_parser("selftest", help="run invariant checks on built-in tiny instances")
    p.add_argument("--seed", type=int, default=0)
    return parser


# --------------------------------------------------------------------------
# helpers

def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _vector(value, what):
    if os.path.exists(value):
        with open(value, encoding="utf-8") as fh:
            try:
                return TrainResult.theta_from_json(fh.read())
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"{what}: not a theta JSON file ({exc})") from exc
    try:
        return np.array([float(v) for v in value.split(",") if v.strip()], dtype=np.float64)
    except ValueError:
        raise UsageError(f"{what}: expected a file or comma-separated numbers, got {value!r}")


def _model(args):
    try:
        metric = MetricSpec(args.norm, args.gamma, 1)
        return LossModel.from_string(args.loss, metric)
    except ValueError as exc:
        raise UsageError(str(exc))


def _load(args, task):
    ds = load_dataset(args.input, task=task, label_column=args.label_col, header=args.header)
    if args.normalize:
        ds, _ = normalize(ds)
    return ds


def _problem(args):
    model = _model(args)
    ds = _load(args, model.task)
    theta_anc = None
    if args.theta_anc is not None:
        theta_anc = _vector(args.theta_anc, "--theta-anc")
        if theta_anc.shape != (ds.dim,):
            raise UsageError(f"--theta-anc has {theta_anc.size} entries, data has {ds.dim} features")
    problem = WdroProblem.build(ds, model, args.sigma, theta_anc, args.lp)
    coreset_path = getattr(args, "coreset", None)
    if coreset_path:
        with open(coreset_path, encoding="utf-8") as fh:
            try:
                cs = Coreset.from_json(fh.read())
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"{coreset_path}: not a coreset file ({exc})") from exc
        problem = problem.with_coreset(cs)
    return problem


def _budget(value, n):
    if value <= 0:
        raise UsageError("--budget must be positive")
    s = int(round(value * n)) if value <= 1 else int(value)
    if value > 1 and value != int(value):
        raise UsageError("an absolute --budget must be an integer")
    return min(n, max(1, s))


# --------------------------------------------------------------------------
# commands

def cmd_coreset(args):
    problem = _problem(args)
    ds = problem.ds
    s = _budget(args.budget, ds.n)
    if args.uniform:
        cs = uniform_coreset(ds, s, args.seed)
    else:
        cs = sample_coreset(ds, problem.model, args.sigma, problem.anchors, s, args.seed)
    _write(args.out, cs.to_json())
    return EXIT_OK


def cmd_train(args):
    problem = _problem(args)
    fit = train(problem, steps=args.steps, eta0=args.eta0, seed=args.seed)
    _write(args.out, fit.to_json())
    return EXIT_OK


def cmd_eval(args):
    problem = _problem(args)
    theta = _vector(args.theta, "--theta")
    if theta.shape != (problem.ds.dim,):
        raise UsageError(f"theta has {theta.size} entries, data has {problem.ds.dim} features")
    res = worst_case_risk(problem, theta)
    print(f"risk {res.risk:.12g}")
    print(f"lambda_star {res.lambda_star:.12g}")
    print(f"at_boundary {str(res.at_boundary).lower()}")
    if args.brute:
        print(f"brute_force {brute_force_risk(problem, theta):.12g}")
    return EXIT_OK


def cmd_perturb(args):
    ds = load_dataset(args.input, task=args.task, label_column=args.label_col, header=args.header)
    ds = perturb_gaussian(ds, args.noise_std, substream(args.seed, 101))
    if args.flip_rate > 0:
        ds = flip_labels(ds, args.flip_rate, substream(args.seed, 102))
    if args.normalize:
        ds, record = normalize(ds)
        if args.scaling_out:
            _write(args.scaling_out, record.to_text())
    _write(args.out, write_libsvm(ds))
    return EXIT_OK


def cmd_bench(args):
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        try:
            BenchConfig.from_text(text)  # validate the file on its own first
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}")
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = val.strip()
    if args.input is not None:
        values["dataset"] = args.input
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.trials is not None:
        values["trials"] = str(args.trials)
    if args.threads is not None:
        values["threads"] = str(args.threads)
    elif "threads" not in values:
        values["threads"] = str(default_threads())
    try:
        config = BenchConfig.from_mapping(values)
    except ValueError as exc:
        raise UsageError(str(exc))
    rows = run_bench(config)
    summary = summarize(rows)
    if args.raw_csv:
        emit_csv(rows, args.raw_csv, summary=False)
    if args.out_csv in (None, "-"):
        sys.stdout.write(format_csv(summary, summary=True))
    else:
        emit_csv(summary, args.out_csv, summary=True)
    if args.out_plot:
        emit_plotdata(summary, args.out_plot)
    return EXIT_OK


def _selftest_checks(seed):
    """Yield ``(name, passed)`` for each built-in invariant check."""
    rng = np.random.default_rng(seed)
    metric = MetricSpec("l2", 7.0, 1)
    one = Dataset(np.array([[1.0, 0.0]]), np.array([1.0]), CLASSIFICATION)
    svm = LossModel.from_string("svm", metric)
    prob = WdroProblem.build(one, svm, 0.5, None, 10.0)
    res = worst_case_risk(prob, np.array([1.0, 0.0]))
    yield "single-sample hinge risk is 0.5", abs(res.risk - 0.5) < 1e-9

    ds = synth_blobs(6, 2, seed=seed)
    for kind in ("svm", "logistic"):
        model = LossModel.from_string(kind, metric)
        prob = WdroProblem.build(ds, model, 0.3, None, 10.0)
        theta = rng.normal(size=2)
        wcr = worst_case_risk(prob, theta).risk
        bf = brute_force_risk(prob, theta, t_max=20.0, t_step=1e-2, n_lambda=400)
        yield f"{kind}: dual risk matches brute force", abs(wcr - bf) <= 2e-2 * wcr

    ds = synth_blobs(200, 3, seed=seed)
    model = LossModel.from_string("logistic", metric)
    prob = WdroProblem.build(ds, model, 0.3, rng.normal(size=3), 1.0)
    grid = build_grid(ds, model, prob.anchors)
    idx = np.sort(np.concatenate(list(grid.cells.values())))
    yield "grid cells partition the samples", bool(np.array_equal(idx, np.arange(ds.n)))
    si, sj = grid.layer_sums()
    yield "layer sums stay within 3n", si <= 3 * ds.n and sj <= 3 * ds.n
    cs = sample_coreset(ds, model, 0.3, prob.anchors, 20, seed)
    yield "coreset weights sum to one", abs(cs.weights.sum() - 1.0) < 1e-12
    theta = prob.anchors.theta_anc
    lo, hi = prob.interval(theta)
    lam = worst_case_risk(prob, theta).lambda_star
    yield "lambda_star lies in its interval", lo - 1e-9 * max(1, lo) <= lam <= hi * (1 + 1e-9)


def cmd_selftest(args):
    failed = 0
    for name, ok in _selftest_checks(args.seed):
        print(f"{'ok' if ok else 'FAIL'}  {name}")
        failed += not ok
    print(f"{failed} failed" if failed else "all checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "coreset": cmd_coreset,
    "train": cmd_train,
    "eval": cmd_eval,
    "perturb": cmd_perturb,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, BudgetError) as exc:
        print(f"wdrocore {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, TaskError, OSError) as exc:
        print(f"wdrocore {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DomainError, UnsupportedError, FloatingPointError, ValueError) as exc:
        print(f"wdrocore {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
