"""``eotmix`` command line: sample, fit, eval, verify.

Exit codes: 0 success, 1 a verification check failed, 2 usage error,
3 runtime error (bad input files, degenerate fits, identity regression).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .bcd import FitSettings, fit
from .eot import semi_relaxed_solve, sinkhorn
from .errors import EmptyComponent, EotMixError
from .mixture import cost_matrix, nll, sample_gmm
from .verify import IDENTITY_TOL, run_all

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

DEFAULT_VERIFY_SEED = 42
DEFAULT_VERIFY_TRIALS = 20


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def cmd_sample(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    params = io.read_model(args.model)
    data = sample_gmm(params, args.n, args.seed)
    io.write_dataset(data, args.out)
    print(f"n = {data.n}")
    print(f"d = {data.dimension}")
    print(f"K = {params.n_components}")
    return EXIT_OK


def cmd_fit(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    if args.max_sweeps < 1:
        raise UsageError("--max-sweeps must be at least 1")
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    data = io.read_dataset(args.data)
    if args.k > data.n:
        raise UsageError(f"--k {args.k} exceeds the number of points n = {data.n}")
    settings = FitSettings(max_sweeps=args.max_sweeps, nll_tolerance=args.tol, seed=args.seed)
    report = fit(data, args.k, settings)
    io.write_model(report.final_params, args.out_model)
    io.write_fit_report(report, args.out_report)
    print(f"sweeps = {report.sweeps_used}")
    print(f"termination = {report.termination_reason.value}")
    print(f"nll = {_fmt(report.nll_trajectory[-1])}")
    return EXIT_OK


def cmd_eval(args) -> int:
    data = io.read_dataset(args.data)
    params = io.read_model(args.model)
    if params.dimension != data.dimension:
        raise EotMixError(
            f"model dimension {params.dimension} does not match data dimension {data.dimension}"
        )
    C = cost_matrix(params, data)
    mean_nll = nll(params, data) / data.n
    semi = semi_relaxed_solve(params.weights.weights, C).value
    ot = sinkhorn(np.full(data.n, 1.0 / data.n), params.weights.weights, C)
    gap = ot.value - mean_nll
    print(f"nll_per_point = {_fmt(mean_nll)}")
    print(f"semi_relaxed_eot = {_fmt(semi)}")
    print(f"sinkhorn_ot = {_fmt(ot.value)}")
    print(f"gap = {_fmt(gap)}")
    if not ot.converged:
        print("warning: Sinkhorn stopped before reaching its marginal tolerance", file=sys.stderr)
    if abs(semi - mean_nll) > IDENTITY_TOL:
        print(
            f"error: semi-relaxed value differs from nll/n by {abs(semi - mean_nll):.3e}",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    report = run_all(args.seed, args.trials)
    io.write_verification_report(report, args.out)
    for rec in report.checks:
        status = "PASS" if rec.passed else "FAIL"
        print(
            f"{status} {rec.name}: max residual {rec.max_residual:.3e} "
            f"(tolerance {rec.tolerance:.0e}, {rec.instances_run} instances)"
        )
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eotmix",
        description="Gaussian mixtures fitted and checked through entropic optimal transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a labeled dataset from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit a shared-covariance GMM by block-coordinate descent")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-report", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="print nll/n, the semi-relaxed and Sinkhorn values and the gap")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    p.add_argument("--seed", type=int, default=DEFAULT_VERIFY_SEED)
    p.add_argument("--trials", type=int, default=DEFAULT_VERIFY_TRIALS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"eotmix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyComponent as exc:
        print(f"eotmix {args.command}: empty component: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (EotMixError, OSError, ValueError) as exc:
        print(f"eotmix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
