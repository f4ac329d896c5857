"""Command line front end: est / reg / experiment subcommands."""
from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import kernels, report
from .data_io import expand_poly, load_csv
from .errors import MMDFitError
from .estimation import fit
from .experiments import (CONTAMINATION_KINDS, EXPERIMENT_NAMES, run_experiment,
                          save_plot, table_text)
from .models import MODEL_IDS
from .optim import OptimizerConfig
from .regression import REG_MODEL_IDS, fit_regression


def _parse_par(text):
    """Parameter option value: a number, a comma-separated vector, or "free"."""
    if text is None or text == "free":
        return None
    if "," in text:
        return np.array([float(t) for t in text.split(",")])
    return float(text)


def _add_control_options(p):
    p.add_argument("--method", choices=("auto", "exact", "GD", "SGD"), default="auto",
                   help="optimization strategy (default: auto)")
    p.add_argument("--maxit", type=int, default=50_000,
                   help="iteration budget (default: 50000)")
    p.add_argument("--seed", type=int, default=0,
                   help="random seed for stochastic fits (default: 0)")
    p.add_argument("--mc-samples", type=int, default=64, dest="mc_samples",
                   help="Monte-Carlo draws per stochastic gradient (default: 64)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="relative stalling tolerance (default: 1e-6)")


def _add_output_options(p):
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="stdout format (default: text)")
    p.add_argument("--json-out", metavar="PATH", default=None,
                   help="also write the JSON artifact to this path")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mmdfit",
        description="Robust parametric and regression estimation by minimum "
                    "kernel discrepancy.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    est = sub.add_parser("est", help="fit a parametric model to a sample")
    est.add_argument("data", help="CSV file; all columns form the sample")
    est.add_argument("--model", required=True,
                     help=f"model id, one of: {', '.join(MODEL_IDS)}")
    est.add_argument("--kernel", choices=kernels.FAMILIES, default=None,
                     help="kernel family (default: Gaussian)")
    est.add_argument("--bdwth", type=float, default=None,
                     help="kernel bandwidth (default: median heuristic)")
    est.add_argument("--par1", default=None,
                     help='first parameter: number, comma list, or "free"')
    est.add_argument("--par2", default=None,
                     help='second parameter: number, comma list, or "free"')
    _add_control_options(est)
    _add_output_options(est)

    reg = sub.add_parser("reg", help="fit a regression model")
    reg.add_argument("data", help="CSV file with the response and covariates")
    reg.add_argument("--response", required=True, metavar="COLUMN",
                     help="name of the response column")
    reg.add_argument("--model", default="linearGaussian",
                     help=f"model id, one of: {', '.join(REG_MODEL_IDS)}")
    reg.add_argument("--kernel-x", choices=kernels.FAMILIES, default=None,
                     dest="kernel_x", help="covariate kernel (default: Laplace)")
    reg.add_argument("--kernel-y", choices=kernels.FAMILIES, default=None,
                     dest="kernel_y", help="response kernel (default: model-specific)")
    reg.add_argument("--bdwth-x", default="0", dest="bdwth_x",
                     help='covariate bandwidth: 0, a positive number, or "auto" '
                          "(default: 0, the per-observation estimator)")
    reg.add_argument("--bdwth-y", default=None, dest="bdwth_y",
                     help='response bandwidth: a number or "auto" '
                          "(default: median heuristic / sqrt(2))")
    reg.add_argument("--intercept", action=argparse.BooleanOptionalAction,
                     default=True, help="prepend an intercept column")
    reg.add_argument("--par1", default=None,
                     help='initial coefficients: comma list or "free"')
    reg.add_argument("--par2", default=None,
                     help='second response parameter: number or "free"')
    reg.add_argument("--squared", action=argparse.BooleanOptionalAction,
                     default=True,
                     help="minimize the mean squared per-observation discrepancy")
    reg.add_argument("--poly", type=int, default=None, metavar="DEGREE",
                     help="expand every covariate into an orthogonal "
                          "polynomial block of this degree")
    reg.add_argument("--rescale-x", type=float, default=None, dest="rescale_x",
                     help="rescale factor for the automatic covariate "
                          "bandwidth (default: 1/n)")
    _add_control_options(reg)
    _add_output_options(reg)

    exp = sub.add_parser("experiment", help="run a seeded comparison study")
    exp.add_argument("name", choices=EXPERIMENT_NAMES)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--replications", type=int, default=200)
    exp.add_argument("--contamination", choices=CONTAMINATION_KINDS, default="none")
    exp.add_argument("--format", choices=("text", "json"), default="text")
    exp.add_argument("--json-out", metavar="PATH", default=None)
    exp.add_argument("--csv-out", metavar="PATH", default=None,
                     help="write the result table as CSV")
    exp.add_argument("--plot", metavar="PATH", default=None,
                     help="write a bar chart of the result table")
    return p


def _config_from(args) -> OptimizerConfig:
    return OptimizerConfig(
        method=args.method, maxit=args.maxit, mc_samples=args.mc_samples,
        tol=args.tol, seed=args.seed,
    )


def _emit(args, payload: dict, text: str) -> None:
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(report.render_json(payload))
    if args.format == "json":
        sys.stdout.write(report.render_json(payload))
    else:
        sys.stdout.write(text)


def _run_est(args) -> int:
    _, data, _ = load_csv(args.data)
    if data.shape[1] == 1:
        data = data[:, 0]
    cfg = _config_from(args)
    t0 = time.perf_counter()
    result = fit(data, args.model, par1=_parse_par(args.par1),
                 par2=_parse_par(args.par2), kernel=args.kernel,
                 bandwidth=args.bdwth, config=cfg)
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    _emit(args, report.artifact_est(result, runtime_ms), report.summary_est(result))
    return 0


def _run_reg(args) -> int:
    y, x, names = load_csv(args.data, response_column=args.response)
    if args.poly is not None:
        x, names = expand_poly(x, names, args.poly)
    bdwth_x = "auto" if args.bdwth_x == "auto" else float(args.bdwth_x)
    if args.bdwth_y in (None, "auto", "median"):
        bdwth_y = None
    else:
        bdwth_y = float(args.bdwth_y)
    par2 = _parse_par(args.par2)
    if par2 is not None:
        par2 = float(par2)
    cfg = _config_from(args)
    t0 = time.perf_counter()
    result = fit_regression(
        x, y, model=args.model, intercept=args.intercept,
        par1=_parse_par(args.par1), par2=par2,
        kernel_x=args.kernel_x, kernel_y=args.kernel_y,
        bdwth_x=bdwth_x, bdwth_y=bdwth_y, squared=args.squared,
        rescale_x=args.rescale_x, feature_names=names, config=cfg,
    )
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    _emit(args, report.artifact_reg(result, runtime_ms), report.summary_reg(result))
    return 0


def _run_experiment(args) -> int:
    payload = run_experiment(args.name, seed=args.seed,
                             replications=args.replications,
                             contamination=args.contamination)
    if args.csv_out:
        rows = payload["rows"]
        with open(args.csv_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    if args.plot:
        save_plot(payload, args.plot)
    _emit(args, payload, table_text(payload))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "est":
            return _run_est(args)
        if args.subcommand == "reg":
            return _run_reg(args)
        return _run_experiment(args)
    except (MMDFitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
