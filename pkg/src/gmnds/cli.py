"""Command-line interface.

Structured results are written as JSON, series as CSV with a header row.
Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 rejection in
``test run``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, NumericalFailure
from .gaussmix import GaussianMixture, condense, mixture_moments, sample
from .genchi2 import GenChi2, GenChi2Mixture, MixtureCdf, quantile, sample_mixture
from .gmfilter import (LinearGmModel, consistency_run, error_series, run_filter,
                       simulate_truth)
from .harness import calibrate_filter, to_csv, validate_static, validate_sum
from .hypotest import nds_test
from .nds import gm_nds_dist, sum_nds_dist

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_REJECT = 4

FIXTURES = ("localization_1d", "localization_1d_mismatched")


def _read_json(path: str):
    if path in FIXTURES:
        text = resources.files("gmnds").joinpath(f"data/{path}.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from exc


def _load_gm(path: str) -> GaussianMixture:
    return GaussianMixture.from_dict(_read_json(path))


def _load_model(path: str) -> LinearGmModel:
    return LinearGmModel.from_dict(_read_json(path))


def _load_dist(path: str) -> GenChi2Mixture:
    data = _read_json(path)
    if isinstance(data, dict) and "components" in data:
        return GenChi2Mixture.from_dict(data)
    return GenChi2Mixture.single(GenChi2.from_dict(data))


def _read_csv_columns(path: str) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise InvalidInputError(f"{path} has no data rows")
    try:
        data = np.array([[float(v) if v != "" else np.nan for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from exc
    return rows[0], data


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_json(obj, out: str) -> None:
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _floats(values) -> list[float]:
    return [float(v) for v in values]


# gm ---------------------------------------------------------------------

def cmd_gm_moments(args):
    mean, cov = mixture_moments(_load_gm(args.gm))
    _emit_json({"mean": mean.tolist(), "cov": cov.tolist()}, args.out)


def cmd_gm_sample(args):
    x = sample(_load_gm(args.gm), args.count, args.seed)
    header = [f"x{i}" for i in range(x.shape[1])]
    _emit(to_csv(header, x.tolist()), args.out)


def cmd_gm_condense(args):
    _emit_json(condense(_load_gm(args.gm), args.target).to_dict(), args.out)


# nds --------------------------------------------------------------------

def cmd_nds_params(args):
    _emit_json(gm_nds_dist(_load_gm(args.gm)).to_dict(), args.out)


def cmd_nds_sum_params(args):
    law = sum_nds_dist([_load_gm(p) for p in args.gm], top_g=args.top_g)
    _emit_json(law.to_dict(), args.out)


# gx2 --------------------------------------------------------------------

def _points(args) -> np.ndarray:
    if args.x:
        return np.asarray(args.x, dtype=float)
    if args.grid:
        lo, hi, n = args.grid
        if int(n) < 1:
            raise InvalidInputError("grid size must be positive")
        return np.linspace(lo, hi, int(n))
    raise InvalidInputError("give --x or --grid")


def cmd_gx2_cdf(args):
    x = _points(args)
    p = MixtureCdf(_load_dist(args.dist), args.tol)(x)
    _emit(to_csv(["x", "cdf"], zip(_floats(x), _floats(p))), args.out)


def cmd_gx2_quantile(args):
    m = _load_dist(args.dist)
    cdf = MixtureCdf(m, min(1e-10, args.tol * 1e-3))
    q = [quantile(m, p, args.tol, cdf=cdf) for p in args.p]
    _emit(to_csv(["p", "quantile"], zip(_floats(args.p), q)), args.out)


def cmd_gx2_sample(args):
    q = sample_mixture(_load_dist(args.dist), args.count, args.seed)
    _emit(to_csv(["q"], ([v] for v in _floats(q))), args.out)


# test -------------------------------------------------------------------

def cmd_test_static(args):
    res = validate_static(_load_gm(args.gm), args.samples, args.seed, bins=args.bins)
    _emit_json(res.to_dict(), args.out)
    if args.hist_out:
        rows = zip(_floats(res.bin_edges[:-1]), _floats(res.bin_edges[1:]), res.counts.tolist())
        _emit(to_csv(["bin_lo", "bin_hi", "count"], rows), args.hist_out)
    if args.cdf_out:
        rows = zip(_floats(res.exact.grid), _floats(res.exact.empirical),
                   _floats(res.exact.theoretical), _floats(res.naive.theoretical))
        _emit(to_csv(["q", "empirical", "exact", "naive"], rows), args.cdf_out)


def cmd_test_sum(args):
    rep = validate_sum([_load_gm(p) for p in args.gm], args.samples, args.alpha, args.seed,
                       top_g=args.top_g)
    _emit_json(rep.to_dict(), args.out)


def cmd_test_run(args):
    if args.dist:
        if args.statistic is None:
            raise InvalidInputError("--dist needs --statistic")
        res = nds_test(args.statistic, _load_dist(args.dist), args.alpha)
    elif args.model:
        model = _load_model(args.model)
        fmodel = _load_model(args.filter_model) if args.filter_model else model
        res = consistency_run(model, fmodel, args.steps, args.alpha, args.threshold,
                              args.max_m, args.top_g, args.seed, mode=args.mode,
                              start=args.start, spacing=args.spacing)
    else:
        raise InvalidInputError("give --dist with --statistic, or --model")
    _emit_json(res.to_dict(), args.out)
    return EXIT_REJECT if res.reject else EXIT_OK


# filter -----------------------------------------------------------------

def _state_header(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def cmd_filter_simulate(args):
    model = _load_model(args.model)
    states, ys = simulate_truth(model, args.steps, args.seed)
    header = ["step"] + _state_header("x", model.n) + _state_header("y", model.p)
    rows = ([k] + _floats(states[k]) + _floats(ys[k]) for k in range(states.shape[0]))
    _emit(to_csv(header, rows), args.out)


def cmd_filter_run(args):
    model = _load_model(args.model)
    if args.measurements:
        header, data = _read_csv_columns(args.measurements)
        ycols = [i for i, h in enumerate(header) if h.startswith("y")]
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        if len(ycols) != model.p:
            raise InvalidInputError("measurement CSV needs one y column per measurement coordinate")
        ys = data[:, ycols]
        states = data[:, xcols] if len(xcols) == model.n else None
    else:
        states, ys = simulate_truth(model, args.steps, args.seed)
    trace = run_filter(model, ys, states=states)
    n, p = model.n, model.p
    header = ["step"]
    if states is not None:
        header += _state_header("x", n)
    header += _state_header("y", p) + _state_header("mean", n) + _state_header("var", n)
    if states is not None:
        header += _state_header("err", n) + _state_header("bound", n)
        errors, bounds = error_series(trace)
    header.append("components")
    rows = []
    for k in range(len(trace)):
        row = [k]
        if states is not None:
            row += _floats(states[k])
        row += _floats(ys[k]) + _floats(trace.means[k]) + _floats(np.diag(trace.covs[k]))
        if states is not None:
            row += _floats(errors[k]) + _floats(bounds[k])
        row.append(trace.posteriors[k].size)
        rows.append(row)
    _emit(to_csv(header, rows), args.out)


def cmd_filter_calibrate(args):
    model = _load_model(args.model)
    fmodel = _load_model(args.filter_model) if args.filter_model else model
    rep = calibrate_filter(model, fmodel, args.runs, args.alpha, args.seed, steps=args.steps,
                           max_m=args.max_m, spacing=args.spacing, threshold=args.threshold,
                           top_g=args.top_g, mode=args.mode, start=args.start,
                           workers=args.workers)
    if args.runs == 1:
        _emit_json(rep.to_dict(), args.out)
    else:
        _emit_json(rep.to_dict(include_runs=args.per_run), args.out)


# parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")


def _consistency_flags(p: argparse.ArgumentParser, default_steps: int) -> None:
    p.add_argument("--filter-model", help="model used by the filter (default: --model)")
    p.add_argument("--steps", type=int, default=default_steps)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-m", type=int, default=3, help="number of test steps")
    p.add_argument("--spacing", type=int, default=None,
                   help="fixed step spacing; default picks it from the error autocorrelation")
    p.add_argument("--threshold", type=float, default=0.02, help="autocorrelation threshold")
    p.add_argument("--start", type=int, default=5)
    p.add_argument("--top-g", type=int, default=None)
    p.add_argument("--mode", choices=("state", "measurement"), default="state")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmnds", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    def add(group_parser, name, func, help_text):
        p = group_parser.add_parser(name, help=help_text)
        _common(p)
        p.set_defaults(func=func)
        return p

    gm = groups.add_parser("gm", help="Gaussian mixture utilities").add_subparsers(dest="cmd", required=True)
    p = add(gm, "moments", cmd_gm_moments, "overall mean and covariance")
    p.add_argument("--gm", required=True)
    p = add(gm, "sample", cmd_gm_sample, "draw samples (CSV)")
    p.add_argument("--gm", required=True)
    p.add_argument("--count", type=int, required=True)
    p = add(gm, "condense", cmd_gm_condense, "reduce the component count")
    p.add_argument("--gm", required=True)
    p.add_argument("--target", type=int, required=True)

    nds = groups.add_parser("nds", help="NDS laws").add_subparsers(dest="cmd", required=True)
    p = add(nds, "params", cmd_nds_params, "NDS law of one mixture")
    p.add_argument("--gm", required=True)
    p = add(nds, "sum-params", cmd_nds_sum_params, "NDS law of a sum over independent mixtures")
    p.add_argument("--gm", required=True, nargs="+")
    p.add_argument("--top-g", type=int, default=None)

    gx2 = groups.add_parser("gx2", help="generalized chi-square laws").add_subparsers(dest="cmd", required=True)
    for name, func, text in (("cdf", cmd_gx2_cdf, "CDF values (CSV)"),
                             ("quantile", cmd_gx2_quantile, "quantiles (CSV)"),
                             ("sample", cmd_gx2_sample, "draws (CSV)")):
        p = add(gx2, name, func, text)
        p.add_argument("--dist", required=True, help="GenChi2 or GenChi2Mixture JSON")
        if name == "cdf":
            p.add_argument("--x", type=float, nargs="+")
            p.add_argument("--grid", type=float, nargs=3, metavar=("LO", "HI", "N"))
            p.add_argument("--tol", type=float, default=1e-10)
        elif name == "quantile":
            p.add_argument("--p", type=float, nargs="+", required=True)
            p.add_argument("--tol", type=float, default=1e-6)
        else:
            p.add_argument("--count", type=int, required=True)

    test = groups.add_parser("test", help="validation experiments and NDS tests").add_subparsers(dest="cmd", required=True)
    p = add(test, "static", cmd_test_static, "empirical vs exact and naive CDF of one mixture")
    p.add_argument("--gm", required=True)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--hist-out", help="histogram CSV")
    p.add_argument("--cdf-out", help="CDF comparison CSV")
    p = add(test, "sum", cmd_test_sum, "threshold coverage for a sum of mixtures")
    p.add_argument("--gm", required=True, nargs="+")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--top-g", type=int, default=None)
    p = add(test, "run", cmd_test_run, "one NDS test; exit code 4 on rejection")
    p.add_argument("--dist", help="reference law JSON")
    p.add_argument("--statistic", type=float, help="observed statistic")
    p.add_argument("--model", help="model JSON or fixture name for a filter consistency run")
    _consistency_flags(p, default_steps=35)
    p.set_defaults(alpha=0.05)

    flt = groups.add_parser("filter", help="GM filter").add_subparsers(dest="cmd", required=True)
    p = add(flt, "simulate", cmd_filter_simulate, "ground truth and measurements (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--steps", type=int, required=True)
    p = add(flt, "run", cmd_filter_run, "filter trace (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--measurements", help="CSV with y columns (x columns optional)")
    p.add_argument("--steps", type=int, default=100, help="simulate this many steps when no CSV is given")
    p = add(flt, "calibrate", cmd_filter_calibrate, "rejection rate over repeated runs")
    p.add_argument("--model", required=True)
    _consistency_flags(p, default_steps=35)
    p.set_defaults(spacing=15)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--per-run", action="store_true", help="include every run's result")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
