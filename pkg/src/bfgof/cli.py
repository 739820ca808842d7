"""Command line interface: ``gof estimate | test | simulate | reproduce``.

Results are printed to stdout as JSON; a one-line human summary goes to
stderr so that stdout stays machine readable.  Exit status is 0 on success,
2 for usage or configuration errors and 3 for data errors.  A test decision
never affects the exit status.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .distributions import parse_distribution
from .errors import ConfigError, DataError, GofError, SupportError
from .estimators import Sample, TransformedKernelCdf, as_sample
from .gof import KS_GRID, ESTIMATOR_ALIASES, fit_cdf_estimator, gof_test
from .kernels import KERNELS
from .simulation import TARGETS, ExperimentConfig, emit_outputs, reproduce_configs, run_experiment
from .transforms import BIJECTIONS, Interval

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(GofError):
    code = "usage_error"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- ingestion


def _read_source(source: str) -> str:
    if source == "-":
        return sys.stdin.read()
    try:
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc.strerror}") from None


def ingest_data(source: str, support: Interval | None = None) -> Sample:
    """Read one number per line (or the first CSV column) from ``source``.

    ``"-"`` reads stdin.  Blank lines and ``#`` comments are ignored; a
    non-numeric first line is treated as a header.
    """
    values = []
    seen_first = False
    for lineno, line in enumerate(_read_source(source).splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        token = text.split(",")[0].strip().strip('"')
        try:
            v = float(token)
        except ValueError:
            if not seen_first:
                seen_first = True
                continue
            raise DataError(f"non-numeric value {token!r} on line {lineno}") from None
        seen_first = True
        if not math.isfinite(v):
            raise DataError(f"non-finite value {token!r} on line {lineno}")
        values.append(v)
    if not values:
        raise DataError(f"no numeric data in {source}")
    arr = np.asarray(values)
    if support is not None:
        bad = np.flatnonzero(~support.contains(arr))
        if bad.size:
            raise SupportError(f"{bad.size} value(s) outside the support {support}, e.g. {arr[bad[0]]:g}")
    return as_sample(arr, support)


def _data_summary(smp: Sample, source: str) -> dict:
    return {"source": source, "n": smp.n, "min": float(smp.values[0]), "max": float(smp.values[-1])}


# ---------------------------------------------------------------- helpers


def _parse_h(text: str):
    if text in ("cv", "rule"):
        return text
    try:
        h = float(text)
    except ValueError:
        raise ConfigError(f"--h must be 'cv', 'rule' or a positive number, got {text!r}") from None
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError(f"--h must be positive, got {text!r}")
    return h


def _parse_grid(text: str | None):
    if text is None:
        return None
    parts = text.split(",")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) != 3:
            raise ValueError
    except (ValueError, IndexError):
        raise ConfigError(f"--h-grid must look like 'lo,hi,count', got {text!r}") from None
    return (lo, hi, count)


def _cv_options(args) -> dict:
    opts = {}
    grid = _parse_grid(args.h_grid)
    if grid is not None:
        opts["grid"] = grid
    return opts


def _emit(payload: dict, human: str | None = None) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    if human:
        sys.stderr.write(human + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _common_estimator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="data file, one value per line or CSV; '-' for stdin")
    p.add_argument("--support", help="support interval 'lo,hi' (inf allowed)")
    p.add_argument("--estimator", default="boundary-free", choices=sorted(ESTIMATOR_ALIASES))
    p.add_argument("--transform", default="auto", help="auto, log, phi-gamma, probit or logit")
    p.add_argument("--kernel", default="gaussian", choices=sorted(KERNELS))
    p.add_argument("--h", default="cv", help="'cv', 'rule' or a positive bandwidth")
    p.add_argument("--h-grid", help="CV grid as multipliers of s*n^rate: 'lo,hi,count'")
    p.add_argument(
        "--naive-domain",
        default="transformed",
        choices=("transformed", "original"),
        help="where the naive estimator's bandwidth is tuned",
    )
    p.add_argument("--diagnostics", action="store_true", help="include the bandwidth selection trace")


# ---------------------------------------------------------------- commands


def cmd_estimate(args) -> int:
    support = Interval.parse(args.support) if args.support else Interval()
    smp = ingest_data(args.data, support)
    h = _parse_h(args.h)
    est, info = fit_cdf_estimator(
        smp, args.estimator, args.kernel, h, args.transform, support, _cv_options(args), args.naive_domain
    )
    if args.at:
        try:
            xs = np.array([float(t) for t in args.at.split(",")])
        except ValueError:
            raise ConfigError(f"--at must be a comma-separated list of numbers, got {args.at!r}") from None
    else:
        if args.points < 2:
            raise ConfigError("--points must be at least 2")
        xs = np.linspace(smp.values[0], smp.values[-1], args.points)
    if args.target == "pdf":
        if est.kind == "empirical":
            raise ConfigError("the empirical estimator has no density")
        if isinstance(est, TransformedKernelCdf) and not np.all(support.contains(xs)):
            raise ConfigError("density evaluation points must lie strictly inside the support")
        vals = est.pdf(xs)
    else:
        vals = est.cdf(xs)
    if not args.diagnostics:
        info.pop("bandwidth", None)
    if args.csv:
        try:
            with open(args.csv, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["x", args.target])
                writer.writerows([repr(float(a)), repr(float(b))] for a, b in zip(np.atleast_1d(xs), np.atleast_1d(vals)))
        except OSError as exc:
            raise ConfigError(f"cannot write {args.csv}: {exc.strerror}") from None
    payload = {
        "command": "estimate",
        "config": {
            "estimator": est.kind,
            "transform": info.get("transform"),
            "kernel": args.kernel,
            "h": args.h,
            "h_grid": _parse_grid(args.h_grid),
            "naive_domain": args.naive_domain,
            "support": [_finite_or_none(support.lower), _finite_or_none(support.upper)],
            "target": args.target,
        },
        "data": _data_summary(smp, args.data),
        "fit": info,
        "x": np.atleast_1d(xs).tolist(),
        "value": np.atleast_1d(vals).tolist(),
    }
    _emit(payload, f"{est.kind} {args.target} estimate on n={smp.n}, h={info.get('h')}")
    return EXIT_OK


def cmd_test(args) -> int:
    null = parse_distribution(args.null, args.convention)
    support = Interval.parse(args.support) if args.support else null.support
    smp = ingest_data(args.data, support)
    h = _parse_h(args.h)
    report = gof_test(
        smp,
        null,
        family=args.stat,
        estimator=args.estimator,
        transform=args.transform,
        kernel=args.kernel,
        h=h,
        alpha=args.alpha,
        support=support,
        grid_size=args.ks_grid,
        cv_options=_cv_options(args),
        naive_domain=args.naive_domain,
    )
    out = report.to_dict()
    if not args.diagnostics:
        out["diagnostics"].pop("bandwidth", None)
    out["config"] = {
        "null": null.spec(),
        "convention": args.convention,
        "stat": args.stat,
        "estimator": ESTIMATOR_ALIASES[args.estimator],
        "transform": args.transform,
        "kernel": args.kernel,
        "h": args.h,
        "h_grid": _parse_grid(args.h_grid),
        "naive_domain": args.naive_domain,
        "alpha": args.alpha,
        "support": [_finite_or_none(support.lower), _finite_or_none(support.upper)],
        "ks_grid": args.ks_grid,
    }
    out["data"] = _data_summary(smp, args.data)
    _emit(out, report.summary())
    return EXIT_OK


def _load_config(path: str) -> list[ExperimentConfig]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})") from None
    items = raw if isinstance(raw, list) else [raw]
    if not all(isinstance(i, dict) for i in items):
        raise ConfigError("config must be an object or a list of objects")
    return [ExperimentConfig.from_dict(i) for i in items]


def _run_and_write(configs, out_dir: str, stem: str, command: str) -> int:
    results = [run_experiment(c) for c in configs]
    manifest = emit_outputs(results, out_dir, stem)
    payload = {
        "command": command,
        "out": out_dir,
        "files": manifest["files"],
        "experiments": [{"config": r.config.to_dict(), "config_hash": r.config_hash} for r in results],
    }
    _emit(payload, f"wrote {', '.join(manifest['files'])} to {out_dir} in {manifest['wall_time_s']:.1f}s")
    return EXIT_OK


def cmd_simulate(args) -> int:
    configs = _load_config(args.config)
    if args.workers:
        for c in configs:
            c.workers = args.workers
    stem = os.path.splitext(os.path.basename(args.config))[0]
    return _run_and_write(configs, args.out, stem, "simulate")


def cmd_reproduce(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be at least 1")
    configs = reproduce_configs(args.target, reps=args.reps, seed=args.seed, workers=args.workers or 1)
    return _run_and_write(configs, args.out, args.target, "reproduce")


# ---------------------------------------------------------------- parser


def _version_text() -> str:
    return (
        f"gof {__version__}\n"
        f"kernels: {', '.join(sorted(KERNELS))}\n"
        f"transforms: {', '.join(BIJECTIONS)}"
    )


class _VersionAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        sys.stdout.write(_version_text() + "\n")
        parser.exit()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gof", description="Boundary-free kernel estimators and goodness-of-fit tests.")
    parser.add_argument("--version", action=_VersionAction, nargs=0, help="show version and registries")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="estimate a distribution function or density")
    _common_estimator_args(p)
    p.add_argument("--target", default="cdf", choices=("cdf", "pdf"))
    p.add_argument("--at", help="comma-separated evaluation points")
    p.add_argument("--points", type=int, default=51, help="grid size over the data range when --at is absent")
    p.add_argument("--csv", help="also write the (x, value) pairs to this CSV file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="goodness-of-fit test against a fully specified null")
    _common_estimator_args(p)
    p.add_argument("--null", required=True, help="e.g. weibull:2,2, gamma:2,2, lognorm:0,1, absnorm, beta:1,3")
    p.add_argument("--stat", default="ks", choices=("ks", "cvm"))
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--convention", default="scale", choices=("scale", "rate"))
    p.add_argument("--ks-grid", type=int, default=KS_GRID)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="run experiments from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="rerun one table or figure of the simulation study")
    p.add_argument("--target", required=True, choices=TARGETS)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (DataError, SupportError) as exc:
        sys.stderr.write(f"{exc.code}: {exc}\n")
        return EXIT_DATA
    except GofError as exc:
        sys.stderr.write(f"{exc.code}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
