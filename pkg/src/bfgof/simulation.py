"""Seeded Monte Carlo experiments.

Two kinds of experiment are supported:

* ``aise_cdf`` / ``aise_pdf``: average integrated squared error of kernel
  distribution or density estimators against the generating distribution.
* ``rejection_curve``: percentage of rejections of one or more null
  hypotheses, for every test statistic variant and sample size.

Replication ``r`` draws its data from the RNG stream ``(seed, r)``; the
largest sample is drawn once and smaller sizes use its leading values.
Per-replication values are reduced with :func:`math.fsum`, which is exactly
rounded and therefore independent of summation order, so results do not
depend on how replications are spread over worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .bandwidth import bandwidth_for
from .distributions import ReferenceDistribution, parse_distribution, seeded_rng
from .errors import ConfigError, SupportError
from .estimators import EmpiricalCdf, NaiveKernelCdf, TransformedKernelCdf, as_sample
from .gof import (
    ESTIMATOR_ALIASES,
    KS_GRID,
    cvm_critical,
    cvm_statistic,
    ks_critical,
    ks_statistic,
    resolve_bijection,
)
from .kernels import get_kernel
from .transforms import auto_bijection

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "run_aise",
    "run_rejection_curve",
    "run_experiment",
    "emit_outputs",
    "integrated_squared_error",
    "csv_text",
    "reproduce_configs",
    "run_reproduction",
    "CSV_COLUMNS",
    "TARGETS",
]

CSV_COLUMNS = ("mode", "generator", "null", "estimator", "transform", "n", "metric", "value", "mc_se", "seed")
MODES = ("aise_cdf", "aise_pdf", "rejection_curve")
ISE_INTERVALS = 1024
ISE_TAIL = 1e-6
AISE_UNITS = 1e5

_HALF_LINE = ("gamma:2,2", "weibull:2,2", "lognorm:0,1", "absnorm")
_UNIT = ("uniform:0,1", "beta:1,3", "beta:2,2", "beta:3,1")
TARGETS = ("table1", "table2", "fig3", "fig4", "fig5")


@dataclass
class ExperimentConfig:
    """Everything that determines an experiment's output.

    ``estimators`` holds ``(kind, transform)`` pairs, e.g.
    ``("empirical", None)``, ``("naive_kernel", None)`` or
    ``("transformed_kernel", "log")``.  ``bandwidth_rule`` is ``"cv"`` or
    ``"deterministic"``; ``stats`` lists the test families of a rejection
    curve.
    """

    mode: str
    generator: str
    nulls: list = field(default_factory=list)
    estimators: list = field(default_factory=list)
    n_list: list = field(default_factory=lambda: [50])
    replications: int = 1000
    alpha: float = 0.01
    seed: int = 0
    kernel: str = "gaussian"
    bandwidth_rule: str = "cv"
    stats: list = field(default_factory=lambda: ["ks", "cvm"])
    convention: str = "scale"
    ks_grid: int = KS_GRID
    cv_method: str = "auto"
    naive_domain: str = "transformed"
    keep_raw: bool = False
    workers: int = 1

    def __post_init__(self):
        self.estimators = [tuple(e) if not isinstance(e, str) else (e, None) for e in self.estimators]
        self.estimators = [(ESTIMATOR_ALIASES.get(k, k), t) for k, t in self.estimators]
        self.n_list = [int(n) for n in self.n_list]
        self.nulls = list(self.nulls)
        self.stats = [s.lower() for s in self.stats]
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.n_list or min(self.n_list) < 1:
            raise ConfigError("n_list must hold positive sample sizes")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.naive_domain not in ("transformed", "original"):
            raise ConfigError("naive_domain must be 'transformed' or 'original'")
        if self.bandwidth_rule not in ("cv", "deterministic"):
            raise ConfigError("bandwidth_rule must be 'cv' or 'deterministic'")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        get_kernel(self.kernel)
        gen = self.generator_dist
        for kind, transform in self.estimators:
            if kind not in ("empirical", "naive_kernel", "transformed_kernel"):
                raise ConfigError(f"unknown estimator kind {kind!r}")
            if kind == "transformed_kernel":
                # raises ConfigError when the transform does not fit the support
                resolve_bijection(transform or "auto", gen.support)
            if kind == "empirical" and self.mode == "aise_pdf":
                raise ConfigError("the empirical estimator has no density")
        if self.mode == "rejection_curve":
            if not self.nulls:
                raise ConfigError("rejection_curve needs at least one null")
            if not set(self.stats) <= {"ks", "cvm"} or not self.stats:
                raise ConfigError("stats must be drawn from 'ks' and 'cvm'")
            for s in self.null_dists:
                if not gen.support.issubset(s.support):
                    raise SupportError(f"null {s.spec()} does not cover the generator support")
        if self.bandwidth_rule == "cv" and min(self.n_list) < 10 and self._needs_bandwidth:
            raise ConfigError("cross-validation needs n >= 10")

    @property
    def _needs_bandwidth(self) -> bool:
        return any(k != "empirical" for k, _ in self.estimators)

    @property
    def generator_dist(self) -> ReferenceDistribution:
        return parse_distribution(self.generator, self.convention)

    @property
    def null_dists(self) -> list[ReferenceDistribution]:
        return [parse_distribution(s, self.convention) for s in self.nulls]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = [list(e) for e in self.estimators]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "mode" not in data or "generator" not in data:
            raise ConfigError("config needs 'mode' and 'generator'")
        return cls(**data)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    raw: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def config_hash(self) -> str:
        return self.config.digest()


# ---------------------------------------------------------------- helpers


def _fit(kind, transform, sample, support, config, target="cdf"):
    """Fitted estimator for one replication."""
    if kind == "empirical":
        return EmpiricalCdf(sample)
    kernel = get_kernel(config.kernel)
    b = resolve_bijection(transform or "auto", support) if kind == "transformed_kernel" else None
    ref = None if support.is_real_line else auto_bijection(support)
    opts = {"method": config.cv_method} if target == "cdf" and config.bandwidth_rule == "cv" else {}
    h, _ = bandwidth_for(
        sample, kind, kernel, b, config.bandwidth_rule, target,
        naive_domain=config.naive_domain, reference=ref, **opts,
    )
    if b is None:
        return NaiveKernelCdf(sample, kernel, h)
    return TransformedKernelCdf(sample, kernel, h, b)


def _draw(config: ExperimentConfig, r: int) -> np.ndarray:
    gen = config.generator_dist
    return gen.sample(seeded_rng(config.seed, r), max(config.n_list))


def _ise_grid(truth: ReferenceDistribution):
    s = truth.support
    lo = max(float(truth.quantile(ISE_TAIL)), s.lower)
    hi = min(float(truth.quantile(1.0 - ISE_TAIL)), s.upper)
    x = np.linspace(lo, hi, ISE_INTERVALS + 1)
    w = np.full(x.size, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * (hi - lo) / (3.0 * ISE_INTERVALS)


def integrated_squared_error(estimate, truth: ReferenceDistribution, target: str = "cdf") -> float:
    """``int (estimate - truth)^2 dx`` over the truth's central quantile range.

    ``estimate`` is a vectorised callable; ``target`` selects whether it is
    compared with the truth's CDF or its density.
    """
    x, w = _ise_grid(truth)
    ref = truth.cdf(x) if target == "cdf" else truth.pdf(x)
    return float(np.dot(w, (np.asarray(estimate(x), dtype=float) - ref) ** 2))


def _aise_replication(args):
    config, r = args
    truth = config.generator_dist
    target = "cdf" if config.mode == "aise_cdf" else "pdf"
    data = _draw(config, r)
    out = {}
    for n in config.n_list:
        smp = as_sample(data[:n], truth.support)
        for kind, transform in config.estimators:
            est = _fit(kind, transform, smp, truth.support, config, target)
            fn = est.cdf if target == "cdf" else est.pdf
            out[(kind, transform, n)] = integrated_squared_error(fn, truth, target)
    return out


def _rejection_replication(args):
    config, r = args
    gen = config.generator_dist
    nulls = config.null_dists
    crit = {"ks": ks_critical(config.alpha), "cvm": cvm_critical(config.alpha)}
    data = _draw(config, r)
    out = {}
    for n in config.n_list:
        smp = as_sample(data[:n], gen.support)
        for kind, transform in config.estimators:
            est = _fit(kind, transform, smp, gen.support, config)
            for null in nulls:
                for stat in config.stats:
                    if stat == "ks":
                        d, _ = ks_statistic(est, null, config.ks_grid)
                        rej = math.sqrt(n) * d > crit["ks"]
                    else:
                        rej = cvm_statistic(est, null) > crit["cvm"]
                    out[(kind, transform, n, null.spec(), stat)] = bool(rej)
    return out


def _map(fn, config: ExperimentConfig) -> list:
    jobs = [(config, r) for r in range(config.replications)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    return [fn(j) for j in jobs]


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


# ---------------------------------------------------------------- runners


def run_aise(config: ExperimentConfig) -> ExperimentResult:
    """AISE (in units of 1e-5) of every estimator at every sample size."""
    if config.mode not in ("aise_cdf", "aise_pdf"):
        raise ConfigError("run_aise needs mode 'aise_cdf' or 'aise_pdf'")
    t0 = time.perf_counter()
    reps = _map(_aise_replication, config)
    rows, raw = [], {}
    for kind, transform in config.estimators:
        for n in config.n_list:
            vals = [rep[(kind, transform, n)] * AISE_UNITS for rep in reps]
            mean, se = _mean_se(vals)
            rows.append(_row(config, "", kind, transform, n, f"{config.mode}_x1e5", mean, se))
            if config.keep_raw:
                raw[(kind, transform or "", n)] = vals
    return ExperimentResult(config, rows, raw, time.perf_counter() - t0)


def run_rejection_curve(config: ExperimentConfig) -> ExperimentResult:
    """Rejection percentage for each (null, statistic, estimator, n) cell."""
    if config.mode != "rejection_curve":
        raise ConfigError("run_rejection_curve needs mode 'rejection_curve'")
    t0 = time.perf_counter()
    reps = _map(_rejection_replication, config)
    m = len(reps)
    rows, raw = [], {}
    for null in config.null_dists:
        for stat in config.stats:
            for kind, transform in config.estimators:
                for n in config.n_list:
                    key = (kind, transform, n, null.spec(), stat)
                    hits = sum(rep[key] for rep in reps)
                    p = hits / m
                    se = 100.0 * math.sqrt(p * (1.0 - p) / m)
                    rows.append(_row(config, null.spec(), kind, transform, n, f"{stat}_reject_pct", 100.0 * p, se))
                    if config.keep_raw:
                        raw[(null.spec(), stat, kind, transform or "", n)] = [rep[key] for rep in reps]
    return ExperimentResult(config, rows, raw, time.perf_counter() - t0)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    if config.mode == "rejection_curve":
        return run_rejection_curve(config)
    return run_aise(config)


def _row(config, null, kind, transform, n, metric, value, se) -> dict:
    return {
        "mode": config.mode,
        "generator": config.generator_dist.spec(),
        "null": null,
        "estimator": kind,
        "transform": transform or "",
        "n": n,
        "metric": metric,
        "value": value,
        "mc_se": se,
        "seed": config.seed,
    }


# ---------------------------------------------------------------- targets


def _pairs(support_kind: str, with_edf: bool) -> list:
    transforms = ("log_exp", "phi_gamma") if support_kind == "half" else ("probit", "logit")
    base = [("empirical", None)] if with_edf else []
    return base + [("naive_kernel", None)] + [("transformed_kernel", t) for t in transforms]


def reproduce_configs(target: str, reps: int = 1000, seed: int = 0, **overrides) -> list[ExperimentConfig]:
    """Experiment configurations behind one table or figure of the study."""
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    common = dict(replications=reps, seed=seed, **overrides)
    if target in ("table1", "table2"):
        mode = "aise_cdf" if target == "table1" else "aise_pdf"
        out = []
        for gens, kind in ((_HALF_LINE, "half"), (_UNIT, "unit")):
            for g in gens:
                out.append(ExperimentConfig(mode=mode, generator=g, estimators=_pairs(kind, False), n_list=[50], **common))
        return out
    curve = dict(n_list=list(range(10, 101, 10)), alpha=0.01, **common)
    if target == "fig3":
        return [ExperimentConfig("rejection_curve", "weibull:2,2", list(_HALF_LINE), _pairs("half", True), **curve)]
    if target == "fig4":
        return [ExperimentConfig("rejection_curve", "lognorm:0,1", list(_HALF_LINE), _pairs("half", True), **curve)]
    return [ExperimentConfig("rejection_curve", "beta:1,3", list(_UNIT), _pairs("unit", True), **curve)]


def run_reproduction(target: str, reps: int = 1000, seed: int = 0, **overrides) -> list[ExperimentResult]:
    return [run_experiment(c) for c in reproduce_configs(target, reps, seed, **overrides)]


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def csv_text(results: Iterable[ExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for res in results:
        for row in res.rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _svg_charts(results: list[ExperimentResult], out_dir: str, stem: str) -> list[str]:
    curves = [r for r in results if r.config.mode == "rejection_curve" and r.rows]
    if not curves:
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "bfgof"
    written = []
    for res in curves:
        cfg = res.config
        nulls = [d.spec() for d in cfg.null_dists]
        fig, axes = plt.subplots(len(cfg.stats), len(nulls), figsize=(3.2 * len(nulls), 2.8 * len(cfg.stats)), squeeze=False)
        for i, stat in enumerate(cfg.stats):
            for j, null in enumerate(nulls):
                ax = axes[i][j]
                for kind, transform in cfg.estimators:
                    pts = sorted(
                        (row["n"], row["value"])
                        for row in res.rows
                        if row["null"] == null
                        and row["metric"] == f"{stat}_reject_pct"
                        and row["estimator"] == kind
                        and row["transform"] == (transform or "")
                    )
                    label = kind if not transform else f"{kind}[{transform}]"
                    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
                ax.set_title(f"{stat.upper()}  H0: {null}", fontsize=8)
                ax.set_xlabel("n", fontsize=8)
                ax.set_ylabel("rejection %", fontsize=8)
                ax.tick_params(labelsize=7)
        axes[0][0].legend(fontsize=6)
        fig.suptitle(f"data: {cfg.generator_dist.spec()}", fontsize=9)
        fig.tight_layout()
        name = f"{stem}_{cfg.generator_dist.spec().replace(':', '_').replace(',', '_')}.svg"
        path = os.path.join(out_dir, name)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def emit_outputs(results: Sequence[ExperimentResult], out_dir: str, stem: str = "results") -> dict:
    """Write ``<stem>.csv``, one SVG chart per rejection experiment and a manifest.

    Returns the manifest.  The CSV depends only on the configurations, so a
    rerun with the same seeds reproduces it byte for byte.
    """
    results = list(results)
    try:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        with open(csv_path, "w", newline="") as fh:
            fh.write(csv_text(results))
        charts = _svg_charts(results, out_dir, stem)
        manifest = {
            "version": __version__,
            "experiments": [
                {"config": r.config.to_dict(), "config_hash": r.config_hash, "wall_time_s": r.wall_time}
                for r in results
            ],
            "wall_time_s": sum(r.wall_time for r in results),
            "files": [os.path.basename(p) for p in [csv_path, *charts]],
        }
        with open(os.path.join(out_dir, f"{stem}_manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ConfigError(f"cannot write outputs to {out_dir}: {exc}") from exc
    return manifest
