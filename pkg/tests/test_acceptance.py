"""Acceptance gate: one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary and on
stdout) before asserting.  ``BFGOF_PROFILE=ci`` runs the Monte Carlo
criteria with 100 replications instead of 1000.
"""

import filecmp
import math
import os
from functools import lru_cache

import mpmath as mp
import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.special import ndtr

from bfgof.cli import main
from bfgof.distributions import Normal, parse_distribution, seeded_rng
from bfgof.estimators import EmpiricalCdf, NaiveKernelCdf, TransformedKernelCdf, theoretical_bias_variance
from bfgof.gof import cvm_statistic, equivalence_gap, fit_cdf_estimator, gof_test
from bfgof.kernels import EPANECHNIKOV, GAUSSIAN
from bfgof.simulation import ExperimentConfig, run_experiment, run_reproduction
from bfgof.transforms import make_bijection

from .conftest import ACCEPTANCE
from .oracles import cvm_direct, cvm_trapezoid

PROFILE = os.environ.get("BFGOF_PROFILE", "full")
REPS = 100 if PROFILE == "ci" else 1000
WORKERS = int(os.environ.get("BFGOF_WORKERS", min(os.cpu_count() or 1, 8)))


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def _cells(result, **match):
    return [r for r in result.rows if all(r[k] == v for k, v in match.items())]


# ----------------------------------------------------------------- 1


def _direct_transformed_cdf(values, h, name, x):
    # 30-digit reference: map with g^{-1}, then average Phi((y - Y_i) / h)
    mp.mp.dps = 30
    inv = {
        "log_exp": mp.log,
        "phi_gamma": lambda t: -mp.sqrt(2) * mp.erfinv(2 * mp.exp(-t) - 1),
        "probit": lambda t: mp.sqrt(2) * mp.erfinv(2 * t - 1),
        "logit": lambda t: mp.log(t / (1 - t)),
    }[name]
    y0 = inv(mp.mpf(x))
    return float(mp.fsum(mp.ncdf((y0 - inv(mp.mpf(v))) / h) for v in values) / len(values))


def test_criterion_01_estimator_identity():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        name = ["log_exp", "phi_gamma", "probit", "logit"][rng.integers(4)]
        if name in ("log_exp", "phi_gamma"):
            d = parse_distribution(["gamma:2,2", "weibull:2,2", "lognorm:0,1", "absnorm"][rng.integers(4)])
            b = make_bijection(name, (0, math.inf))
        else:
            d = parse_distribution(["uniform:0,1", "beta:1,3", "beta:2,2", "beta:3,1"][rng.integers(4)])
            b = make_bijection(name, (0, 1))
        n = int(rng.integers(2, 60))
        x = d.sample(rng, n)
        h = float(np.exp(rng.uniform(-4, 1)))
        at = float(d.quantile(rng.uniform(0.01, 0.99)))
        got = TransformedKernelCdf(x, GAUSSIAN, h, b).cdf(at)
        want = _direct_transformed_cdf(x, h, name, at)
        worst = max(worst, abs(got - want))
    ok = worst <= 1e-12
    record(1, ok, f"max |F~ - naive on g^-1 data| = {worst:.2e} over 1000 cases (tol 1e-12)")
    assert ok


# ----------------------------------------------------------------- 2


def test_criterion_02_boundary_free():
    rng = np.random.default_rng(2)
    support = make_bijection("probit", (0, 1)).support
    failures = 0
    checked = 0
    for i in range(1000):
        a, b = rng.uniform(0.5, 4.0, size=2)
        x = rng.beta(a, b, size=int(rng.integers(10, 80)))
        x = x[(x > 0) & (x < 1)]
        tr, _ = fit_cdf_estimator(x, "transformed_kernel", "gaussian", "cv", ["probit", "logit"][i % 2], support)
        nv, _ = fit_cdf_estimator(x, "naive_kernel", "gaussian", "cv", "auto", support)
        if tr.cdf(0.0) != 0.0 or tr.cdf(1.0) != 1.0:
            failures += 1
        if x.min() < 2 * nv.h:
            checked += 1
            failures += not nv.cdf(0.0) > 0.0
        if x.max() > 1 - 2 * nv.h:
            checked += 1
            failures += not nv.cdf(1.0) < 1.0
    ok = failures == 0
    record(2, ok, f"{failures} violations; F~(0)=0, F~(1)=1 exact on 1000 samples, {checked} naive boundary checks")
    assert ok


# ----------------------------------------------------------------- 3, 4


def _table_check(target, k):
    results = run_reproduction(target, reps=REPS, seed=2024, workers=WORKERS)
    lines, ok = [], True
    ratios_ok = True
    for res in results:
        rows = res.rows
        naive = [r for r in rows if r["estimator"] == "naive_kernel"][0]
        for r in rows:
            if r["estimator"] != "transformed_kernel":
                continue
            slack = 3.0 * math.hypot(r["mc_se"], naive["mc_se"])
            good = r["value"] < naive["value"] + slack
            ok &= good
            lines.append(
                f"{r['generator']}/{r['transform']}: {r['value']:.0f}+-{r['mc_se']:.0f} vs naive "
                f"{naive['value']:.0f}+-{naive['mc_se']:.0f} {'ok' if good else 'VIOLATED'}"
            )
        if target == "table1" and res.config.generator_dist.support.is_bounded:
            best = min(r["value"] for r in rows if r["estimator"] == "transformed_kernel")
            ratio = naive["value"] / best
            good = ratio > 5.0
            ratios_ok &= good
            lines.append(f"{res.config.generator}: ratio naive/transformed = {ratio:.2f} {'ok' if good else 'BELOW 5'}")
    print("\n".join(lines))
    return ok, ratios_ok, lines


def test_criterion_03_table1_orderings():
    ok, ratios_ok, lines = _table_check("table1", 3)
    bad = [s for s in lines if "VIOLATED" in s or "BELOW" in s]
    record(3, ok and ratios_ok, f"{REPS} reps; orderings {'ok' if ok else 'violated'}; bounded-row ratios "
           f"{'ok' if ratios_ok else 'not all > 5'}" + (f" [{'; '.join(bad)}]" if bad else ""))
    assert ok and ratios_ok


def test_criterion_04_table2_orderings():
    ok, _, lines = _table_check("table2", 4)
    bad = [s for s in lines if "VIOLATED" in s]
    record(4, ok, f"{REPS} reps; orderings {'ok' if ok else 'violated'}" + (f" [{'; '.join(bad)}]" if bad else ""))
    assert ok


# ----------------------------------------------------------------- 5, 6


@lru_cache(maxsize=None)
def _weibull_curves():
    cfg = ExperimentConfig(
        mode="rejection_curve",
        generator="weibull:2,2",
        nulls=["weibull:2,2", "gamma:2,2"],
        estimators=[("empirical", None), ("naive_kernel", None), ("transformed_kernel", "log_exp")],
        n_list=list(range(10, 101, 10)),
        replications=REPS,
        alpha=0.01,
        seed=5,
        workers=WORKERS,
    )
    return run_experiment(cfg)


def test_criterion_05_size_control():
    res = _weibull_curves()
    cells = [r for r in _cells(res, null="weibull:2,2") if r["n"] >= 20]
    bad = [f"{r['metric'][:-11]}/{r['estimator']}@n={r['n']}:{r['value']:.1f}%" for r in cells if not 0.2 <= r["value"] <= 2.5]
    ok = not bad and len(cells) == 6 * 9
    vals = [r["value"] for r in cells]
    record(5, ok, f"{len(cells)} cells, rejection % in [{min(vals):.1f}, {max(vals):.1f}] (target [0.2, 2.5])"
           + (f" outside: {', '.join(bad)}" if bad else ""))
    assert ok


def test_criterion_06_power_ordering():
    res = _weibull_curves()
    tr = {r["n"]: r["value"] for r in _cells(res, null="gamma:2,2", metric="ks_reject_pct", estimator="transformed_kernel")}
    edf = {r["n"]: r["value"] for r in _cells(res, null="gamma:2,2", metric="ks_reject_pct", estimator="empirical")}
    below = [n for n in tr if tr[n] < edf[n]]
    ok = not below and all(tr[n] >= 99.0 for n in tr if n >= 20)
    record(6, ok, "KS_log vs KS_n: " + ", ".join(f"n={n}:{tr[n]:.1f}/{edf[n]:.1f}" for n in sorted(tr)))
    assert ok


# ----------------------------------------------------------------- 7


def test_criterion_07_extreme_separation():
    cfg = ExperimentConfig(
        mode="rejection_curve",
        generator="beta:1,3",
        nulls=["beta:3,1"],
        estimators=[("empirical", None), ("naive_kernel", None), ("transformed_kernel", "probit"), ("transformed_kernel", "logit")],
        n_list=[10],
        replications=REPS,
        seed=7,
        workers=WORKERS,
    )
    res = run_experiment(cfg)
    vals = {f"{r['metric'][:-11]}/{r['estimator']}/{r['transform']}": r["value"] for r in res.rows}
    ok = all(v == 100.0 for v in vals.values()) and len(vals) == 8
    record(7, ok, "n=10 rejection %: " + ", ".join(f"{k}={v:g}" for k, v in vals.items()))
    assert ok


# ----------------------------------------------------------------- 8


def test_criterion_08_hard_case():
    cfg = ExperimentConfig(
        mode="rejection_curve",
        generator="lognorm:0,1",
        nulls=["absnorm"],
        estimators=[("transformed_kernel", "log_exp")],
        n_list=[40, 100],
        replications=REPS,
        stats=["ks"],
        seed=8,
        workers=WORKERS,
    )
    res = run_experiment(cfg)
    v = {r["n"]: r["value"] for r in res.rows}
    ok = v[40] < 100.0 and v[100] >= 99.0
    record(8, ok, f"KS_log lognorm vs absnorm: n=40 {v[40]:.1f}% (<100), n=100 {v[100]:.1f}% (>=99)")
    assert ok


# ----------------------------------------------------------------- 9


def test_criterion_09_equivalence():
    null = parse_distribution("uniform:0,1")
    b = make_bijection("probit", (0, 1))
    med = {}
    for fam in ("ks", "cvm"):
        for n in (100, 2000):
            gaps = [equivalence_gap(null.sample(seeded_rng(9, s), n), null, "gaussian", b, fam) for s in range(200)]
            med[fam, n] = float(np.median(gaps))
    ok = all(med[f, 2000] < med[f, 100] for f in ("ks", "cvm"))
    record(9, ok, ", ".join(f"{f} median gap n=100 {med[f, 100]:.4f} -> n=2000 {med[f, 2000]:.4f}" for f in ("ks", "cvm")))
    assert ok


# ----------------------------------------------------------------- 10, 11


def _mc_transformed_values(d, b, h, n, xs, reps, seed):
    xs = np.asarray(xs, dtype=float)
    y0 = b.inverse(xs)
    out = np.empty((reps, xs.size))
    for r in range(reps):
        y = b.inverse(d.sample(seeded_rng(seed, r), n))
        out[r] = ndtr((y0[:, None] - y[None, :]) / h).mean(axis=1)
    return out


def test_criterion_10_bias_variance_expansion():
    d = parse_distribution("gamma:2,2")
    b = make_bijection("log", (0, math.inf))
    n, reps = 200, 20000
    h = n ** (-1.0 / 3.0)
    xs = [1.0, 2.0, 6.0]
    vals = _mc_transformed_values(d, b, h, n, xs, reps, seed=10)
    ok, parts = True, []
    for j, x in enumerate(xs):
        v = vals[:, j]
        F = float(d.cdf(x))
        bias_mc = v.mean() - F
        se_bias = v.std(ddof=1) / math.sqrt(reps)
        var_mc = v.var(ddof=1)
        # standard error of a sample variance: sqrt((m4 - s^4) / reps)
        se_var = math.sqrt((np.mean((v - v.mean()) ** 4) - var_mc**2) / reps)
        bias_th, var_th = theoretical_bias_variance(d, b, GAUSSIAN, h, n, x)
        h_term = abs(F * (1 - F) / n - var_th)
        good_b = abs(bias_mc - bias_th) <= 3 * se_bias + 0.5 * abs(bias_th)
        good_v = abs(var_mc - var_th) <= 3 * se_var + 0.5 * h_term
        ok &= good_b and good_v
        parts.append(f"x={x:g}: bias {bias_mc:.5f} vs {bias_th:.5f}, var {var_mc:.3e} vs {var_th:.3e}")
    record(10, ok, "; ".join(parts))
    assert ok


def test_criterion_11_asymptotic_normality():
    d = parse_distribution("gamma:2,2")
    b = make_bijection("log", (0, math.inf))
    n, reps = 1000, 2000
    h = n ** (-1.0 / 3.0)
    x0 = float(d.quantile(0.5))
    v = _mc_transformed_values(d, b, h, n, [x0], reps, seed=11)[:, 0]
    bias, var = theoretical_bias_variance(d, b, GAUSSIAN, h, n, x0)
    z = (v - (0.5 + bias)) / math.sqrt(var)
    report = gof_test(z, Normal(), family="ks", estimator="edf", alpha=0.001)
    ref = stats.kstest(z, "norm")
    ok = not report.reject and ref.pvalue > 0.001
    record(11, ok, f"KS vs N(0,1) of standardised F~(median): p={report.p_value:.3f} (scipy {ref.pvalue:.3f}), alpha=0.001")
    assert ok


# ----------------------------------------------------------------- 12


def test_criterion_12_numerical_oracles():
    worst_k = 0.0
    for k in (GAUSSIAN, EPANECHNIKOV):
        lim = (-np.inf, np.inf) if math.isinf(k.support_radius) else (-k.support_radius, k.support_radius)
        K = lambda v: float(k.pdf(np.array(v)))
        W = lambda v: float(k.cdf(np.array(v)))
        ref = (
            quad(lambda v: v * v * K(v), *lim, epsabs=1e-13)[0],
            quad(lambda v: v * K(v) * W(v), *lim, epsabs=1e-13)[0],
            quad(lambda v: K(v) ** 2, *lim, epsabs=1e-13)[0],
        )
        worst_k = max(worst_k, max(abs(a - b) for a, b in zip(k.moments, ref)))
    r1_ok = abs(GAUSSIAN.r1 - 0.2820948) <= 1e-6

    rng = np.random.default_rng(12)
    worst_classic = 0.0
    for i in range(30):
        null = parse_distribution(["gamma:2,2", "beta:2,2", "absnorm"][i % 3])
        x = null.sample(rng, int(rng.integers(1, 25)))
        worst_classic = max(worst_classic, abs(cvm_statistic(EmpiricalCdf(x), null) - cvm_direct(x, null)))
    unit = abs(cvm_statistic(EmpiricalCdf([0.5]), parse_distribution("uniform:0,1")) - 1 / 12)

    worst_quad = 0.0
    for i in range(100):
        null = parse_distribution(["gamma:2,2", "beta:2,2", "lognorm:0,1", "beta:1,3"][i % 4])
        b = make_bijection(["log", "probit", "log", "logit"][i % 4], null.support)
        x = null.sample(rng, int(rng.integers(5, 40)))
        est = TransformedKernelCdf(x, GAUSSIAN, float(np.exp(rng.uniform(-3, 0))), b)
        ref = cvm_trapezoid(est, null, 10**6)
        worst_quad = max(worst_quad, abs(cvm_statistic(est, null) - ref) / ref)
    ok = worst_k < 1e-9 and r1_ok and worst_classic < 1e-9 and unit < 1e-15 and worst_quad < 1e-6
    record(12, ok, f"kernel constants max err {worst_k:.1e}, r1 ok={r1_ok}, classical CvM max err "
           f"{worst_classic:.1e}, kernel CvM max rel err vs 1e6 trapezoid {worst_quad:.1e} (100 cases)")
    assert ok


# ----------------------------------------------------------------- 13


def test_criterion_13_determinism(tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["reproduce", "--target", "table1", "--reps", "100", "--seed", "7", "--out", str(out)]) == 0
        outs.append(out / "table1.csv")
    capsys.readouterr()
    ok = filecmp.cmp(outs[0], outs[1], shallow=False)
    record(13, ok, f"reproduce table1 --reps 100 --seed 7 twice: CSVs {'identical' if ok else 'DIFFER'}")
    assert ok
