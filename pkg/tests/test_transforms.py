import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bfgof.distributions import parse_distribution
from bfgof.errors import ConfigError, DomainError
from bfgof.transforms import Interval, auto_bijection, bijection_d1_at_inverse, make_bijection

HALF = ["log_exp", "phi_gamma"]
UNIT = ["probit", "logit"]
ALL = [(n, (0, math.inf)) for n in HALF] + [(n, (0, 1)) for n in UNIT]


def test_examples():
    assert make_bijection("log_exp", (0, math.inf)).inverse(1.0) == 0.0
    assert make_bijection("probit", (0, 1)).inverse(0.5) == 0.0
    assert make_bijection("logit", (0, 1)).forward(0.0) == 0.5
    assert bijection_d1_at_inverse(make_bijection("log", (0, math.inf)), 3.0) == pytest.approx(3.0, rel=1e-15)
    assert abs(bijection_d1_at_inverse(make_bijection("probit", (0, 1)), 0.5) - 0.3989423) < 1e-6
    assert bijection_d1_at_inverse(make_bijection("logit", (0, 1)), 0.5) == 0.25


def test_probit_slope_by_finite_difference():
    b = make_bijection("probit", (0, 1))
    fd = (b.forward(1e-6) - b.forward(-1e-6)) / 2e-6
    assert abs(fd - 1 / math.sqrt(2 * math.pi)) < 1e-9


@pytest.mark.parametrize("name,support", ALL)
def test_round_trip_on_y(name, support):
    b = make_bijection(name, support)
    # probit's upper tail cannot resolve 1 - Phi(y) below ~1e-16 in double
    # precision, so its round trip is checked where that gap exceeds 1e-7
    y = np.linspace(-8, 5.2 if name == "probit" else 8, 801)
    assert np.max(np.abs(b.inverse(b.forward(y)) - y)) < 1e-9


@pytest.mark.parametrize(
    "spec,name",
    [(d, n) for d in ("gamma:2,2", "weibull:2,2", "lognorm:0,1", "absnorm") for n in HALF]
    + [(d, n) for d in ("uniform:0,1", "beta:1,3", "beta:2,2", "beta:3,1") for n in UNIT],
)
def test_round_trip_on_study_quantiles(spec, name):
    d = parse_distribution(spec)
    b = make_bijection(name, d.support)
    x = d.quantile(np.linspace(1e-6, 1 - 1e-6, 501))
    assert np.max(np.abs(b.forward(b.inverse(x)) - x) / np.maximum(1.0, np.abs(x))) < 1e-9


@pytest.mark.parametrize("name,support", ALL)
def test_monotone_and_positive_slope(name, support):
    b = make_bijection(name, support)
    y = np.linspace(-6, 6, 2001)
    assert np.all(np.diff(b.forward(y)) > 0)
    assert np.all(b.d1(np.linspace(-30, 30, 601)) > 0)


@pytest.mark.parametrize("name,support", ALL)
def test_derivatives_by_finite_difference(name, support):
    b = make_bijection(name, support)
    y = np.linspace(-4, 4, 81)
    e = 1e-5
    d1 = (b.forward(y + e) - b.forward(y - e)) / (2 * e)
    d2 = (b.d1(y + e) - b.d1(y - e)) / (2 * e)
    d3 = (b.d2(y + e) - b.d2(y - e)) / (2 * e)
    scale = lambda ref: np.maximum(np.abs(ref), 1e-3 * np.max(np.abs(ref)))
    assert np.max(np.abs(d1 - b.d1(y)) / scale(b.d1(y))) < 1e-5
    assert np.max(np.abs(d2 - b.d2(y)) / scale(b.d2(y))) < 1e-5
    assert np.max(np.abs(d3 - b.d3(y)) / scale(b.d3(y))) < 1e-4


def test_endpoints_map_to_infinity():
    b = make_bijection("probit", (0, 1))
    assert b.inverse(0.0) == -np.inf and b.inverse(1.0) == np.inf
    h = make_bijection("phi_gamma", (0, math.inf))
    assert h.inverse(0.0) == -np.inf and h.inverse(np.inf) == np.inf


def test_forward_clamps_without_nan():
    for name in UNIT:
        b = make_bijection(name, (0, 1))
        v = b.forward(np.array([-1e4, -50.0, 50.0, 1e4]))
        assert np.all(np.isfinite(v)) and np.all((v >= 0) & (v <= 1))


def test_shifted_and_scaled_supports():
    b = make_bijection("logit", (2.0, 6.0))
    assert b.forward(0.0) == 4.0
    assert b.d1(0.0) == pytest.approx(1.0)
    s = make_bijection("log", (1.0, math.inf))
    assert s.inverse(2.0) == 0.0
    r = make_bijection("log", Interval(-math.inf, 0.0))
    x = np.array([-3.0, -0.1])
    assert np.allclose(r.forward(r.inverse(x)), x)
    assert np.all(r.d1(np.linspace(-3, 3, 7)) > 0)


def test_errors():
    with pytest.raises(ConfigError):
        make_bijection("probit", (0, math.inf))
    with pytest.raises(ConfigError):
        make_bijection("log", (0, 1))
    with pytest.raises(ConfigError):
        Interval(1.0, 1.0)
    with pytest.raises(ConfigError):
        make_bijection("sqrt", (0, 1))
    b = make_bijection("probit", (0, 1))
    with pytest.raises(DomainError):
        b.inverse(1.5)
    with pytest.raises(DomainError):
        bijection_d1_at_inverse(b, 0.0)


def test_auto_choice():
    assert auto_bijection(Interval(0, math.inf)).name == "log_exp"
    assert auto_bijection(Interval(0, 1)).name == "probit"
    with pytest.raises(ConfigError):
        auto_bijection(Interval())


@given(st.floats(1e-300, 1e300))
def test_phi_gamma_round_trip_property(x):
    b = make_bijection("phi_gamma", (0, math.inf))
    y = float(b.inverse(x))
    assert math.isfinite(y)
    assert float(b.forward(y)) == pytest.approx(x, rel=1e-9)
