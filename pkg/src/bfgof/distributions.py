"""Reference distributions used as null hypotheses and data generators.

Every distribution exposes ``cdf``, ``pdf``, the first two density
derivatives, ``quantile`` and ``sample``.  Distributions are parsed from short
spec strings such as ``gamma:2,2`` or ``beta:1,3``.

Gamma and Weibull parameters are read as ``(shape, scale)`` by default; pass
``convention="rate"`` to read the second number as a rate instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .transforms import Interval

__all__ = [
    "ReferenceDistribution",
    "Gamma",
    "Weibull",
    "LogNormal",
    "AbsNormal",
    "Uniform",
    "Beta",
    "Normal",
    "parse_distribution",
    "seeded_rng",
    "open_uniform",
    "dist_cdf",
    "dist_quantile",
    "dist_sample",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox4x64 generator keyed by ``(seed, stream)``.

    Philox is counter based, so the output for a key is fixed across
    platforms and independent of how streams are spread over workers.
    """
    mask = (1 << 64) - 1
    key = np.array([seed & mask, stream & mask], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform draws on the open interval (0, 1), 53-bit resolution."""
    k = rng.integers(0, 1 << 53, size=n, dtype=np.int64)
    return (k + 0.5) * 2.0**-53


def _std_normal(rng, n):
    return special.ndtri(open_uniform(rng, n))


@dataclass(frozen=True)
class ReferenceDistribution:
    """Base class; subclasses fill in the ``_`` hooks on the interior."""

    family = "base"
    support = Interval()

    # spec string the distribution was parsed from, kept for reporting
    name = ""

    def _cdf(self, x):
        raise NotImplementedError

    def _pdf(self, x):
        raise NotImplementedError

    def _ppf(self, u):
        raise NotImplementedError

    def _score(self, x):
        """``(a, b)`` with ``f' = f a`` and ``f'' = f (a^2 + b)``."""
        raise NotImplementedError

    def _draw(self, rng, n):
        raise NotImplementedError

    @property
    def params(self) -> tuple[float, ...]:
        return ()

    def spec(self) -> str:
        if self.name:
            return self.name
        if not self.params:
            return self.family
        return f"{self.family}:" + ",".join(f"{p:g}" for p in self.params)

    def _interior(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.support.contains(x)
        return x, inside, np.where(inside, x, self._safe_point())

    def _safe_point(self) -> float:
        s = self.support
        if s.is_bounded:
            return 0.5 * (s.lower + s.upper)
        if math.isfinite(s.lower):
            return s.lower + 1.0
        if math.isfinite(s.upper):
            return s.upper - 1.0
        return 0.0

    def cdf(self, x):
        x, inside, xs = self._interior(x)
        out = np.where(inside, self._cdf(xs), np.where(x <= self.support.lower, 0.0, 1.0))
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x, inside, xs = self._interior(x)
        out = np.where(inside, self._pdf(xs), 0.0)
        return float(out) if out.ndim == 0 else out

    def dpdf(self, x):
        """First derivative of the density on the interior."""
        x, inside, xs = self._interior(x)
        a, _ = self._score(xs)
        out = np.where(inside, self._pdf(xs) * a, 0.0)
        return float(out) if out.ndim == 0 else out

    def d2pdf(self, x):
        """Second derivative of the density on the interior."""
        x, inside, xs = self._interior(x)
        a, b = self._score(xs)
        out = np.where(inside, self._pdf(xs) * (a * a + b), 0.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0.0) | (u >= 1.0)) or np.any(np.isnan(u)):
            raise DomainError("quantile level must lie in (0, 1)")
        x = np.asarray(self._ppf(u), dtype=float)
        x = self._polish(x, u)
        return float(x) if x.ndim == 0 else x

    def _polish(self, x, u):
        # one guarded Newton step on F(x) = u
        f = np.asarray(self._pdf(np.where(self.support.contains(x), x, self._safe_point())))
        step = np.where(f > 0, (self._cdf_safe(x) - u) / np.where(f > 0, f, 1.0), 0.0)
        cand = x - step
        ok = self.support.contains(cand) & (
            np.abs(self._cdf_safe(cand) - u) <= np.abs(self._cdf_safe(x) - u)
        )
        return np.where(ok, cand, x)

    def _cdf_safe(self, x):
        return np.asarray(self.cdf(x), dtype=float)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n < 1:
            raise DomainError("sample size must be at least 1")
        x = np.asarray(self._draw(rng, n), dtype=float)
        s = self.support
        lo = np.nextafter(s.lower, s.upper) if math.isfinite(s.lower) else -np.inf
        hi = np.nextafter(s.upper, s.lower) if math.isfinite(s.upper) else np.inf
        return np.clip(x, lo, hi)


_HALF_LINE = Interval(0.0, math.inf)
_UNIT = Interval(0.0, 1.0)


def _positive(*values):
    for v in values:
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"parameters must be positive and finite, got {values}")


@dataclass(frozen=True)
class Gamma(ReferenceDistribution):
    shape: float = 2.0
    scale: float = 2.0
    family = "gamma"
    support = _HALF_LINE

    def __post_init__(self):
        _positive(self.shape, self.scale)

    @property
    def params(self):
        return (self.shape, self.scale)

    def _cdf(self, x):
        return special.gammainc(self.shape, x / self.scale)

    def _pdf(self, x):
        k, t = self.shape, self.scale
        with np.errstate(divide="ignore"):
            logf = (k - 1.0) * np.log(x) - x / t - special.gammaln(k) - k * math.log(t)
        return np.exp(logf)

    def _ppf(self, u):
        return self.scale * special.gammaincinv(self.shape, u)

    def _score(self, x):
        k, t = self.shape, self.scale
        return (k - 1.0) / x - 1.0 / t, -(k - 1.0) / (x * x)

    def _draw(self, rng, n):
        return rng.standard_gamma(self.shape, size=n) * self.scale


@dataclass(frozen=True)
class Weibull(ReferenceDistribution):
    shape: float = 2.0
    scale: float = 2.0
    family = "weibull"
    support = _HALF_LINE

    def __post_init__(self):
        _positive(self.shape, self.scale)

    @property
    def params(self):
        return (self.shape, self.scale)

    def _cdf(self, x):
        return -np.expm1(-((x / self.scale) ** self.shape))

    def _pdf(self, x):
        k, lam = self.shape, self.scale
        z = x / lam
        return (k / lam) * z ** (k - 1.0) * np.exp(-(z**k))

    def _ppf(self, u):
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def _score(self, x):
        k, lam = self.shape, self.scale
        a = (k - 1.0) / x - k * x ** (k - 1.0) / lam**k
        b = -(k - 1.0) / (x * x) - k * (k - 1.0) * x ** (k - 2.0) / lam**k
        return a, b

    def _draw(self, rng, n):
        return self._ppf(open_uniform(rng, n))


@dataclass(frozen=True)
class LogNormal(ReferenceDistribution):
    mu: float = 0.0
    sigma: float = 1.0
    family = "lognorm"
    support = _HALF_LINE

    def __post_init__(self):
        _positive(self.sigma)

    @property
    def params(self):
        return (self.mu, self.sigma)

    def _cdf(self, x):
        return special.ndtr((np.log(x) - self.mu) / self.sigma)

    def _pdf(self, x):
        z = (np.log(x) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / (x * self.sigma)

    def _ppf(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(u))

    def _score(self, x):
        s2 = self.sigma**2
        d = np.log(x) - self.mu
        a = -1.0 / x - d / (s2 * x)
        b = 1.0 / (x * x) - 1.0 / (s2 * x * x) + d / (s2 * x * x)
        return a, b

    def _draw(self, rng, n):
        return np.exp(self.mu + self.sigma * _std_normal(rng, n))


@dataclass(frozen=True)
class AbsNormal(ReferenceDistribution):
    """Law of ``|Z|`` with ``Z ~ N(0, sigma^2)``."""

    sigma: float = 1.0
    family = "absnorm"
    support = _HALF_LINE

    def __post_init__(self):
        _positive(self.sigma)

    @property
    def params(self):
        return () if self.sigma == 1.0 else (self.sigma,)

    def _cdf(self, x):
        return special.erf(x / (self.sigma * math.sqrt(2.0)))

    def _pdf(self, x):
        z = x / self.sigma
        return 2.0 * np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.sigma

    def _ppf(self, u):
        return -self.sigma * special.ndtri(0.5 * (1.0 - u))

    def _score(self, x):
        s2 = self.sigma**2
        return -x / s2, np.full_like(x, -1.0 / s2)

    def _draw(self, rng, n):
        return self.sigma * np.abs(_std_normal(rng, n))


@dataclass(frozen=True)
class Uniform(ReferenceDistribution):
    a: float = 0.0
    b: float = 1.0
    family = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ConfigError(f"uniform needs finite a < b, got ({self.a}, {self.b})")

    @property
    def support(self):
        return Interval(self.a, self.b)

    @property
    def params(self):
        return (self.a, self.b)

    def _cdf(self, x):
        return (x - self.a) / (self.b - self.a)

    def _pdf(self, x):
        return np.full_like(x, 1.0 / (self.b - self.a))

    def _ppf(self, u):
        return self.a + (self.b - self.a) * u

    def _score(self, x):
        return np.zeros_like(x), np.zeros_like(x)

    def _draw(self, rng, n):
        return self._ppf(open_uniform(rng, n))


@dataclass(frozen=True)
class Beta(ReferenceDistribution):
    alpha: float = 2.0
    beta: float = 2.0
    family = "beta"
    support = _UNIT

    def __post_init__(self):
        _positive(self.alpha, self.beta)

    @property
    def params(self):
        return (self.alpha, self.beta)

    def _cdf(self, x):
        return special.betainc(self.alpha, self.beta, x)

    def _pdf(self, x):
        a, b = self.alpha, self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - special.betaln(a, b)
        return np.exp(logf)

    def _ppf(self, u):
        return special.betaincinv(self.alpha, self.beta, u)

    def _score(self, x):
        a, b = self.alpha, self.beta
        da = (a - 1.0) / x - (b - 1.0) / (1.0 - x)
        db = -(a - 1.0) / (x * x) - (b - 1.0) / (1.0 - x) ** 2
        return da, db

    def _draw(self, rng, n):
        g1 = rng.standard_gamma(self.alpha, size=n)
        g2 = rng.standard_gamma(self.beta, size=n)
        return g1 / (g1 + g2)


@dataclass(frozen=True)
class Normal(ReferenceDistribution):
    mu: float = 0.0
    sigma: float = 1.0
    family = "normal"
    support = Interval()

    def __post_init__(self):
        _positive(self.sigma)

    @property
    def params(self):
        return (self.mu, self.sigma)

    def _cdf(self, x):
        return special.ndtr((x - self.mu) / self.sigma)

    def _pdf(self, x):
        z = (x - self.mu) / self.sigma
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.sigma

    def _ppf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def _score(self, x):
        s2 = self.sigma**2
        return -(x - self.mu) / s2, np.full_like(x, -1.0 / s2)

    def _draw(self, rng, n):
        return self.mu + self.sigma * _std_normal(rng, n)


_FAMILIES = {
    "gamma": (Gamma, 2),
    "weibull": (Weibull, 2),
    "lognorm": (LogNormal, 2),
    "lognormal": (LogNormal, 2),
    "absnorm": (AbsNormal, 1),
    "uniform": (Uniform, 2),
    "beta": (Beta, 2),
    "normal": (Normal, 2),
}


def parse_distribution(spec: str, convention: str = "scale") -> ReferenceDistribution:
    """Build a distribution from a spec string such as ``weibull:2,2``.

    Parameters left out fall back to the family defaults, so ``absnorm`` and
    ``uniform`` mean the standard versions.
    """
    if isinstance(spec, ReferenceDistribution):
        return spec
    if convention not in ("scale", "rate"):
        raise ConfigError(f"convention must be 'scale' or 'rate', got {convention!r}")
    text = spec.strip()
    fam, _, rest = text.partition(":")
    fam = fam.strip().lower()
    if fam not in _FAMILIES:
        raise ConfigError(f"unknown distribution family {fam!r} in {spec!r}")
    cls, max_params = _FAMILIES[fam]
    try:
        params = [float(p) for p in rest.split(",")] if rest.strip() else []
    except ValueError:
        raise ConfigError(f"non-numeric parameters in {spec!r}") from None
    if len(params) > max_params:
        raise ConfigError(f"{fam} takes at most {max_params} parameters, got {spec!r}")
    if convention == "rate" and cls in (Gamma, Weibull) and len(params) == 2:
        _positive(params[1])
        params[1] = 1.0 / params[1]
    return _with_name(cls(*params), text)


def _with_name(dist: ReferenceDistribution, text: str) -> ReferenceDistribution:
    object.__setattr__(dist, "name", text)
    return dist


def dist_cdf(d: ReferenceDistribution, x):
    return d.cdf(x)


def dist_quantile(d: ReferenceDistribution, u):
    return d.quantile(u)


def dist_sample(d: ReferenceDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    return d.sample(rng, n)
