"""Increasing bijections g from the real line onto a support interval.

Data on a support ``Omega`` are pulled to the real line with ``g^{-1}``,
smoothed there, and pushed back with ``g``.  Four canonical maps are shipped:

==========  ==============  =================================
name        canonical Omega ``g^{-1}(x)``
==========  ==============  =================================
log_exp     (0, inf)        ``log(x)``
phi_gamma   (0, inf)        ``Phi^{-1}(1 - exp(-x))``
probit      (0, 1)          ``Phi^{-1}(x)``
logit       (0, 1)          ``log(x / (1 - x))``
==========  ==============  =================================

Other half-lines and bounded intervals are handled by composing the canonical
map with a shift (or reflection, for ``(-inf, b)``) or an affine rescale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit, log_ndtr, logit, ndtr, ndtri, ndtri_exp

from .errors import ConfigError, DomainError

__all__ = [
    "Interval",
    "Bijection",
    "BIJECTIONS",
    "make_bijection",
    "auto_bijection",
    "bijection_d1_at_inverse",
    "resolve_transform_name",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)
# probit/logit arguments are clipped here so tails never produce NaN
_Y_CLIP = 38.0


@dataclass(frozen=True)
class Interval:
    """A (possibly unbounded) interval ``(lower, upper)``.

    The open flags only record what the user declared; samples are always
    required to lie strictly inside, and estimators may be evaluated on the
    closure.
    """

    lower: float = -math.inf
    upper: float = math.inf
    lower_open: bool = True
    upper_open: bool = True

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ConfigError("interval endpoints must not be NaN")
        if not self.lower < self.upper:
            raise ConfigError(f"degenerate interval ({self.lower}, {self.upper})")

    @classmethod
    def parse(cls, text: str) -> "Interval":
        """Parse ``"lo,hi"``; ``inf``/``-inf`` denote unbounded ends."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"support must look like 'lo,hi', got {text!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"non-numeric support {text!r}") from None
        return cls(lo, hi)

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def is_half_line(self) -> bool:
        return math.isfinite(self.lower) != math.isfinite(self.upper)

    @property
    def is_real_line(self) -> bool:
        return not (math.isfinite(self.lower) or math.isfinite(self.upper))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x) -> np.ndarray:
        """Strict interior membership."""
        x = np.asarray(x, dtype=float)
        return (x > self.lower) & (x < self.upper)

    def contains_closed(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lower) & (x <= self.upper)

    def issubset(self, other: "Interval") -> bool:
        return self.lower >= other.lower and self.upper <= other.upper

    def __str__(self) -> str:
        return f"({self.lower:g}, {self.upper:g})"


class _Canonical(NamedTuple):
    family: str  # "half_line" -> (0, inf), "unit" -> (0, 1)
    forward: Callable
    inverse: Callable
    d1: Callable
    d2: Callable
    d3: Callable


def _log_inverse(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


_LOG_EXP = _Canonical("half_line", np.exp, _log_inverse, np.exp, np.exp, np.exp)


def _mills(y):
    # phi(y) / (1 - Phi(y)), stable for large y
    return np.exp(-0.5 * y * y - _LOG_SQRT_2PI - log_ndtr(-y))


def _pg_forward(y):
    return -log_ndtr(-y)


def _pg_inverse(x):
    x = np.asarray(x, dtype=float)
    small = x < _LOG2
    with np.errstate(over="ignore", under="ignore"):
        lo = ndtri(-np.expm1(-np.where(small, x, 0.0)))
        hi = -ndtri_exp(-np.where(small, _LOG2, x))
    return np.where(small, lo, hi)


def _pg_d1(y):
    return _mills(y)


def _pg_d2(y):
    lam = _mills(y)
    return lam * (lam - y)


def _pg_d3(y):
    lam = _mills(y)
    dlam = lam * (lam - y)
    return dlam * (lam - y) + lam * (dlam - 1.0)


_PHI_GAMMA = _Canonical("half_line", _pg_forward, _pg_inverse, _pg_d1, _pg_d2, _pg_d3)


def _phi(y):
    return np.exp(-0.5 * y * y - _LOG_SQRT_2PI)


def _probit_forward(y):
    return ndtr(np.clip(y, -_Y_CLIP, _Y_CLIP))


_PROBIT = _Canonical(
    "unit",
    _probit_forward,
    ndtri,
    _phi,
    lambda y: -y * _phi(y),
    lambda y: (y * y - 1.0) * _phi(y),
)


def _logit_forward(y):
    return expit(np.clip(y, -_Y_CLIP, _Y_CLIP))


def _logit_d1(y):
    return expit(y) * expit(-y)


def _logit_d2(y):
    return _logit_d1(y) * -np.tanh(0.5 * y)


def _logit_d3(y):
    d1 = _logit_d1(y)
    return d1 * (1.0 - 6.0 * d1)


_LOGIT = _Canonical("unit", _logit_forward, logit, _logit_d1, _logit_d2, _logit_d3)

BIJECTIONS: dict[str, _Canonical] = {
    "log_exp": _LOG_EXP,
    "phi_gamma": _PHI_GAMMA,
    "probit": _PROBIT,
    "logit": _LOGIT,
}

_ALIASES = {
    "log": "log_exp",
    "log-exp": "log_exp",
    "phi-gamma": "phi_gamma",
}


def resolve_transform_name(name: str) -> str:
    key = _ALIASES.get(name, name)
    if key not in BIJECTIONS:
        raise ConfigError(
            f"unknown transform {name!r}; choose from "
            "log, phi-gamma, probit, logit, auto"
        )
    return key


@dataclass(frozen=True)
class Bijection:
    """Increasing map ``g`` of the real line onto ``support``.

    ``forward`` is ``g``, ``inverse`` is ``g^{-1}`` and ``d1``-``d3`` are the
    first three derivatives of ``g``.  ``inverse`` maps the support endpoints
    to ``-inf``/``+inf`` and rejects points outside the closed support.
    """

    name: str
    support: Interval

    @property
    def _canon(self) -> _Canonical:
        return BIJECTIONS[self.name]

    @property
    def _mode(self) -> str:
        s = self.support
        if s.is_bounded:
            return "scale"
        return "shift" if math.isfinite(s.lower) else "reflect"

    def forward(self, y):
        y = np.asarray(y, dtype=float)
        c, s = self._canon, self.support
        mode = self._mode
        if mode == "scale":
            return s.lower + s.width * c.forward(y)
        if mode == "shift":
            return s.lower + c.forward(y)
        return s.upper - c.forward(-y)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.support.contains_closed(x)):
            raise DomainError(f"points outside the support {self.support}")
        c, s = self._canon, self.support
        mode = self._mode
        if mode == "scale":
            u = (x - s.lower) / s.width
            # pin exact endpoints so rounding cannot move them inside
            u = np.where(x == s.upper, 1.0, u)
            return c.inverse(u)
        if mode == "shift":
            return c.inverse(x - s.lower)
        return -c.inverse(s.upper - x)

    def _deriv(self, k: int, y):
        y = np.asarray(y, dtype=float)
        fn = (self._canon.d1, self._canon.d2, self._canon.d3)[k - 1]
        mode = self._mode
        if mode == "scale":
            return self.support.width * fn(y)
        if mode == "shift":
            return fn(y)
        # g(y) = b - g0(-y): odd derivatives keep sign, even ones flip
        return fn(-y) if k % 2 else -fn(-y)

    def d1(self, y):
        return self._deriv(1, y)

    def d2(self, y):
        return self._deriv(2, y)

    def d3(self, y):
        return self._deriv(3, y)

    def derivatives_at(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(g', g'', g''')`` evaluated at ``g^{-1}(x)``."""
        y = self.inverse(x)
        return self.d1(y), self.d2(y), self.d3(y)


def make_bijection(name: str, support: Interval | tuple | str) -> Bijection:
    """Build the bijection ``name`` onto ``support``.

    ``log_exp`` and ``phi_gamma`` need a half-line; ``probit`` and ``logit``
    need a bounded interval.
    """
    if isinstance(support, str):
        support = Interval.parse(support)
    elif not isinstance(support, Interval):
        support = Interval(*support)
    key = resolve_transform_name(name)
    family = BIJECTIONS[key].family
    if family == "half_line" and not support.is_half_line:
        raise ConfigError(f"transform {key} needs a half-line support, got {support}")
    if family == "unit" and not support.is_bounded:
        raise ConfigError(f"transform {key} needs a bounded support, got {support}")
    return Bijection(key, support)


def auto_bijection(support: Interval) -> Bijection:
    """``log_exp`` on half-lines, ``probit`` on bounded intervals."""
    if support.is_half_line:
        return make_bijection("log_exp", support)
    if support.is_bounded:
        return make_bijection("probit", support)
    raise ConfigError("no boundary-correcting transform exists for the real line")


def bijection_d1_at_inverse(b: Bijection, x):
    """``g'(g^{-1}(x))`` for ``x`` strictly inside the support."""
    arr = np.asarray(x, dtype=float)
    if not np.all(b.support.contains(arr)):
        raise DomainError("x must lie strictly inside the support")
    out = b.d1(b.inverse(arr))
    return float(out) if out.ndim == 0 else out
