"""Distribution and density estimators.

Three distribution function estimators share one interface (``cdf(x)``):

* :class:`EmpiricalCdf`         the step function ``F_n``
* :class:`NaiveKernelCdf`       ``mean_i W((x - X_i) / h)``
* :class:`TransformedKernelCdf` ``mean_i W((g^{-1}(x) - g^{-1}(X_i)) / h)``

The kernel estimators also carry the matching density (``pdf``).  The
transformed estimator is exactly the naive one applied to the pulled-back
sample ``Y_i = g^{-1}(X_i)`` and evaluated at ``g^{-1}(x)``, and that is how it
is computed here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ReferenceDistribution
from .errors import DataError, DomainError, SupportError
from .kernels import Kernel, get_kernel
from .transforms import Bijection, Interval

__all__ = [
    "Sample",
    "as_sample",
    "EmpiricalCdf",
    "NaiveKernelCdf",
    "TransformedKernelCdf",
    "make_estimator",
    "kernel_cdf_sum",
    "kernel_pdf_sum",
    "empirical_cdf",
    "naive_kernel_cdf",
    "naive_kernel_pdf",
    "transformed_kernel_cdf",
    "transformed_kernel_pdf",
    "theoretical_bias_variance",
]

# matrix elements processed per block in the pairwise kernel sums
_BLOCK = 1 << 21


@dataclass(frozen=True, eq=False)
class Sample:
    """A sorted univariate sample with its declared support."""

    values: np.ndarray
    support: Interval = Interval()

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise DataError("empty sample")
        if not np.all(np.isfinite(v)):
            raise DataError("sample contains non-finite values")
        if not np.all(self.support.contains(v)):
            raise SupportError(
                f"sample values must lie strictly inside {self.support}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)


def as_sample(values, support: Interval | None = None) -> Sample:
    if isinstance(values, Sample):
        if support is not None and not np.all(support.contains(values.values)):
            raise SupportError(f"sample values must lie strictly inside {support}")
        return values
    return Sample(values, support if support is not None else Interval())


def _check_h(h: float) -> float:
    h = float(h)
    if not (np.isfinite(h) and h > 0):
        raise DomainError(f"bandwidth must be positive and finite, got {h}")
    return h


def _blocked(points: np.ndarray, data: np.ndarray, fn) -> np.ndarray:
    flat = points.ravel()
    out = np.empty(flat.size)
    step = max(1, _BLOCK // max(data.size, 1))
    for s in range(0, flat.size, step):
        p = flat[s : s + step]
        out[s : s + step] = fn(p[:, None] - data[None, :]).mean(axis=1)
    return out.reshape(points.shape)


def kernel_cdf_sum(points, data: np.ndarray, h: float, kernel: Kernel) -> np.ndarray:
    """``mean_i W((p - data_i) / h)`` for every point ``p``; ``+-inf`` allowed."""
    points = np.asarray(points, dtype=float)
    return _blocked(points, data, lambda d: kernel.cdf(d / h))


def kernel_pdf_sum(points, data: np.ndarray, h: float, kernel: Kernel) -> np.ndarray:
    """``mean_i K((p - data_i) / h) / h`` for every point ``p``."""
    points = np.asarray(points, dtype=float)
    return _blocked(points, data, lambda d: kernel.pdf(d / h)) / h


def _scalar(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


class EmpiricalCdf:
    """Right-continuous step function with jumps ``1/n`` at the data."""

    kind = "empirical"
    kernel = None
    h = None
    bijection = None

    def __init__(self, sample):
        self.sample = as_sample(sample)

    def cdf(self, x):
        v = self.sample.values
        return _scalar(np.searchsorted(v, np.asarray(x, dtype=float), side="right") / v.size)

    __call__ = cdf


class NaiveKernelCdf:
    """Kernel distribution estimator computed on the original scale."""

    kind = "naive_kernel"
    bijection = None

    def __init__(self, sample, kernel: Kernel | str, h: float):
        self.sample = as_sample(sample)
        self.kernel = get_kernel(kernel)
        self.h = _check_h(h)

    @property
    def data(self) -> np.ndarray:
        return self.sample.values

    def cdf(self, x):
        return _scalar(kernel_cdf_sum(x, self.data, self.h, self.kernel))

    def pdf(self, x):
        return _scalar(kernel_pdf_sum(x, self.data, self.h, self.kernel))

    __call__ = cdf


class TransformedKernelCdf:
    """Boundary-free estimator: smooth ``g^{-1}(X_i)`` on the real line.

    Evaluation is allowed on the closed support; the endpoints map to
    ``-inf``/``+inf`` and therefore give exactly 0 and 1.
    """

    kind = "transformed_kernel"

    def __init__(self, sample, kernel: Kernel | str, h: float, bijection: Bijection):
        self.sample = as_sample(sample, bijection.support)
        self.kernel = get_kernel(kernel)
        self.h = _check_h(h)
        self.bijection = bijection
        y = np.asarray(bijection.inverse(self.sample.values), dtype=float)
        y.setflags(write=False)
        self.data = y

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.bijection.support.contains_closed(x)):
            raise DomainError(f"evaluation points outside {self.bijection.support}")
        return _scalar(kernel_cdf_sum(self.bijection.inverse(x), self.data, self.h, self.kernel))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.bijection.support.contains(x)):
            raise DomainError("density is only defined strictly inside the support")
        y = self.bijection.inverse(x)
        dens_y = kernel_pdf_sum(y, self.data, self.h, self.kernel)
        return _scalar(dens_y / self.bijection.d1(y))

    __call__ = cdf


def make_estimator(kind: str, sample, kernel="gaussian", h=None, bijection=None):
    """Factory keyed by ``empirical``/``naive_kernel``/``transformed_kernel``."""
    if kind == "empirical":
        return EmpiricalCdf(sample)
    if kind == "naive_kernel":
        return NaiveKernelCdf(sample, kernel, h)
    if kind == "transformed_kernel":
        if bijection is None:
            raise DomainError("transformed_kernel needs a bijection")
        return TransformedKernelCdf(sample, kernel, h, bijection)
    raise DomainError(f"unknown estimator kind {kind!r}")


def empirical_cdf(sample, x):
    """``#{X_i <= x} / n``."""
    return EmpiricalCdf(sample).cdf(x)


def naive_kernel_cdf(sample, kernel, h, x):
    return NaiveKernelCdf(sample, kernel, h).cdf(x)


def naive_kernel_pdf(sample, kernel, h, x):
    return NaiveKernelCdf(sample, kernel, h).pdf(x)


def transformed_kernel_cdf(sample, kernel, h, bijection, x):
    return TransformedKernelCdf(sample, kernel, h, bijection).cdf(x)


def transformed_kernel_pdf(sample, kernel, h, bijection, x):
    return TransformedKernelCdf(sample, kernel, h, bijection).pdf(x)


def theoretical_bias_variance(
    d: ReferenceDistribution,
    bijection: Bijection,
    kernel,
    h: float,
    n: int,
    x,
    target: str = "cdf",
):
    """Leading-order bias and variance of the transformed estimators at ``x``.

    For ``target="cdf"``::

        bias = h^2/2 * c1(x) * mu2
        var  = F(1-F)/n - 2h/n * g'(g^{-1}x) f(x) r1
        c1   = g'' f + (g')^2 f'

    and for ``target="pdf"``::

        bias = h^2 c2(x) mu2 / (2 g')
        var  = f R(K) / (n h g')
        c2   = g''' f + 3 g'' g' f' + (g')^3 f''

    with every ``g`` derivative taken at ``g^{-1}(x)``.  At the support
    endpoints the distribution estimator is deterministic (exactly 0 or 1), so
    both terms are returned as 0 there.
    """
    kernel = get_kernel(kernel)
    h = _check_h(h)
    x = np.asarray(x, dtype=float)
    mu2, r1, rk = kernel.moments
    inside = bijection.support.contains(x)
    if target == "cdf":
        if not np.all(bijection.support.contains_closed(x)):
            raise DomainError("x outside the support")
    elif target == "pdf":
        if not np.all(inside):
            raise DomainError("density moments need x strictly inside the support")
    else:
        raise DomainError(f"target must be 'cdf' or 'pdf', got {target!r}")

    xs = np.where(inside, x, _interior_point(bijection.support))
    g1, g2, g3 = bijection.derivatives_at(xs)
    f, f1, f2 = d.pdf(xs), d.dpdf(xs), d.d2pdf(xs)
    F = d.cdf(xs)
    if target == "cdf":
        c1 = g2 * f + g1**2 * f1
        bias = 0.5 * h * h * c1 * mu2
        var = F * (1.0 - F) / n - 2.0 * h / n * g1 * f * r1
    else:
        c2 = g3 * f + 3.0 * g2 * g1 * f1 + g1**3 * f2
        bias = h * h * c2 * mu2 / (2.0 * g1)
        var = f * rk / (n * h * g1)
    bias = np.where(inside, bias, 0.0)
    var = np.where(inside, var, 0.0)
    return _scalar(bias), _scalar(var)


def _interior_point(s: Interval) -> float:
    if s.is_bounded:
        return 0.5 * (s.lower + s.upper)
    return s.lower + 1.0 if np.isfinite(s.lower) else s.upper - 1.0
