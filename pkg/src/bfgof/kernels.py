"""Symmetric smoothing kernels, their integrated forms and moment constants.

A kernel ``K`` is a symmetric probability density on the real line.  The
distribution function estimators use its integral ``W(v) = int_{-inf}^v K``,
and the bias/variance expressions use three constants

* ``second_moment``    int v^2 K(v) dv
* ``r1``               int v K(v) W(v) dv
* ``squared_integral`` int K(v)^2 dv
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DomainError

__all__ = [
    "Kernel",
    "GAUSSIAN",
    "EPANECHNIKOV",
    "KERNELS",
    "get_kernel",
    "register_kernel",
    "kernel_integrated",
    "kernel_moments",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_2SQRT_PI = 1.0 / (2.0 * math.sqrt(math.pi))

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Kernel:
    """An immutable kernel together with its cached constants.

    Attributes
    ----------
    name : str
        Registry name.
    pdf, cdf : callable
        Vectorised ``K`` and ``W``.  ``cdf`` must accept ``+-inf`` and map them
        to exactly 1 and 0.
    convolution : callable
        ``(K * K)(v)``, used by least-squares cross-validation for densities.
    support_radius : float
        ``K`` vanishes outside ``[-support_radius, support_radius]``
        (``inf`` for unbounded kernels).
    saturation_radius : float
        Beyond this radius ``W`` equals 0 or 1 to double precision.
    """

    name: str
    pdf: ArrayFn
    cdf: ArrayFn
    convolution: ArrayFn
    support_radius: float
    saturation_radius: float
    second_moment: float
    r1: float
    squared_integral: float

    def evaluate(self, v):
        return self.pdf(np.asarray(v, dtype=float))

    def integrated(self, v):
        return self.cdf(np.asarray(v, dtype=float))

    @property
    def moments(self) -> tuple[float, float, float]:
        return self.second_moment, self.r1, self.squared_integral


def _gauss_pdf(v):
    return _INV_SQRT_2PI * np.exp(-0.5 * v * v)


def _gauss_conv(v):
    # N(0, 2) density
    return _INV_2SQRT_PI * np.exp(-0.25 * v * v)


def _epan_pdf(v):
    return np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v * v), 0.0)


def _epan_cdf(v):
    c = np.clip(v, -1.0, 1.0)
    return 0.25 * (2.0 + 3.0 * c - c * c * c)


def _epan_conv(v):
    a = np.abs(v)
    poly = 0.6 - 0.75 * a**2 + 0.375 * a**3 - 0.01875 * a**5
    return np.where(a <= 2.0, poly, 0.0)


GAUSSIAN = Kernel(
    name="gaussian",
    pdf=_gauss_pdf,
    cdf=ndtr,
    convolution=_gauss_conv,
    support_radius=math.inf,
    # ndtr(8.5) == 1.0 exactly and ndtr(-8.5) < 1e-17
    saturation_radius=8.5,
    second_moment=1.0,
    r1=_INV_2SQRT_PI,
    squared_integral=_INV_2SQRT_PI,
)

EPANECHNIKOV = Kernel(
    name="epanechnikov",
    pdf=_epan_pdf,
    cdf=_epan_cdf,
    convolution=_epan_conv,
    support_radius=1.0,
    saturation_radius=1.0,
    second_moment=0.2,
    r1=9.0 / 70.0,
    squared_integral=0.6,
)

KERNELS: dict[str, Kernel] = {k.name: k for k in (GAUSSIAN, EPANECHNIKOV)}


def register_kernel(kernel: Kernel) -> None:
    """Add a kernel to the registry used by :func:`get_kernel` and the CLI."""
    KERNELS[kernel.name] = kernel


def get_kernel(kernel: str | Kernel) -> Kernel:
    if isinstance(kernel, Kernel):
        return kernel
    try:
        return KERNELS[kernel]
    except KeyError:
        raise ConfigError(
            f"unknown kernel {kernel!r}; choose from {sorted(KERNELS)}"
        ) from None


def kernel_integrated(kernel: str | Kernel, v):
    """Integrated kernel ``W(v)`` for finite ``v``."""
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("kernel_integrated requires finite arguments")
    out = get_kernel(kernel).cdf(arr)
    return float(out) if out.ndim == 0 else out


def kernel_moments(kernel: str | Kernel) -> tuple[float, float, float]:
    """Return ``(second_moment, r1, squared_integral)``."""
    return get_kernel(kernel).moments
