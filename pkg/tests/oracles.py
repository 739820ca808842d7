"""Independent reference computations used only by the tests.

None of these reuse package internals beyond calling an estimator's
``cdf`` or a distribution's ``cdf``/``quantile``.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr


def kolmogorov_cdf_exact(n: int, d: float) -> float:
    """Exact ``P(D_n < d)`` for a continuous null (Durbin matrix form)."""
    if d <= 0:
        return 0.0
    if d >= 1:
        return 1.0
    k = int(n * d) + 1
    m = 2 * k - 1
    hh = k - n * d
    H = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i - j + 1 >= 0:
                H[i, j] = 1.0 / math.factorial(i - j + 1)
    for i in range(m):
        H[i, 0] -= hh ** (i + 1) / math.factorial(i + 1)
        H[m - 1, i] -= hh ** (m - i) / math.factorial(m - i)
    if 2 * hh - 1 > 0:
        H[m - 1, 0] += (2 * hh - 1) ** m / math.factorial(m)
    P = np.linalg.matrix_power(H, n)
    return float(P[k - 1, k - 1] * math.factorial(n) / n**n)


def classical_ks(u_sorted: np.ndarray) -> float:
    """Sup distance of the EDF of uniform-scale values to the identity."""
    n = u_sorted.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u_sorted), np.max(u_sorted - (i - 1) / n)))


def cvm_trapezoid(estimator, null, points: int = 10**6) -> float:
    """``n * int_0^1 (F_est(Q(u)) - u)^2 du`` by the composite trapezoid rule."""
    u = np.linspace(0.0, 1.0, points + 1)
    x = null.quantile(u[1:-1])
    g = np.empty_like(u)
    g[1:-1] = (np.asarray(estimator.cdf(x), dtype=float) - u[1:-1]) ** 2
    # endpoint values are limits of the estimator at the support ends
    lo, hi = null.support.lower, null.support.upper
    g[0] = float(estimator.cdf(lo)) ** 2 if math.isfinite(lo) else 0.0
    g[-1] = (float(estimator.cdf(hi)) - 1.0) ** 2 if math.isfinite(hi) else 0.0
    du = 1.0 / points
    return estimator.sample.n * du * (0.5 * g[0] + g[1:-1].sum() + 0.5 * g[-1])


def cvm_direct(values, null) -> float:
    """``n * int (F_n - F)^2 dF`` by adaptive quadrature between order statistics."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    lo, hi = null.support.lower, null.support.upper
    cuts = np.r_[lo, x, hi]
    total = 0.0
    for j in range(n + 1):
        level = j / n
        a, b = cuts[j], cuts[j + 1]
        total += quad(lambda t: (level - float(null.cdf(t))) ** 2 * float(null.pdf(t)), a, b, epsabs=1e-14, limit=200)[0]
    return n * total


def gaussian_cv_brute(y: np.ndarray, h: float) -> float:
    """Leave-one-out CV for the Gaussian distribution estimator by quadrature.

    ``(1/n) sum_i int (F_{-i}(t) - 1{y_i <= t})^2 dt``, integrated piecewise
    with the data as breakpoints.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    lo, hi = y.min() - 12 * h, y.max() + 12 * h
    cuts = np.r_[lo, np.sort(y), hi]
    total = 0.0
    for i in range(n):
        rest = np.delete(y, i)

        def integrand(t, i=i, rest=rest):
            return (ndtr((t - rest) / h).mean() - (y[i] <= t)) ** 2

        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a:
                total += quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return total / n


def omega2_cdf_gil_pelaez(x: float, terms: int = 400) -> float:
    """Limiting Cramer-von Mises CDF by inverting its characteristic function.

    ``phi(t) = prod_k (1 - 2 i t / (k pi)^2)^(-1/2)``; the product is
    truncated after ``terms`` factors with a first-order tail correction.
    """
    k2 = (np.arange(1, terms + 1) * math.pi) ** 2
    tail = 1.0 / (math.pi**2 * terms)  # ~ sum_{k > terms} 1 / (k pi)^2

    def phi(t):
        a = 2j * t
        log_phi = -0.5 * (np.sum(np.log1p(-a / k2)) - a * tail)
        return np.exp(log_phi)

    f = lambda t: (np.exp(-1j * t * x) * phi(t)).imag / t
    total = 0.0
    edges = np.r_[0.0, np.geomspace(1.0, 1e5, 60)]
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(f, a, b, limit=400, epsabs=1e-13)[0]
    return 0.5 - total / math.pi
