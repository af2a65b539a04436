"""Distribution of the block max-abs ``Y_n = max_i |X_i|`` for Gaussian blocks.

With ``X_i ~ N(0, sigma**2)`` i.i.d. the max-abs has CDF
``F_n(y) = (2*Phi(y/sigma) - 1)**n`` and density
``f_n(y) = (2n/sigma) * phi(y/sigma) * (2*Phi(y/sigma) - 1)**(n-1)``.
Powers are evaluated in log space (``2*Phi(x) - 1 = erf(x/sqrt 2)``, with a
``log1p(-erfc)`` branch in the upper tail) so block sizes in the tens of
thousands stay finite.

The Gumbel approximations below drop the ``o(1/sqrt(ln n))`` corrections.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .formats import alpha_for
from .quadrature import QuadratureError, integrate

__all__ = [
    "EULER_GAMMA",
    "GumbelParams",
    "MaxAbsDistribution",
    "QuadratureError",
    "crossing_block_size",
    "gumbel_params",
    "gumbel_pdf",
    "max_abs_cdf",
    "max_abs_logcdf",
    "max_abs_pdf",
    "max_abs_sf",
    "moment_upper_limit",
    "ribbon",
    "std_normal_cdf",
    "std_normal_pdf",
    "yn_mean_var",
    "yn_moment_numeric",
]

EULER_GAMMA = 0.57721566490153286
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def std_normal_cdf(x):
    return special.ndtr(np.asarray(x, dtype=np.float64))


def _check_n_sigma(n, sigma):
    if int(n) != n or n < 1:
        raise ValueError(f"block size must be a positive integer, got {n!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def _log_erf(u):
    """``log(erf(u))`` for ``u >= 0``; ``-inf`` at 0."""
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore"):
        small = np.log(special.erf(np.minimum(u, 0.5)))
    large = np.log1p(-special.erfc(np.maximum(u, 0.5)))
    return np.where(u < 0.5, small, large)


def max_abs_logcdf(y, n, sigma=1.0):
    """``log F_n(y)``; ``-inf`` for ``y <= 0``."""
    _check_n_sigma(n, sigma)
    y = np.asarray(y, dtype=np.float64)
    u = np.maximum(y, 0.0) / (sigma * _SQRT2)
    out = n * _log_erf(u)
    return np.where(y > 0, out, -np.inf)


def max_abs_cdf(y, n, sigma=1.0):
    return np.exp(max_abs_logcdf(y, n, sigma))


def max_abs_sf(y, n, sigma=1.0):
    """``1 - F_n(y)`` without cancellation in the upper tail."""
    return -np.expm1(max_abs_logcdf(y, n, sigma))


def max_abs_pdf(y, n, sigma=1.0):
    _check_n_sigma(n, sigma)
    y = np.asarray(y, dtype=np.float64)
    z = y / sigma
    pos = y >= 0
    if n == 1:
        return np.where(pos, 2.0 / sigma * std_normal_pdf(z), 0.0)
    u = np.maximum(z, 0.0) / _SQRT2
    logf = (
        math.log(2.0 * n / sigma)
        + math.log(_INV_SQRT_2PI)
        - 0.5 * z * z
        + (n - 1) * _log_erf(u)
    )
    with np.errstate(under="ignore"):
        return np.where(pos, np.exp(logf), 0.0)


@dataclass(frozen=True)
class MaxAbsDistribution:
    n: int
    sigma: float = 1.0

    def __post_init__(self):
        _check_n_sigma(self.n, self.sigma)

    def pdf(self, y):
        return max_abs_pdf(y, self.n, self.sigma)

    def cdf(self, y):
        return max_abs_cdf(y, self.n, self.sigma)

    def sf(self, y):
        return max_abs_sf(y, self.n, self.sigma)

    def moment(self, k):
        return yn_moment_numeric(self.n, self.sigma, k)


def gumbel_pdf(x, mu, beta):
    if not beta > 0:
        raise ValueError(f"Gumbel scale must be positive, got {beta!r}")
    z = (np.asarray(x, dtype=np.float64) - mu) / beta
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(-(z + np.exp(-z))) / beta


@dataclass(frozen=True)
class GumbelParams:
    """Gumbel location ``mu`` and scale ``beta`` for a block maximum."""

    mu: float
    beta: float
    n: int
    population_sigma: float
    absolute: bool = True

    @property
    def mean(self):
        return self.mu + EULER_GAMMA * self.beta

    @property
    def variance(self):
        return math.pi ** 2 / 6.0 * self.beta ** 2

    def pdf(self, x):
        return gumbel_pdf(x, self.mu, self.beta)


def gumbel_params(n, sigma=1.0, absolute=True):
    """Asymptotic Gumbel parameters of the block maximum.

    ``absolute=True`` describes ``max |X_i|``, ``absolute=False`` the signed
    ``max X_i``; the former at ``n`` equals the latter at ``2n``.
    """
    _check_n_sigma(n, sigma)
    if n < 2:
        raise ValueError("Gumbel asymptotics need block size n >= 2")
    m = 2 * n if absolute else n
    c = m * m / (2.0 * math.pi)
    mu = math.sqrt(math.log(c / math.log(c)))
    beta = mu / math.log(m)
    return GumbelParams(mu * sigma, beta * sigma, int(n), float(sigma), bool(absolute))


def yn_mean_var(n, sigma=1.0):
    """Gumbel-approximated ``(E[Y_n], Var[Y_n])``."""
    g = gumbel_params(n, sigma, absolute=True)
    return g.mean, g.variance


def moment_upper_limit(n, sigma=1.0):
    """Upper integration limit; the neglected tail mass is below 1e-12."""
    return sigma * (math.sqrt(2.0 * math.log(2 * n + 1)) + 8.0)


def _mode_hint(n):
    return math.sqrt(2.0 * math.log(2 * n + 1))


def yn_moment_numeric(n, sigma=1.0, k=1, rtol=1e-10):
    """``E[Y_n**k]`` by adaptive quadrature of the max-abs density."""
    _check_n_sigma(n, sigma)
    if int(k) != k or k < 1:
        raise ValueError(f"moment order must be a positive integer, got {k!r}")
    hi = moment_upper_limit(n, 1.0)
    peak = _mode_hint(n)
    value, _ = integrate(
        lambda y: y ** k * max_abs_pdf(y, n, 1.0),
        0.0,
        hi,
        rtol=rtol,
        atol=1e-14,
        breakpoints=(max(peak - 1.0, 0.0), peak, peak + 1.0),
    )
    return value * sigma ** k


def ribbon(n_list, precision, sigma=1.0, mode="numeric"):
    """Rows ``(n, E[Y_n]/alpha, sd[Y_n]/alpha)`` for the confidence ribbon.

    ``mode="numeric"`` uses quadrature moments of the exact density;
    ``mode="asymptotic"`` uses the Gumbel mean and variance (n >= 2 only).
    """
    alpha = alpha_for(precision)
    rows = []
    for n in n_list:
        if mode == "numeric":
            m1 = yn_moment_numeric(n, sigma, 1)
            m2 = yn_moment_numeric(n, sigma, 2)
            mean, var = m1, max(m2 - m1 * m1, 0.0)
        elif mode == "asymptotic":
            mean, var = yn_mean_var(n, sigma)
        else:
            raise ValueError(f"unknown ribbon mode {mode!r}")
        rows.append((int(n), mean / alpha, math.sqrt(var) / alpha))
    return rows


def crossing_block_size(level, precision, sigma=1.0, mode="numeric", n_max=1 << 20):
    """Smallest block size whose ribbon mean ``E[Y_n]/alpha`` reaches ``level``.

    The mean is increasing in ``n``, so an integer bisection suffices.
    Returns None when ``level`` is not reached by ``n_max``.
    """
    lo = 1 if mode == "numeric" else 2

    def mean(n):
        return ribbon([n], precision, sigma, mode)[0][1]

    if mean(lo) >= level:
        return lo
    if mean(n_max) < level:
        return None
    hi = n_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mean(mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi
