"""Variance and tail bounds for the inner-product quantization error.

Two Gaussian blocks ``a, b`` of length ``n`` with i.i.d. ``N(0, sigma**2)``
entries are quantized with precisions ``p1, p2`` (``alpha_j = 2**(p_j-1) - 1``)
and multiplied.  This module evaluates

* closed-form asymptotic variance bounds (large ``n``),
* high-dimensional bounds that integrate the block scales against the exact
  max-abs density ``f_n`` (taken at unit variance, ``Y = sigma * y``),
* the sub-Gaussian tail bound and the conditional variance proxies for
  fixed block maxima.

The asymptotic forms use ``L(n) = ln(4n^2 / (2 pi ln(2n^2/pi)))``, which is
also the squared Gumbel location of ``Y_n / sigma``.
"""
from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np
from scipy.special import erfinv

from .extreme import max_abs_logcdf, max_abs_sf, yn_moment_numeric
from .formats import Format, alpha_for

__all__ = [
    "BoundCurve",
    "BoundQuery",
    "Regime",
    "bfp_asymptotic_var_bound",
    "bfp_hd_var_bound",
    "bfp_scale_second_moment",
    "bound_curve",
    "conditional_proxy_bfp",
    "conditional_proxy_sbfp",
    "evaluate",
    "log_factor",
    "sbfp_asymptotic_var_bound",
    "sbfp_hd_var_bound",
    "tail_bound",
]


class Regime(str, Enum):
    ASYMPTOTIC = "asymptotic"
    HIGH_DIMENSIONAL = "highdim"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        v = str(value).lower().replace("-", "_")
        if v in ("highdim", "high_dimensional", "hd"):
            return cls.HIGH_DIMENSIONAL
        if v == "asymptotic":
            return cls.ASYMPTOTIC
        raise ValueError(f"unknown regime {value!r}; expected 'asymptotic' or 'highdim'")


def _check(n, sigma):
    if int(n) != n or n < 2:
        raise ValueError(f"bounds need an integer block size n >= 2, got {n!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def log_factor(n):
    """``ln(4n^2 / (2 pi ln(2n^2/pi)))``; raises when the argument is <= 1."""
    inner = 2.0 * n * n / math.pi
    if inner <= 1.0:
        raise ValueError(f"log factor undefined for n={n}: ln(2n^2/pi) <= 0")
    arg = 4.0 * n * n / (2.0 * math.pi * math.log(inner))
    if arg <= 1.0:
        raise ValueError(f"log factor undefined for n={n}: argument {arg:.4g} <= 1")
    return math.log(arg)


def sbfp_asymptotic_var_bound(n, p1, p2, sigma=1.0):
    _check(n, sigma)
    alpha_for(p1), alpha_for(p2)
    precision_term = 2.0 ** (-2 * (p1 - 1)) + 2.0 ** (-2 * (p2 - 1))
    return sigma ** 4 / 8.0 * precision_term * n * log_factor(n)


def bfp_asymptotic_var_bound(n, p, sigma=1.0):
    _check(n, sigma)
    alpha_for(p)
    expo = math.ceil(math.log2(sigma / 2.0 ** (p - 1)) + 0.5 * math.log2(log_factor(n)))
    return sigma ** 2 / 4.0 * n * 4.0 ** expo


def sbfp_hd_var_bound(n, p1, p2, sigma=1.0, sigma_b=None):
    """High-dimensional SBFP bound ``(n/8) * sigma^4 * E[y^2] * (1/a1^2 + 1/a2^2)``.

    ``sigma_b`` gives block ``b`` its own population scale (default: same as
    ``a``); each quantization term is weighted by the other block's variance.
    """
    _check(n, sigma)
    sb = sigma if sigma_b is None else sigma_b
    if not sb > 0:
        raise ValueError(f"sigma_b must be positive, got {sb!r}")
    a1, a2 = alpha_for(p1), alpha_for(p2)
    m2 = yn_moment_numeric(n, 1.0, 2)
    return n / 8.0 * (sb ** 2 * sigma ** 2 * m2 / a1 ** 2 + sigma ** 2 * sb ** 2 * m2 / a2 ** 2)


def _plateau_mass(n, lo, hi):
    """``F_n(hi) - F_n(lo)`` for unit sigma, choosing the cancellation-free side."""
    if lo <= 0.0:
        return math.exp(float(max_abs_logcdf(hi, n)))
    log_lo = float(max_abs_logcdf(lo, n))
    if log_lo < math.log(0.5):
        return math.exp(float(max_abs_logcdf(hi, n))) - math.exp(log_lo)
    return float(max_abs_sf(lo, n)) - float(max_abs_sf(hi, n))


def bfp_scale_second_moment(n, scale_ratio, rel_tol=1e-14):
    """``E[4**ceil(log2(y / scale_ratio))]`` for ``y ~ f_n`` at unit sigma.

    ``scale_ratio = alpha / sigma``.  Summed exactly over the plateaus of the
    ceiling: the plateau ``k`` covers ``scale_ratio * (2**(k-1), 2**k]``.
    Plateaus are added outward from the median until a plateau's weighted
    mass drops below ``rel_tol`` of the running total.
    """
    c = float(scale_ratio)
    median = _median_unit(n)
    k0 = math.ceil(math.log2(median / c))
    total = 0.0
    k = k0
    while True:
        term = 4.0 ** k * _plateau_mass(n, c * 2.0 ** (k - 1), c * 2.0 ** k)
        total += term
        if k > k0 and term <= rel_tol * total:
            break
        k += 1
    k = k0 - 1
    while True:
        term = 4.0 ** k * _plateau_mass(n, c * 2.0 ** (k - 1), c * 2.0 ** k)
        total += term
        if term <= rel_tol * total or c * 2.0 ** k < 1e-300:
            break
        k -= 1
    return total


def _median_unit(n):
    # F_n(y) = erf(y / sqrt 2)**n = 1/2  =>  y = sqrt(2) * erfinv(2**(-1/n))
    return math.sqrt(2.0) * float(erfinv(2.0 ** (-1.0 / n)))


def bfp_hd_var_bound(n, p1, p2, sigma=1.0, sigma_b=None):
    """High-dimensional BFP bound ``(n/8) [sb^2 E[S_a^2] + sa^2 E[S_b^2]]``.

    ``S_j = 2**ceil(log2(sigma_j * y / alpha_j))`` is the BFP scale of block
    ``j``; with a common sigma this is ``(n sigma^2 / 8) [I(a1) + I(a2)]``.
    """
    _check(n, sigma)
    sb = sigma if sigma_b is None else sigma_b
    if not sb > 0:
        raise ValueError(f"sigma_b must be positive, got {sb!r}")
    a1, a2 = alpha_for(p1), alpha_for(p2)
    ea = bfp_scale_second_moment(n, a1 / sigma)
    eb = bfp_scale_second_moment(n, a2 / sb)
    return n / 8.0 * (sb ** 2 * ea + sigma ** 2 * eb)


def tail_bound(t, variance):
    """``min(1, 2 exp(-t^2 / (4 variance)))``: two-sided sub-Gaussian tail."""
    if t < 0 or not variance > 0:
        raise ValueError(f"need t >= 0 and variance > 0, got t={t!r}, variance={variance!r}")
    return min(1.0, 2.0 * math.exp(-t * t / (4.0 * variance)))


def _proxy(s1, s2, n, sigma):
    return (
        (n - 1) * s1 * s1 * sigma * sigma / 4.0
        + (n - 1) * s2 * s2 * sigma * sigma / 4.0
        + (n - 2) * (s1 * s2) ** 2 / 2.0 ** 7
    )


def conditional_proxy_sbfp(y1, y2, n, p1, p2, sigma=1.0):
    """Variance proxy of the SBFP error given the block maxima ``y1, y2``."""
    _check(n, sigma)
    if not (y1 > 0 and y2 > 0):
        raise ValueError("block maxima must be positive")
    return _proxy(y1 / alpha_for(p1), y2 / alpha_for(p2), n, sigma)


def conditional_proxy_bfp(y1, y2, n, p1, p2, sigma=1.0):
    """As :func:`conditional_proxy_sbfp` with scales rounded up to powers of two."""
    _check(n, sigma)
    if not (y1 > 0 and y2 > 0):
        raise ValueError("block maxima must be positive")

    def up(r):
        m, e = math.frexp(r)
        return 2.0 ** (e - 1 if m == 0.5 else e)

    return _proxy(up(y1 / alpha_for(p1)), up(y2 / alpha_for(p2)), n, sigma)


@dataclass(frozen=True)
class BoundQuery:
    kind: Format
    regime: Regime
    n: int
    p1: int
    p2: int
    sigma: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Format.parse(self.kind))
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        _check(self.n, self.sigma)
        alpha_for(self.p1), alpha_for(self.p2)
        if self.kind is Format.BFP and self.regime is Regime.ASYMPTOTIC and self.p1 != self.p2:
            raise ValueError("the asymptotic BFP bound requires equal precisions")


def evaluate(query):
    """Bound value for a :class:`BoundQuery` (divided by ``n`` when normalized)."""
    q = query
    if q.regime is Regime.ASYMPTOTIC:
        if q.kind is Format.SBFP:
            v = sbfp_asymptotic_var_bound(q.n, q.p1, q.p2, q.sigma)
        else:
            v = bfp_asymptotic_var_bound(q.n, q.p1, q.sigma)
    elif q.kind is Format.SBFP:
        v = sbfp_hd_var_bound(q.n, q.p1, q.p2, q.sigma)
    else:
        v = bfp_hd_var_bound(q.n, q.p1, q.p2, q.sigma)
    return v / q.n if q.normalized else v


@dataclass(frozen=True)
class BoundCurve:
    kind: Format
    regime: Regime
    p1: int
    p2: int
    sigma: float
    normalized: bool
    rows: list = field(default_factory=list)

    @property
    def n(self):
        return np.array([r[0] for r in self.rows])

    @property
    def values(self):
        return np.array([r[1] for r in self.rows])


def bound_curve(kind, regime, n_list, p1, p2=None, sigma=1.0, normalized=False):
    p2 = p1 if p2 is None else p2
    rows = []
    for n in n_list:
        q = BoundQuery(kind, regime, int(n), p1, p2, sigma, normalized)
        rows.append((int(n), evaluate(q)))
    return BoundCurve(Format.parse(kind), Regime.parse(regime), p1, p2, sigma, normalized, rows)
