"""Seeded Monte Carlo estimates of the inner-product quantization error.

Every trial draws a fresh pair of Gaussian blocks from a counter-based
stream keyed by ``(seed, trial index)`` (see :mod:`blockquant.kernels`), so a
run is bit-reproducible regardless of chunking or thread count.  SBFP and BFP
errors are computed from the same draws; a sweep derives one seed per
``(n, p1, p2)`` grid point, shared by both formats.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .formats import Format, alpha_for

__all__ = [
    "ErrorStats",
    "SimulationConfig",
    "SweepRow",
    "derive_seed",
    "simulate_error",
    "simulate_error_pair",
    "simulate_errors",
    "summarize",
    "sweep",
    "sweep_pair",
]

_MASK = (1 << 64) - 1
_CHUNK = 1 << 16


def _splitmix(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed, *keys):
    """Fold integer ``keys`` into a 64-bit child seed of ``seed``."""
    h = _splitmix(int(seed) & _MASK)
    for k in keys:
        h = _splitmix(h ^ (int(k) & _MASK))
    return h


@dataclass(frozen=True)
class SimulationConfig:
    kind: Format
    n: int
    p1: int
    p2: int | None = None
    sigma: float = 1.0
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Format.parse(self.kind))
        if self.p2 is None:
            object.__setattr__(self, "p2", self.p1)
        alpha_for(self.p1), alpha_for(self.p2)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"block size must be a positive integer, got {self.n!r}")
        if int(self.trials) != self.trials or self.trials < 2:
            raise ValueError(f"need at least 2 trials, got {self.trials!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not 0 <= int(self.seed) <= _MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    variance: float
    trials: int

    @property
    def std_error_of_variance(self):
        """Gaussian-approximation standard error ``sqrt(2/(N-1)) * variance``."""
        return math.sqrt(2.0 / (self.trials - 1)) * self.variance

    @property
    def relative_std_error(self):
        return math.sqrt(2.0 / (self.trials - 1))

    @property
    def std_error_of_mean(self):
        return math.sqrt(self.variance / self.trials)


def summarize(errors):
    e = np.asarray(errors, dtype=np.float64)
    if e.size < 2:
        raise ValueError("need at least 2 samples")
    return ErrorStats(float(e.mean()), float(e.var(ddof=1)), int(e.size))


def simulate_errors(config, backend=None):
    """Raw ``(sbfp_errors, bfp_errors)`` arrays, one entry per trial."""
    c = config
    a1, a2 = alpha_for(c.p1), alpha_for(c.p2)
    es = np.empty(c.trials)
    eb = np.empty(c.trials)
    for start in range(0, c.trials, _CHUNK):
        stop = min(c.trials, start + _CHUNK)
        es[start:stop], eb[start:stop] = kernels.mc_block_errors(
            c.seed, start, stop - start, c.n, c.sigma, a1, a2, backend=backend
        )
    return es, eb


def simulate_error_pair(config, backend=None):
    """``{Format.SBFP: ErrorStats, Format.BFP: ErrorStats}`` from shared draws."""
    es, eb = simulate_errors(config, backend)
    return {Format.SBFP: summarize(es), Format.BFP: summarize(eb)}


def simulate_error(config, backend=None):
    return simulate_error_pair(config, backend)[config.kind]


@dataclass(frozen=True)
class SweepRow:
    n: int
    p: int
    variance: float
    std_error: float
    normalized_variance: float
    mean: float
    trials: int

    @property
    def normalized_std_error(self):
        return self.std_error / self.n


def sweep_pair(n_list, p_list, sigma=1.0, trials=100_000, seed=0, p2=None, backend=None):
    """Run both formats over the grid; returns ``{Format: [SweepRow, ...]}``.

    ``p2`` fixes the second block's precision; by default it equals ``p``.
    Rows are sorted by ``(p, n)``.
    """
    out = {Format.SBFP: [], Format.BFP: []}
    for p in sorted(set(int(p) for p in p_list)):
        q = p if p2 is None else int(p2)
        for n in sorted(set(int(n) for n in n_list)):
            cfg = SimulationConfig(Format.SBFP, n, p, q, sigma, trials, derive_seed(seed, n, p, q))
            for kind, st in simulate_error_pair(cfg, backend).items():
                out[kind].append(
                    SweepRow(n, p, st.variance, st.std_error_of_variance,
                             st.variance / n, st.mean, st.trials)
                )
    return out


def sweep(n_list, p_list, kind, sigma=1.0, trials=100_000, seed=0, p2=None, backend=None):
    return sweep_pair(n_list, p_list, sigma, trials, seed, p2, backend)[Format.parse(kind)]
