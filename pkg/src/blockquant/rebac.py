"""Relative block-format accuracy (REBAC) and optimal block-size selection.

``rho(n) = Var(BFP error) / Var(SBFP error)`` at block size ``n``.  SBFP is
the benchmark, so ``rho >= 1`` and the best block size is the one that
minimises it.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .bounds import bfp_hd_var_bound, sbfp_hd_var_bound
from .formats import Format
from .montecarlo import sweep_pair

__all__ = ["DEFAULT_GRID", "RebacCurve", "optimal_block_size", "rebac_curve"]

DEFAULT_GRID = tuple(2 ** k for k in range(3, 13))


@dataclass(frozen=True)
class RebacCurve:
    p: int
    sigma: float
    mode: str
    rows: list = field(default_factory=list)
    # relative standard error of each rho (empirical mode only)
    rel_errors: list | None = None

    @property
    def n(self):
        return np.array([r[0] for r in self.rows])

    @property
    def rho(self):
        return np.array([r[1] for r in self.rows])

    @property
    def argmin_n(self):
        return optimal_block_size(self)


def optimal_block_size(curve):
    """Grid point with the smallest ratio; ties go to the smaller block."""
    if not curve.rows:
        raise ValueError("empty REBAC curve")
    best_n, best_rho = None, math.inf
    for n, rho in sorted(curve.rows):
        if rho < best_rho:
            best_n, best_rho = n, rho
    return best_n


def rebac_curve(n_list=DEFAULT_GRID, p=4, sigma=1.0, mode="theoretical",
                trials=100_000, seed=0, backend=None):
    """REBAC ratio over a block-size grid.

    ``mode="theoretical"`` divides the high-dimensional BFP bound by the
    high-dimensional SBFP bound; ``mode="empirical"`` divides Monte Carlo
    variances estimated from shared draws.
    """
    grid = sorted(set(int(n) for n in n_list))
    if not grid:
        raise ValueError("empty block-size grid")
    if mode == "theoretical":
        rows = []
        for n in grid:
            den = sbfp_hd_var_bound(n, p, p, sigma)
            if not den > 0:
                raise ValueError(f"degenerate SBFP variance at n={n}")
            rows.append((n, bfp_hd_var_bound(n, p, p, sigma) / den))
        return RebacCurve(int(p), float(sigma), mode, rows)
    if mode == "empirical":
        res = sweep_pair(grid, [p], sigma, trials, seed, backend=backend)
        rows, rel = [], []
        for s, b in zip(res[Format.SBFP], res[Format.BFP]):
            if not s.variance > 0:
                raise ValueError(f"degenerate SBFP variance at n={s.n}")
            rows.append((s.n, b.variance / s.variance))
            rel.append(math.hypot(s.std_error / s.variance, b.std_error / b.variance))
        return RebacCurve(int(p), float(sigma), mode, rows, rel)
    raise ValueError(f"unknown REBAC mode {mode!r}; expected 'theoretical' or 'empirical'")
