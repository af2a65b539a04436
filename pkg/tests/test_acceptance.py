"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (about five minutes on
one core); the verdict lines are repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from blockquant.bounds import (
    bfp_asymptotic_var_bound,
    bfp_hd_var_bound,
    sbfp_asymptotic_var_bound,
    sbfp_hd_var_bound,
    tail_bound,
)
from blockquant.extreme import (
    crossing_block_size,
    moment_upper_limit,
    max_abs_pdf,
    yn_mean_var,
    yn_moment_numeric,
)
from blockquant.formats import Format
from blockquant.kernels import gaussian_block_pairs, quantize_blocks
from blockquant.montecarlo import SimulationConfig, simulate_error, simulate_errors, sweep_pair
from blockquant.quadrature import integrate
from blockquant.rebac import DEFAULT_GRID, rebac_curve
from blockquant.tensorio import analyze_layer_pair, synthetic_layer_pair

VERDICTS = []

GRID = [2 ** k for k in range(3, 13)]
PRECISIONS = (4, 6, 8)
TRIALS = 100_000


def verdict(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def gaussian_sweep():
    """Both formats on n = 8..4096, p = 4, 6, 8 from shared draws."""
    t0 = time.perf_counter()
    res = sweep_pair(GRID, PRECISIONS, sigma=1.0, trials=TRIALS, seed=20240101)
    return res, time.perf_counter() - t0


def test_c01_sbfp_asymptotic_dominance(gaussian_sweep):
    res, elapsed = gaussian_sweep
    worst, fails = None, []
    for row in res[Format.SBFP]:
        if row.n < 16:
            continue
        bound = sbfp_asymptotic_var_bound(row.n, row.p, row.p) / row.n
        z = (row.normalized_variance - bound) / row.normalized_std_error
        if worst is None or z > worst[0]:
            worst = (z, row.n, row.p, row.normalized_variance / bound)
        if z > 3:
            fails.append(f"(n={row.n},p={row.p}: emp/bound={row.normalized_variance / bound:.3f}, {z:.1f} se)")
    ok = not fails and elapsed <= 300
    detail = (f"worst n={worst[1]} p={worst[2]} emp/bound={worst[3]:.3f} ({worst[0]:+.1f} se); "
              f"sweep {elapsed:.0f}s")
    if fails:
        detail += "; violations " + " ".join(fails)
    verdict("C1 SBFP asymptotic bound dominance", ok, detail)


def test_c02_highdim_dominance_and_tightness(gaussian_sweep):
    res, _ = gaussian_sweep
    bad, min_ratio, max_ratio, max_z = [], math.inf, 0.0, -math.inf
    for kind, fn in ((Format.SBFP, sbfp_hd_var_bound), (Format.BFP, bfp_hd_var_bound)):
        for row in res[kind]:
            bound = fn(row.n, row.p, row.p) / row.n
            ratio = row.normalized_variance / bound
            z = (row.normalized_variance - bound) / row.normalized_std_error
            min_ratio, max_ratio = min(min_ratio, ratio), max(max_ratio, ratio)
            max_z = max(max_z, z)
            if z > 3 or ratio < 0.2:
                bad.append(f"({kind.value} n={row.n} p={row.p} ratio={ratio:.3f})")
    verdict("C2 high-dimensional bound dominance and tightness", not bad,
            f"emp/bound in [{min_ratio:.3f}, {max_ratio:.3f}], closest approach {max_z:+.1f} se" + (" " + " ".join(bad) if bad else ""))


def test_c03_six_db_per_bit():
    exact = all(
        sbfp_asymptotic_var_bound(n, p, p) / sbfp_asymptotic_var_bound(n, p + 1, p + 1) == 4.0
        for n in (2, 16, 64, 1000, 4096) for p in range(2, 16)
    )
    v4 = simulate_error(SimulationConfig("sbfp", 64, 4, trials=TRIALS, seed=41)).variance
    v5 = simulate_error(SimulationConfig("sbfp", 64, 5, trials=TRIALS, seed=42)).variance
    ratio = v4 / v5
    verdict("C3 6 dB per bit", exact and 3.4 <= ratio <= 4.7,
            f"closed-form ratio exactly 4: {exact}; empirical ratio {ratio:.3f} "
            f"({10 * math.log10(ratio):.2f} dB)")


def test_c04_jump_localization():
    t0 = time.perf_counter()
    n_quarter = crossing_block_size(0.25, 4)
    n_half = crossing_block_size(0.5, 4)
    gumbel_half = crossing_block_size(0.5, 4, mode="asymptotic")
    ok = 4 <= n_quarter <= 9 and 512 <= n_half <= 1200
    verdict("C4 ribbon crossings", ok,
            f"E[Y_n]/alpha reaches 1/4 at n={n_quarter}, 1/2 at n={n_half} "
            f"(Gumbel-mean ribbon: 1/2 at n={gumbel_half}); {time.perf_counter() - t0:.1f}s")


def test_c05_asymptotic_values():
    bfp = bfp_asymptotic_var_bound(64, 4, 1.0)
    sbfp = sbfp_asymptotic_var_bound(64, 4, 4, 1.0)
    # independent evaluation of the closed form
    n = 64
    L = math.log(4 * n * n / (2 * math.pi * math.log(2 * n * n / math.pi)))
    ref = (1 / 8) * (2 * 2.0 ** -6) * n * L
    ok = bfp == 4.0 and abs(sbfp - 1.4509) <= 1e-3 and abs(sbfp - ref) <= 1e-12 * ref
    verdict("C5 asymptotic values", ok, f"bfp(64,4)={bfp!r}, sbfp(64,4,4)={sbfp:.6f} (re-derived {ref:.6f})")


def test_c06_optimal_block_size():
    t0 = time.perf_counter()
    c4, c8 = rebac_curve(DEFAULT_GRID, p=4), rebac_curve(DEFAULT_GRID, p=8)
    elapsed = time.perf_counter() - t0
    grid = list(DEFAULT_GRID)
    ok4 = c4.argmin_n in (64, 128)
    ok8 = abs(grid.index(c8.argmin_n) - grid.index(512)) <= 1
    rho = dict(c4.rows)
    verdict("C6 optimal block size", ok4 and ok8 and elapsed <= 60,
            f"argmin p=4 -> {c4.argmin_n} (rho 64={rho[64]:.4f}, 128={rho[128]:.4f}, "
            f"256={rho[256]:.4f}); p=8 -> {c8.argmin_n}; {elapsed:.1f}s")


def test_c07_extreme_value_oracles():
    notes, ok = [], True
    for n in (1, 16, 1024):
        mass, _ = integrate(lambda y: max_abs_pdf(y, n), 0.0, moment_upper_limit(n), rtol=1e-12)
        ok &= abs(mass - 1) <= 1e-9
        notes.append(f"mass n={n} off by {abs(mass - 1):.1e}")
    e1 = yn_moment_numeric(1)
    ok &= abs(e1 - math.sqrt(2 / math.pi)) <= 1e-6
    notes.append(f"E[Y_1] off by {abs(e1 - math.sqrt(2 / math.pi)):.1e}")
    gaps = {n: yn_mean_var(n)[0] / yn_moment_numeric(n) - 1 for n in (256, 512, 1024, 2048, 4096)}
    gumbel_ok = all(abs(g) <= 0.02 for g in gaps.values())
    ok &= gumbel_ok
    notes.append("Gumbel/numeric mean gap " + ", ".join(f"{n}:{100 * g:.2f}%" for n, g in gaps.items()))
    for n in (8, 64, 1024):
        a, _ = gaussian_block_pairs(7000 + n, 0, TRIALS, n)
        y = np.abs(a).max(axis=1)
        z = (y.mean() - yn_moment_numeric(n)) / (y.std(ddof=1) / math.sqrt(y.size))
        ok &= abs(z) <= 3
        notes.append(f"MC mean n={n} {z:+.2f} se")
    verdict("C7 extreme-value oracles", ok, "; ".join(notes))


def test_c08_codec_properties():
    rng = np.random.default_rng(8)
    worst = 0.0
    ok = True
    for n in (8, 64):
        for p in (4, 8):
            alpha = 2 ** (p - 1) - 1
            x = rng.standard_normal((10_000, n)) * np.exp(rng.uniform(-20, 20, (10_000, 1)))
            y = np.abs(x).max(axis=1)
            ms, ss, _ = quantize_blocks(x, alpha, False)
            mb, sb, eb = quantize_blocks(x, alpha, True)
            slack = 4 * np.spacing(np.abs(x))
            err_s = np.abs(ss[:, None] * ms - x) - (ss[:, None] / 2 + slack)
            err_b = np.abs(sb[:, None] * mb - x) - (sb[:, None] / 2 + slack)
            worst = max(worst, err_s.max(), err_b.max())
            ok &= bool(np.all(err_s <= 0) and np.all(err_b <= 0))
            ok &= bool(np.all(np.abs(ms).max(axis=1) == alpha))
            ok &= bool(np.all(np.abs(mb) <= alpha))
            ok &= bool(np.all((np.ldexp(1.0, eb - 1) < y / alpha) & (y / alpha <= np.ldexp(1.0, eb))))
            r = sb / ss
            ok &= bool(np.all((r >= 1) & (r < 2)))
    verdict("C8 codec properties", ok, f"40000 blocks; max excess over S/2+4ulp {worst:.2e}")


def test_c09_synthetic_layers():
    t0 = time.perf_counter()
    bad, ratios = [], {16: [], 64: [], 256: []}
    for layer in range(48):
        a, b = synthetic_layer_pair(layer, seed=2024)
        for n in ratios:
            r = analyze_layer_pair(a, b, n, 4, layer=str(layer))
            for var, bound, tag in ((r.var_sbfp, r.bound_sbfp, "sbfp"), (r.var_bfp, r.bound_bfp, "bfp")):
                ratios[n].append(var / bound)
                if var > bound * (1 + 3 * r.rel_std_error):
                    bad.append(f"(layer {layer} n={n} {tag} {var / bound:.3f})")
    elapsed = time.perf_counter() - t0
    summary = ", ".join(f"n={n}: emp/bound max {max(v):.3f}" for n, v in ratios.items())
    verdict("C9 synthetic 48-layer experiment", not bad and elapsed <= 600,
            f"{summary}; {elapsed:.0f}s" + (" " + " ".join(bad) if bad else ""))


def test_c10_tail_bound():
    trials = 1_000_000
    es, _ = simulate_errors(SimulationConfig("sbfp", 64, 4, trials=trials, seed=1010))
    var = es.var(ddof=1)
    sd = math.sqrt(var)
    notes, ok = [], True
    for k in (1, 2, 3):
        t = k * sd
        freq = float(np.mean(np.abs(es) >= t))
        lo = freq - 3 * math.sqrt(freq * (1 - freq) / trials)
        bound = tail_bound(t, var)
        ok &= lo <= bound
        notes.append(f"t={k}sd freq {freq:.4g} vs bound {bound:.4g}")
    verdict("C10 sub-Gaussian tail bound", ok, "; ".join(notes))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
