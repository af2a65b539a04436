"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

Random numbers come from a counter-based generator: the ``j``-th 64-bit word
of trial ``t`` under seed ``s`` is::

    key_t = mix64(mix64(s) + (t + 1) * 0xD1B54A32D192ED03)
    word  = mix64(key_t + (j + 1) * 0x9E3779B97F4A7C15)

where ``mix64`` is the SplitMix64 finaliser.  Words ``2k`` and ``2k + 1``
feed one Box-Muller transform (``u1 = (w0 >> 11 + 1) / 2**53`` in (0, 1],
``u2 = (w1 >> 11) / 2**53``) and yield normals ``2k`` (cosine branch) and
``2k + 1`` (sine branch).  A trial draws ``2n`` normals: the first ``n`` form
block ``a``, the last ``n`` form block ``b``.  Any trial can therefore be
regenerated on its own, in any order, on any worker.

Both backends use identical integer hashing; the transcendental functions in
Box-Muller come from different math libraries, so the two backends agree to
floating-point rounding rather than bit-for-bit.  Each backend on its own is
bit-reproducible.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit, prange, resolve_backend

__all__ = [
    "MIN_EXPONENT",
    "ZERO_EXPONENT",
    "block_pair_errors",
    "gaussian_block_pairs",
    "mc_block_errors",
    "quantize_blocks",
    "round_half_away",
]

#: BFP exponent stored for an all-zero block; ``2.0**ZERO_EXPONENT == 0.0``.
ZERO_EXPONENT = -1075
#: Smallest BFP exponent with a nonzero scale; blocks whose max-abs sits in the
#: subnormal range below ``alpha * 2**MIN_EXPONENT`` use this floor.
MIN_EXPONENT = -1074

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_TRIAL_GAMMA = np.uint64(0xD1B54A32D192ED03)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# numba scalar helpers
# --------------------------------------------------------------------------

@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _trial_key(seed, t):
    return _mix64(_mix64(seed) + (np.uint64(t) + _ONE) * _TRIAL_GAMMA)


@njit(cache=True)
def _fill_normals(key, buf, sigma):
    half = buf.shape[0] // 2
    for k in range(half):
        w0 = _mix64(key + (np.uint64(2 * k) + _ONE) * _GOLDEN)
        w1 = _mix64(key + (np.uint64(2 * k + 1) + _ONE) * _GOLDEN)
        u1 = float((w0 >> _S11) + _ONE) * _TWO_M53
        u2 = float(w1 >> _S11) * _TWO_M53
        r = math.sqrt(-2.0 * math.log(u1)) * sigma
        th = _TWO_PI * u2
        buf[2 * k] = r * math.cos(th)
        buf[2 * k + 1] = r * math.sin(th)


@njit(cache=True)
def _round_scalar(z):
    r = np.trunc(z)
    if abs(z - r) >= 0.5:
        r += 1.0 if z > 0 else -1.0
    return r


@njit(cache=True)
def _bfp_exp(y, fa):
    """Exact ``ceil(log2(y / fa))`` for ``y > 0``, floored at MIN_EXPONENT."""
    m, ey = math.frexp(y)
    mr, er = math.frexp(m / fa)
    e = er + ey
    if mr == 0.5:
        e -= 1
    # the quotient above is rounded; settle the boundary with exact products
    if math.ldexp(fa, e - 1) >= y:
        e -= 1
    elif math.ldexp(fa, e) < y:
        e += 1
    return max(e, MIN_EXPONENT)


@njit(cache=True)
def _quantize_row(x, alpha, bfp, out):
    """Quantize one block into ``out``; return (scale, exponent)."""
    n = x.shape[0]
    y = 0.0
    for i in range(n):
        v = abs(x[i])
        if v > y:
            y = v
    if y == 0.0:
        for i in range(n):
            out[i] = 0
        return 0.0, ZERO_EXPONENT if bfp else 0
    fa = float(alpha)
    if bfp:
        e = _bfp_exp(y, fa)
        for i in range(n):
            m = _round_scalar(math.ldexp(x[i], -e))
            if m > fa:
                m = fa
            elif m < -fa:
                m = -fa
            out[i] = np.int64(m)
        return math.ldexp(1.0, e), e
    for i in range(n):
        m = _round_scalar(fa * x[i] / y)
        if m > fa:
            m = fa
        elif m < -fa:
            m = -fa
        out[i] = np.int64(m)
    return y / fa, 0


@njit(cache=True)
def _pair_errors(a, b, alpha1, alpha2, ma, mb):
    """Return (SBFP error, BFP error) for one pair of blocks."""
    n = a.shape[0]
    exact = 0.0
    for i in range(n):
        exact += a[i] * b[i]
    sa, _ = _quantize_row(a, alpha1, False, ma)
    sb, _ = _quantize_row(b, alpha2, False, mb)
    acc = np.int64(0)
    for i in range(n):
        acc += ma[i] * mb[i]
    es = exact - (sa * sb) * float(acc)
    sa, _ = _quantize_row(a, alpha1, True, ma)
    sb, _ = _quantize_row(b, alpha2, True, mb)
    acc = np.int64(0)
    for i in range(n):
        acc += ma[i] * mb[i]
    eb = exact - (sa * sb) * float(acc)
    return es, eb


@njit(cache=True, parallel=True)
def _mc_block_errors_numba(seed, trial0, trials, n, sigma, alpha1, alpha2):
    es = np.empty(trials)
    eb = np.empty(trials)
    useed = np.uint64(seed)
    for j in prange(trials):
        key = _trial_key(useed, trial0 + j)
        buf = np.empty(2 * n)
        _fill_normals(key, buf, sigma)
        ma = np.empty(n, dtype=np.int64)
        mb = np.empty(n, dtype=np.int64)
        es[j], eb[j] = _pair_errors(buf[:n], buf[n:], alpha1, alpha2, ma, mb)
    return es, eb


@njit(cache=True, parallel=True)
def _gaussian_block_pairs_numba(seed, trial0, trials, n, sigma):
    a = np.empty((trials, n))
    b = np.empty((trials, n))
    useed = np.uint64(seed)
    for j in prange(trials):
        buf = np.empty(2 * n)
        _fill_normals(_trial_key(useed, trial0 + j), buf, sigma)
        a[j, :] = buf[:n]
        b[j, :] = buf[n:]
    return a, b


@njit(cache=True, parallel=True)
def _quantize_blocks_numba(x, alpha, bfp):
    nb, n = x.shape
    mant = np.empty((nb, n), dtype=np.int64)
    scale = np.empty(nb)
    expo = np.empty(nb, dtype=np.int64)
    for r in prange(nb):
        s, e = _quantize_row(x[r], alpha, bfp, mant[r])
        scale[r] = s
        expo[r] = e
    return mant, scale, expo


@njit(cache=True, parallel=True)
def _block_pair_errors_numba(xa, xb, alpha1, alpha2):
    nb, n = xa.shape
    es = np.empty(nb)
    eb = np.empty(nb)
    for r in prange(nb):
        ma = np.empty(n, dtype=np.int64)
        mb = np.empty(n, dtype=np.int64)
        es[r], eb[r] = _pair_errors(xa[r], xb[r], alpha1, alpha2, ma, mb)
    return es, eb


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _normals_np(seed, trial0, trials, n, sigma):
    t = np.arange(trial0, trial0 + trials, dtype=np.uint64)
    seed_arr = np.full(1, seed, dtype=np.uint64)
    keys = _mix64_np(_mix64_np(seed_arr) + (t + _ONE) * _TRIAL_GAMMA)[:, None]
    j = np.arange(2 * n, dtype=np.uint64)[None, :]
    w = _mix64_np(keys + (j + _ONE) * _GOLDEN)
    u1 = ((w[:, 0::2] >> _S11) + _ONE).astype(np.float64) * _TWO_M53
    u2 = (w[:, 1::2] >> _S11).astype(np.float64) * _TWO_M53
    r = np.sqrt(-2.0 * np.log(u1)) * sigma
    th = _TWO_PI * u2
    out = np.empty((trials, 2 * n))
    out[:, 0::2] = r * np.cos(th)
    out[:, 1::2] = r * np.sin(th)
    return out[:, :n], out[:, n:]


def round_half_away(z):
    """Round to nearest integer, ties away from zero (vectorised)."""
    z = np.asarray(z, dtype=np.float64)
    r = np.trunc(z)
    return r + np.sign(z) * (np.abs(z - r) >= 0.5)


def _bfp_exp_np(y, fa):
    m, ey = np.frexp(y)
    mr, er = np.frexp(m / fa)
    e = (er + ey - (mr == 0.5)).astype(np.int64)
    e -= np.ldexp(fa, e - 1) >= y
    e += np.ldexp(fa, e) < y
    return np.maximum(e, MIN_EXPONENT)


def _quantize_blocks_np(x, alpha, bfp):
    fa = float(alpha)
    y = np.abs(x).max(axis=1)
    zero = y == 0.0
    ysafe = np.where(zero, 1.0, y)
    if bfp:
        e = _bfp_exp_np(ysafe, fa)
        z = np.ldexp(x, -e[:, None])
        scale = np.ldexp(1.0, e)
        expo = np.where(zero, ZERO_EXPONENT, e)
    else:
        z = fa * x / ysafe[:, None]
        scale = ysafe / fa
        expo = np.zeros(x.shape[0], dtype=np.int64)
    mant = np.clip(round_half_away(z), -fa, fa).astype(np.int64)
    mant[zero] = 0
    scale = np.where(zero, 0.0, scale)
    return mant, scale, expo


def _block_pair_errors_np(xa, xb, alpha1, alpha2):
    exact = np.einsum("ij,ij->i", xa, xb)
    out = []
    for bfp in (False, True):
        ma, sa, _ = _quantize_blocks_np(xa, alpha1, bfp)
        mb, sb, _ = _quantize_blocks_np(xb, alpha2, bfp)
        acc = np.einsum("ij,ij->i", ma, mb)
        out.append(exact - (sa * sb) * acc.astype(np.float64))
    return out[0], out[1]


def _mc_block_errors_np(seed, trial0, trials, n, sigma, alpha1, alpha2):
    es = np.empty(trials)
    eb = np.empty(trials)
    chunk = max(1, (1 << 20) // (2 * n))
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        a, b = _normals_np(seed, trial0 + start, stop - start, n, sigma)
        es[start:stop], eb[start:stop] = _block_pair_errors_np(a, b, alpha1, alpha2)
    return es, eb


# --------------------------------------------------------------------------
# dispatching front-ends
# --------------------------------------------------------------------------

def _as_blocks(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D array of blocks, got shape {x.shape}")
    return x


def _check_accumulator(n, alpha1, alpha2):
    # the kernels accumulate mantissa products in int64
    if int(alpha1) * int(alpha2) * int(n) >= 1 << 63:
        raise ValueError(
            f"int64 accumulator too narrow for n={n} with alphas {alpha1}, {alpha2}"
        )


def quantize_blocks(x, alpha, bfp, backend=None):
    """Quantize each row of ``x`` as one block.

    Returns ``(mantissas, scales, exponents)``; exponents are meaningful for
    BFP only (SBFP rows report 0).  All-zero rows get zero mantissas, scale
    0.0 and, for BFP, :data:`ZERO_EXPONENT`.
    """
    x = _as_blocks(x)
    if resolve_backend(backend) == "numba":
        return _quantize_blocks_numba(x, int(alpha), bool(bfp))
    return _quantize_blocks_np(x, int(alpha), bool(bfp))


def block_pair_errors(xa, xb, alpha1, alpha2, backend=None):
    """Inner-product quantization errors of aligned block rows.

    Returns ``(sbfp_errors, bfp_errors)``, one entry per row pair.
    """
    xa = _as_blocks(xa)
    xb = _as_blocks(xb)
    if xa.shape != xb.shape:
        raise ValueError(f"block arrays differ in shape: {xa.shape} vs {xb.shape}")
    _check_accumulator(xa.shape[1], alpha1, alpha2)
    if resolve_backend(backend) == "numba":
        return _block_pair_errors_numba(xa, xb, int(alpha1), int(alpha2))
    return _block_pair_errors_np(xa, xb, int(alpha1), int(alpha2))


def gaussian_block_pairs(seed, trial0, trials, n, sigma=1.0, backend=None):
    """Regenerate the Gaussian block pairs used by :func:`mc_block_errors`."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if resolve_backend(backend) == "numba":
        return _gaussian_block_pairs_numba(np.uint64(seed), int(trial0), int(trials), int(n), float(sigma))
    return _normals_np(seed, int(trial0), int(trials), int(n), float(sigma))


def mc_block_errors(seed, trial0, trials, n, sigma, alpha1, alpha2, backend=None):
    """SBFP and BFP inner-product errors for ``trials`` Gaussian block pairs.

    Trial ``trial0 + j`` depends only on ``(seed, trial0 + j)``.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    _check_accumulator(n, alpha1, alpha2)
    args = (int(trial0), int(trials), int(n), float(sigma), int(alpha1), int(alpha2))
    if resolve_backend(backend) == "numba":
        return _mc_block_errors_numba(np.uint64(seed), *args)
    return _mc_block_errors_np(seed, *args)
