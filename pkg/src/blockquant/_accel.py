"""Backend selection for the hot kernels.

Kernels come in two flavours: a numba ``@njit`` version and a pure-numpy
version with the same signature.  The numba path is used when numba imports
and ``BLOCKQUANT_DISABLE_JIT`` is unset (or ``0``).  ``BLOCKQUANT_THREADS``
caps the numba worker count.
"""
import os

__all__ = ["HAVE_NUMBA", "USE_NUMBA", "njit", "prange", "resolve_backend"]

_flag = os.environ.get("BLOCKQUANT_DISABLE_JIT", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and not _disabled

if HAVE_NUMBA:
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _threads = os.environ.get("BLOCKQUANT_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))


def resolve_backend(backend=None):
    """Return ``"numba"`` or ``"numpy"`` for an explicit or default choice."""
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}; expected 'numba' or 'numpy'")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend
