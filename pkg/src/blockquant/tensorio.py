"""Weight-tensor files and the layer-pair inner-product experiment.

``rawbin`` layout (all little-endian)::

    offset 0   8 bytes   magic b"BQTENSR1"
    offset 8   uint64    rows
    offset 16  uint64    cols
    offset 24  float32   rows * cols values, row-major

``csv``: one tensor row per line, comma-separated decimal floats, every line
the same length.

The layer-pair experiment takes ``A`` (m x k) and ``B`` (k x m), pairs row
``i`` of ``A`` with column ``i`` of ``B`` (the diagonal of ``A @ B``), cuts
both into aligned blocks of ``n`` along ``k`` and records one inner-product
error per block pair.
"""
from dataclasses import asdict, dataclass
import math
from pathlib import Path
import struct

import numpy as np

from . import kernels
from .bounds import bfp_hd_var_bound, sbfp_hd_var_bound
from .formats import alpha_for

__all__ = [
    "MAGIC",
    "LayerPairReport",
    "MagicMismatchError",
    "NonFiniteValueError",
    "RaggedCSVError",
    "TensorFormatError",
    "TruncatedTensorError",
    "WeightTensor",
    "analyze_layer_pair",
    "layer_pair_errors",
    "load_tensor",
    "save_tensor",
    "synthetic_layer_pair",
]

MAGIC = b"BQTENSR1"
_HEADER = struct.Struct("<8sQQ")


class TensorFormatError(ValueError):
    """A tensor file could not be parsed."""


class MagicMismatchError(TensorFormatError):
    pass


class TruncatedTensorError(TensorFormatError):
    pass


class RaggedCSVError(TensorFormatError):
    pass


class NonFiniteValueError(TensorFormatError):
    pass


@dataclass(frozen=True, eq=False)
class WeightTensor:
    name: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError(f"weight tensor {self.name!r} must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValueError(f"weight tensor {self.name!r} contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("rawbin", "csv"):
            raise ValueError(f"unknown tensor format {fmt!r}; expected 'rawbin' or 'csv'")
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "rawbin"


def _load_rawbin(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedTensorError(
            f"{path}: header needs {_HEADER.size} bytes, file has {len(data)}"
        )
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MagicMismatchError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = rows * cols * 4
    payload = len(data) - _HEADER.size
    if payload < expected:
        raise TruncatedTensorError(
            f"{path}: payload truncated, expected {expected} bytes for {rows}x{cols} "
            f"float32, got {payload}"
        )
    if payload > expected:
        raise TensorFormatError(
            f"{path}: {payload - expected} trailing bytes after {rows}x{cols} payload"
        )
    values = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=_HEADER.size)
    values = values.astype(np.float32).reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValueError(f"{path}: non-finite value at row {bad[0]}, col {bad[1]}")
    return values


def _load_csv(path):
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise RaggedCSVError(
                    f"{path}:{lineno}: {len(fields)} fields, expected {width}"
                )
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise TensorFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in row):
                raise NonFiniteValueError(f"{path}:{lineno}: non-finite value")
            rows.append(row)
    if not rows:
        raise TensorFormatError(f"{path}: empty csv")
    return np.array(rows, dtype=np.float64)


def load_tensor(path, fmt=None, name=None):
    """Read a :class:`WeightTensor`; ``fmt`` defaults from the file suffix."""
    fmt = _infer_format(path, fmt)
    values = _load_rawbin(path) if fmt == "rawbin" else _load_csv(path)
    return WeightTensor(name or Path(path).stem, values)


def save_tensor(tensor, path, fmt=None):
    values = tensor.values if isinstance(tensor, WeightTensor) else np.asarray(tensor)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D tensor, got shape {values.shape}")
    fmt = _infer_format(path, fmt)
    if fmt == "rawbin":
        rows, cols = values.shape
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, rows, cols))
            fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())
    else:
        with open(path, "w", newline="\n") as fh:
            for row in values.tolist():
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class LayerPairReport:
    """Per-layer error statistics; variances and bounds are divided by ``n``."""

    layer: str
    n: int
    p: int
    samples: int
    sigma_a: float
    sigma_b: float
    var_sbfp: float
    var_bfp: float
    rel_std_error: float
    bound_sbfp: float
    bound_bfp: float

    @property
    def rho(self):
        return self.var_bfp / self.var_sbfp

    def as_dict(self):
        d = asdict(self)
        d["rho"] = self.rho
        return d


def _values(t):
    return t.values if isinstance(t, WeightTensor) else np.asarray(t)


def _prepare(a, b, n, center):
    va = np.asarray(_values(a), dtype=np.float64)
    vb = np.asarray(_values(b), dtype=np.float64)
    if va.ndim != 2 or vb.ndim != 2:
        raise ValueError("layer tensors must be 2-D")
    k = va.shape[1]
    if vb.shape[0] != k:
        raise ValueError(
            f"inner dimensions differ: A is {va.shape[0]}x{k}, B is {vb.shape[0]}x{vb.shape[1]}"
        )
    if int(n) != n or n < 1:
        raise ValueError(f"block size must be a positive integer, got {n!r}")
    if center:
        va = va - va.mean()
        vb = vb - vb.mean()
    return va, vb


def _diagonal_errors(va, vb, n, p, p2, backend):
    n = int(n)
    full = va.shape[1] // n
    d = min(va.shape[0], vb.shape[1])
    xa = np.ascontiguousarray(va[:d, : full * n]).reshape(d * full, n)
    xb = np.ascontiguousarray(vb[: full * n, :d].T).reshape(d * full, n)
    return kernels.block_pair_errors(xa, xb, alpha_for(p), alpha_for(p2), backend=backend)


def layer_pair_errors(a, b, n, p, center=False, p2=None, backend=None):
    """Per-block ``(sbfp_errors, bfp_errors)`` for row ``i`` of ``a`` against
    column ``i`` of ``b``, ordered by row then block."""
    va, vb = _prepare(a, b, n, center)
    return _diagonal_errors(va, vb, n, p, p if p2 is None else p2, backend)


def analyze_layer_pair(a, b, n, p, center=False, layer="0", p2=None, backend=None):
    """Quantization error statistics for the diagonal inner products of ``a @ b``.

    Only full blocks contribute samples; a trailing remainder of ``k mod n``
    columns is ignored.  sigma is estimated per tensor (sample standard
    deviation of all entries) and plugged into the high-dimensional bounds.
    """
    va, vb = _prepare(a, b, n, center)
    n = int(n)
    p2 = p if p2 is None else p2
    if (va.shape[1] // n) * min(va.shape[0], vb.shape[1]) < 2:
        raise ValueError(
            f"block size {n} leaves fewer than 2 block pairs for inner dimension {va.shape[1]}"
        )
    sigma_a = float(va.std(ddof=1))
    sigma_b = float(vb.std(ddof=1))
    es, eb = _diagonal_errors(va, vb, n, p, p2, backend)
    samples = es.size
    return LayerPairReport(
        layer=str(layer),
        n=n,
        p=int(p),
        samples=int(samples),
        sigma_a=sigma_a,
        sigma_b=sigma_b,
        var_sbfp=float(es.var(ddof=1)) / n,
        var_bfp=float(eb.var(ddof=1)) / n,
        rel_std_error=math.sqrt(2.0 / (samples - 1)),
        bound_sbfp=sbfp_hd_var_bound(n, p, p2, sigma_a, sigma_b) / n,
        bound_bfp=bfp_hd_var_bound(n, p, p2, sigma_a, sigma_b) / n,
    )


def synthetic_layer_pair(layer, seed=0, rows=1600, inner=6400, sigma=1.0):
    """Gaussian stand-ins for one FFN layer pair: ``rows x inner`` and ``inner x rows``."""
    rng = np.random.default_rng([int(seed), int(layer)])
    a = rng.standard_normal((rows, inner), dtype=np.float32)
    b = rng.standard_normal((inner, rows), dtype=np.float32)
    if sigma != 1.0:
        a *= np.float32(sigma)
        b *= np.float32(sigma)
    return (
        WeightTensor(f"layer{layer}.fc", a),
        WeightTensor(f"layer{layer}.proj", b),
    )
