"""SBFP and BFP block formats: quantize, dequantize, quantized inner products.

A block of ``n`` reals shares one scale ``S``; each element is stored as a
signed integer mantissa ``M_i`` in ``[-alpha, alpha]`` with
``alpha = 2**(p-1) - 1`` and value ``S * M_i``.

* SBFP keeps ``S = Y / alpha`` in full precision (``Y`` = block max-abs).
* BFP rounds ``Y / alpha`` up to a power of two, ``S = 2**e`` with
  ``e = ceil(log2(Y / alpha))``.

Mantissas are rounded to nearest with ties away from zero.  All-zero blocks
store zero mantissas with scale 0 (SBFP) or exponent
:data:`~blockquant.kernels.ZERO_EXPONENT` (BFP).
"""
from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from . import kernels
from .kernels import ZERO_EXPONENT

__all__ = [
    "BlockFormatSpec",
    "Format",
    "QuantizedBlock",
    "QuantizedTensor",
    "ZERO_EXPONENT",
    "alpha_for",
    "bfp_quantize",
    "dequantize",
    "dot_error",
    "quantize",
    "quantize_tensor",
    "quantized_dot",
    "sbfp_quantize",
]

_INT64_BITS = 63


class Format(str, Enum):
    SBFP = "sbfp"
    BFP = "bfp"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown block format {value!r}; expected 'sbfp' or 'bfp'") from None


def alpha_for(precision):
    """Largest mantissa magnitude for a ``precision``-bit signed mantissa."""
    p = int(precision)
    if p != precision or p < 2:
        raise ValueError(f"precision must be an integer >= 2, got {precision!r}")
    return (1 << (p - 1)) - 1


@dataclass(frozen=True)
class BlockFormatSpec:
    kind: Format
    block_size: int
    precision: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Format.parse(self.kind))
        if int(self.block_size) != self.block_size or self.block_size < 1:
            raise ValueError(f"block_size must be a positive integer, got {self.block_size!r}")
        alpha_for(self.precision)

    @property
    def alpha(self):
        return alpha_for(self.precision)


@dataclass(frozen=True, eq=False)
class QuantizedBlock:
    """One stored block.

    ``scale`` is the real multiplier ``S`` for both formats; for BFP it equals
    ``2.0**exponent`` and ``exponent`` is set, for SBFP ``exponent`` is None.
    """

    spec: BlockFormatSpec
    mantissas: np.ndarray
    scale: float
    exponent: int | None = None

    @property
    def is_zero(self):
        return not np.any(self.mantissas)


def _check_values(values):
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"expected a non-empty 1-D block, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise ValueError(f"block contains a non-finite value at index {bad}: {x[bad]!r}")
    return x


def _quantize_one(values, precision, kind):
    x = _check_values(values)
    alpha = alpha_for(precision)
    spec = BlockFormatSpec(kind, x.size, precision)
    mant, scale, expo = kernels.quantize_blocks(x[None, :], alpha, kind is Format.BFP, backend="numpy")
    if kind is Format.BFP:
        return QuantizedBlock(spec, mant[0], float(scale[0]), int(expo[0]))
    return QuantizedBlock(spec, mant[0], float(scale[0]))


def sbfp_quantize(values, precision):
    """Quantize a block with a full-precision scale ``Y / alpha``."""
    return _quantize_one(values, precision, Format.SBFP)


def bfp_quantize(values, precision):
    """Quantize a block with a power-of-two scale ``2**ceil(log2(Y / alpha))``."""
    return _quantize_one(values, precision, Format.BFP)


def quantize(values, spec):
    """Quantize with the kind and precision of ``spec`` (block size taken from ``values``)."""
    return _quantize_one(values, spec.precision, spec.kind)


def dequantize(q):
    return q.scale * q.mantissas.astype(np.float64)


def _integer_dot(ma, mb, precision_a, precision_b):
    n = ma.size
    # |M| < 2**(p-1), so each product fits in pa + pb - 2 bits.
    bits = precision_a + precision_b - 2 + max(1, math.ceil(math.log2(n))) + 1
    if bits <= _INT64_BITS:
        acc = int(np.dot(ma.astype(np.int64), mb.astype(np.int64)))
    else:
        acc = sum(int(a) * int(b) for a, b in zip(ma.tolist(), mb.tolist()))
    return acc


def quantized_dot(qa, qb):
    """``S_a * S_b * sum(M_a * M_b)`` with an exact integer accumulation."""
    if qa.mantissas.size != qb.mantissas.size:
        raise ValueError(
            f"block length mismatch: {qa.mantissas.size} vs {qb.mantissas.size}"
        )
    acc = _integer_dot(qa.mantissas, qb.mantissas, qa.spec.precision, qb.spec.precision)
    return (qa.scale * qb.scale) * float(acc)


def dot_error(xa, xb, spec_a, spec_b=None):
    """Exact inner product minus the quantized inner product.

    ``spec_b`` defaults to ``spec_a``; the two may differ in precision.
    """
    spec_b = spec_a if spec_b is None else spec_b
    a = _check_values(xa)
    b = _check_values(xb)
    if a.size != b.size:
        raise ValueError(f"vector length mismatch: {a.size} vs {b.size}")
    exact = math.fsum(a * b)
    return exact - quantized_dot(quantize(a, spec_a), quantize(b, spec_b))


_AXES = {"rows": 0, "cols": 1, 0: 0, 1: 1}


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    """A 2-D tensor quantized in blocks along one axis.

    ``axis="cols"`` cuts every row into consecutive blocks of ``block_size``
    columns; ``axis="rows"`` cuts every column into blocks of rows.  The last
    block along the axis may be shorter and carries its own scale.

    ``mantissas`` has the tensor's shape.  ``scales`` (and ``exponents`` for
    BFP) have shape ``(lines, blocks_per_line)`` where a line is a row for
    ``axis="cols"`` and a column for ``axis="rows"``.
    """

    shape: tuple
    axis: str
    spec: BlockFormatSpec
    mantissas: np.ndarray
    scales: np.ndarray
    exponents: np.ndarray | None

    @property
    def blocks_per_line(self):
        return self.scales.shape[1]

    @property
    def axis_length(self):
        return self.shape[1] if self.axis == "cols" else self.shape[0]

    @property
    def block_lengths(self):
        full, tail = divmod(self.axis_length, self.spec.block_size)
        n = self.spec.block_size
        return [n] * full + ([tail] if tail else [])

    def block(self, line, index):
        """The :class:`QuantizedBlock` at ``(line, index)``."""
        lengths = self.block_lengths
        start = index * self.spec.block_size
        stop = start + lengths[index]
        if self.axis == "cols":
            mant = self.mantissas[line, start:stop]
        else:
            mant = self.mantissas[start:stop, line]
        spec = BlockFormatSpec(self.spec.kind, lengths[index], self.spec.precision)
        expo = None if self.exponents is None else int(self.exponents[line, index])
        return QuantizedBlock(spec, mant.copy(), float(self.scales[line, index]), expo)

    def blocks(self):
        for line in range(self.scales.shape[0]):
            for index in range(self.blocks_per_line):
                yield self.block(line, index)

    def dequantize(self):
        along = np.repeat(self.scales, self.spec.block_size, axis=1)[:, : self.axis_length]
        scale = along if self.axis == "cols" else along.T
        return scale * self.mantissas.astype(np.float64)


def _split_lines(x, n, alpha, bfp, backend=None):
    """Quantize every row of ``x`` in blocks of ``n`` along axis 1."""
    lines, length = x.shape
    full, tail = divmod(length, n)
    nb = full + (1 if tail else 0)
    mant = np.empty((lines, length), dtype=np.int64)
    scales = np.empty((lines, nb))
    expos = np.empty((lines, nb), dtype=np.int64)
    if full:
        body = np.ascontiguousarray(x[:, : full * n]).reshape(lines * full, n)
        m, s, e = kernels.quantize_blocks(body, alpha, bfp, backend=backend)
        mant[:, : full * n] = m.reshape(lines, full * n)
        scales[:, :full] = s.reshape(lines, full)
        expos[:, :full] = e.reshape(lines, full)
    if tail:
        m, s, e = kernels.quantize_blocks(x[:, full * n:], alpha, bfp, backend=backend)
        mant[:, full * n:] = m
        scales[:, full] = s
        expos[:, full] = e
    return mant, scales, expos


def quantize_tensor(matrix, axis, spec, backend=None):
    """Quantize a 2-D array in blocks of ``spec.block_size`` along ``axis``."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise ValueError(f"expected a non-empty 2-D tensor, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("tensor contains non-finite values")
    if axis not in _AXES:
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    axis_name = "rows" if _AXES[axis] == 0 else "cols"
    lines = x if axis_name == "cols" else x.T
    bfp = spec.kind is Format.BFP
    mant, scales, expos = _split_lines(lines, spec.block_size, spec.alpha, bfp, backend)
    if axis_name == "rows":
        mant = np.ascontiguousarray(mant.T)
    return QuantizedTensor(
        shape=x.shape,
        axis=axis_name,
        spec=spec,
        mantissas=mant,
        scales=scales,
        exponents=expos if bfp else None,
    )
