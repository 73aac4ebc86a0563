"""16-bit signed fixed-point emulation.

Values are stored as int16 ``raw`` with a per-tensor fraction-bit count;
the real value is ``raw * 2**-frac_bits``. Inference dequantizes back to
floats, so this module models representational precision only.
"""

from dataclasses import dataclass

import numpy as np

from .bcm import BlockCirculantMatrix, CompressionMode
from .errors import DomainError

__all__ = [
    "FixedPointFormat",
    "QuantizedTensor",
    "QuantizedBcm",
    "quantize",
    "dequantize",
    "choose_format",
    "fake_quant",
    "quantize_bcm",
]

TOTAL_BITS = 16
RAW_MIN = -(1 << (TOTAL_BITS - 1))
RAW_MAX = (1 << (TOTAL_BITS - 1)) - 1


@dataclass(frozen=True)
class FixedPointFormat:
    frac_bits: int
    total_bits: int = TOTAL_BITS
    signed: bool = True

    def __post_init__(self):
        if self.total_bits != TOTAL_BITS or not self.signed:
            raise DomainError("only signed 16-bit formats are supported")
        if not 0 <= self.frac_bits <= TOTAL_BITS - 1:
            raise DomainError(f"frac_bits must lie in [0, 15], got {self.frac_bits}")

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return RAW_MIN * self.step

    @property
    def max_value(self) -> float:
        return RAW_MAX * self.step

    def __str__(self):
        return f"Q{TOTAL_BITS - 1 - self.frac_bits}.{self.frac_bits}"


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    raw: np.ndarray
    format: FixedPointFormat

    @property
    def shape(self):
        return self.raw.shape

    @property
    def frac_bits(self) -> int:
        return self.format.frac_bits


def _round_half_away(v):
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def quantize(x, fmt: FixedPointFormat) -> QuantizedTensor:
    """Saturating round-half-away-from-zero quantization."""
    x = np.asarray(x, dtype=np.float64)
    clamped = np.clip(x, fmt.min_value, fmt.max_value)
    raw = _round_half_away(np.ldexp(clamped, fmt.frac_bits))
    raw = np.clip(raw, RAW_MIN, RAW_MAX).astype(np.int16)
    return QuantizedTensor(raw, fmt)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    return np.ldexp(q.raw.astype(np.float64), -q.format.frac_bits)


def choose_format(x) -> FixedPointFormat:
    """Largest ``frac_bits`` whose range holds every element of ``x``.

    Falls back to ``frac_bits=0`` (which then saturates) when even Q15.0
    cannot hold the data.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DomainError("cannot choose a format for an empty tensor")
    lo, hi = float(x.min()), float(x.max())
    for frac in range(TOTAL_BITS - 1, -1, -1):
        fmt = FixedPointFormat(frac)
        if fmt.min_value <= lo and hi <= fmt.max_value:
            return fmt
    return FixedPointFormat(0)


def fake_quant(x, fmt: FixedPointFormat = None) -> np.ndarray:
    """Quantize-dequantize round trip, choosing a format when none is given."""
    x = np.asarray(x)
    if x.size == 0:
        return x
    fmt = fmt or choose_format(x)
    return dequantize(quantize(x, fmt)).astype(x.dtype if x.dtype.kind == "f" else np.float64)


@dataclass(frozen=True, eq=False)
class QuantizedBcm:
    """Block-circulant matrix whose index vectors are held in fixed point."""

    m: int
    n: int
    b: int
    mode: CompressionMode
    index: QuantizedTensor

    @property
    def shape(self):
        return (self.m, self.n)

    def dequantize(self) -> BlockCirculantMatrix:
        return BlockCirculantMatrix(self.m, self.n, self.b, dequantize(self.index), self.mode)


def quantize_bcm(M: BlockCirculantMatrix, fmt: FixedPointFormat = None) -> QuantizedBcm:
    fmt = fmt or choose_format(M.index)
    return QuantizedBcm(M.m, M.n, M.b, M.mode, quantize(M.index, fmt))
