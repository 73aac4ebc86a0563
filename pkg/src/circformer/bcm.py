"""Block-circulant weight matrices.

A dense ``m x n`` weight is zero-padded to a multiple of the block size
``b`` and cut into an ``f x g`` grid of ``b x b`` blocks. Each block is
replaced by a circulant matrix, stored as its first column ``p`` (the
index vector), so block entry ``(r, c)`` equals ``p[(r - c) % b]`` and
multiplying a block by ``x`` is the circular convolution ``p * x``.
"""

import enum
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import fft as _fft
from .errors import DomainError, ShapeError

__all__ = [
    "CompressionMode",
    "BlockCirculantMatrix",
    "compress",
    "expand",
    "matvec",
    "matmul",
    "compression_ratio",
    "circulant_block",
    "pack_record",
    "unpack_record",
    "RECORD_HEADER",
]


class CompressionMode(enum.IntEnum):
    """How a dense block is projected onto a single index vector."""

    DIAGONAL_MEAN = 0
    ROW_MEAN = 1
    FIRST_ROW = 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "diagonal_mean": cls.DIAGONAL_MEAN,
            "diagonal": cls.DIAGONAL_MEAN,
            "diag": cls.DIAGONAL_MEAN,
            "row_mean": cls.ROW_MEAN,
            "row": cls.ROW_MEAN,
            "first_row": cls.FIRST_ROW,
            "first": cls.FIRST_ROW,
        }
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown compression mode {value!r}") from None


def _spectrum_length(b: int) -> int:
    # Power-of-two b: circular convolution directly at length b.
    # Otherwise: linear convolution at next_pow2(2b - 1), folded back mod b.
    return b if _fft.is_pow2(b) else _fft.next_pow2(2 * b - 1)


@dataclass(frozen=True, eq=False)
class BlockCirculantMatrix:
    """Immutable block-circulant matrix.

    ``index`` has shape ``(f, g, b)``; ``index[i, j]`` generates block
    ``(i, j)``. The FFT of every index vector is computed once at
    construction and reused by :func:`matvec` and :func:`matmul`.
    """

    m: int
    n: int
    b: int
    index: np.ndarray
    mode: CompressionMode = CompressionMode.DIAGONAL_MEAN
    _spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.b < 1:
            raise DomainError(f"block size must be >= 1, got {self.b}")
        if self.m < 1 or self.n < 1:
            raise ShapeError(f"matrix dims must be positive, got {self.m}x{self.n}")
        index = np.array(self.index, dtype=np.float64)
        if index.shape != (self.f, self.g, self.b):
            raise ShapeError(
                f"index grid must have shape {(self.f, self.g, self.b)}, got {index.shape}"
            )
        index.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "mode", CompressionMode.parse(self.mode))
        L = _spectrum_length(self.b)
        padded = np.zeros((self.f, self.g, L))
        padded[..., : self.b] = index
        spec = _fft.fft(padded)
        spec.setflags(write=False)
        object.__setattr__(self, "_spectrum", spec)

    @property
    def f(self) -> int:
        return -(-self.m // self.b)

    @property
    def g(self) -> int:
        return -(-self.n // self.b)

    @property
    def pad_rows(self) -> int:
        return self.f * self.b - self.m

    @property
    def pad_cols(self) -> int:
        return self.g * self.b - self.n

    @property
    def shape(self):
        return (self.m, self.n)

    @property
    def stored_size(self) -> int:
        return self.f * self.g * self.b

    @property
    def spectrum(self) -> np.ndarray:
        return self._spectrum

    def __repr__(self):
        return (
            f"BlockCirculantMatrix(m={self.m}, n={self.n}, b={self.b}, "
            f"grid={self.f}x{self.g}, mode={self.mode.name})"
        )


def circulant_block(p) -> np.ndarray:
    """Dense ``b x b`` circulant matrix with first column ``p``."""
    p = np.asarray(p, dtype=np.float64)
    b = p.shape[0]
    r = np.arange(b)
    return p[(r[:, None] - r[None, :]) % b]


def _blocks(W, b):
    m, n = W.shape
    f, g = -(-m // b), -(-n // b)
    padded = np.zeros((f * b, g * b))
    padded[:m, :n] = W
    # (f, g, b, b): blocks[i, j] is block (i, j)
    return padded.reshape(f, b, g, b).transpose(0, 2, 1, 3)


def compress(W, b: int, mode=CompressionMode.DIAGONAL_MEAN) -> BlockCirculantMatrix:
    """Project a dense matrix onto block-circulant structure.

    ``DIAGONAL_MEAN`` averages each wrapped diagonal of a block, which is
    the Frobenius-nearest circulant. ``ROW_MEAN`` sets ``p[k]`` to the mean
    of block row ``k``. ``FIRST_ROW`` keeps the block's first row and
    re-indexes it into first-column form.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeError(f"compress needs a rank-2 matrix, got rank {W.ndim}")
    b = int(b)
    if b < 1:
        raise DomainError(f"block size must be >= 1, got {b}")
    mode = CompressionMode.parse(mode)
    blocks = _blocks(W, b)
    r = np.arange(b)
    if mode is CompressionMode.DIAGONAL_MEAN:
        # entries with (r - c) % b == k  <=>  c = (r - k) % b
        cols = (r[None, :] - r[:, None]) % b  # [k, r]
        index = blocks[..., r[None, :], cols].mean(axis=-1)
    elif mode is CompressionMode.ROW_MEAN:
        index = blocks.mean(axis=-1)
    else:
        index = blocks[..., 0, (-r) % b]
    return BlockCirculantMatrix(W.shape[0], W.shape[1], b, index, mode)


def expand(M: BlockCirculantMatrix) -> np.ndarray:
    """Reconstruct the dense ``m x n`` matrix, padding stripped."""
    b = M.b
    r = np.arange(b)
    blocks = M.index[..., (r[:, None] - r[None, :]) % b]  # (f, g, b, b)
    dense = blocks.transpose(0, 2, 1, 3).reshape(M.f * b, M.g * b)
    return dense[: M.m, : M.n].copy()


def _apply(M: BlockCirculantMatrix, xb: np.ndarray) -> np.ndarray:
    # xb: (s, g, b) -> (s, f, b)
    b = M.b
    single = xb.dtype == np.float32
    cdtype = np.complex64 if single else np.complex128
    L = _spectrum_length(b)
    if L != b:
        buf = np.zeros(xb.shape[:-1] + (L,), dtype=xb.dtype)
        buf[..., :b] = xb
        xb = buf
    X = _fft.fft(xb, dtype=cdtype)
    P = M.spectrum.astype(cdtype, copy=False)
    # fixed reduction order over j
    Y = np.einsum("ijk,sjk->sik", P, X)
    y = _fft.ifft(Y, dtype=cdtype).real
    if L != b:
        full = y
        y = full[..., :b].copy()
        y[..., : b - 1] += full[..., b : 2 * b - 1]
    return y.astype(np.float32 if single else np.float64, copy=False)


def matmul(M: BlockCirculantMatrix, X) -> np.ndarray:
    """Multiply ``M`` by every column of ``X`` (shape ``n x s``) via FFT."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != M.n:
        raise ShapeError(f"expected an {M.n} x s matrix, got shape {X.shape}")
    if X.dtype != np.float32:
        X = X.astype(np.float64)
    s = X.shape[1]
    if s == 0:
        return np.zeros((M.m, 0), dtype=X.dtype)
    xb = np.zeros((s, M.g * M.b), dtype=X.dtype)
    xb[:, : M.n] = X.T
    y = _apply(M, xb.reshape(s, M.g, M.b))
    return y.reshape(s, M.f * M.b)[:, : M.m].T.copy()


def matvec(M: BlockCirculantMatrix, x) -> np.ndarray:
    """``y_i = sum_j IFFT(FFT(p_ij) * FFT(x_j))``, equal to ``expand(M) @ x``."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != M.n:
        raise ShapeError(f"expected a vector of length {M.n}, got shape {x.shape}")
    return matmul(M, x[:, None])[:, 0]


def compression_ratio(M: BlockCirculantMatrix) -> float:
    """Dense parameter count over stored parameter count."""
    return (M.m * M.n) / M.stored_size


# Record layout: m, n, b (u32), mode (u8), pad_rows, pad_cols (u32), then
# f*g*b little-endian float32 in block order p_11, p_12, ..., p_fg.
RECORD_HEADER = struct.Struct("<IIIBII")


def pack_header(M_or_fields) -> bytes:
    M = M_or_fields
    return RECORD_HEADER.pack(M.m, M.n, M.b, int(M.mode), M.pad_rows, M.pad_cols)


def unpack_header(buf, offset=0):
    m, n, b, mode, pad_rows, pad_cols = RECORD_HEADER.unpack_from(buf, offset)
    if b < 1:
        raise ShapeError(f"record has block size {b}")
    f, g = -(-m // b), -(-n // b)
    if pad_rows != f * b - m or pad_cols != g * b - n:
        raise ShapeError("record padding disagrees with m, n, b")
    return m, n, b, CompressionMode(mode)


def pack_record(M: BlockCirculantMatrix) -> bytes:
    return pack_header(M) + M.index.astype("<f4").tobytes()


def unpack_record(buf) -> BlockCirculantMatrix:
    m, n, b, mode = unpack_header(buf)
    f, g = -(-m // b), -(-n // b)
    count = f * g * b
    expected = RECORD_HEADER.size + 4 * count
    if len(buf) != expected:
        raise ShapeError(f"bcm record is {len(buf)} bytes, expected {expected}")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=RECORD_HEADER.size)
    return BlockCirculantMatrix(m, n, b, data.reshape(f, g, b), mode)


def random_bcm(m, n, b, rng=None, scale=None) -> BlockCirculantMatrix:
    """Random block-circulant matrix with Gaussian index vectors."""
    rng = np.random.default_rng(rng)
    f, g = -(-m // b), -(-n // b)
    if scale is None:
        scale = 1.0 / math.sqrt(n)
    return BlockCirculantMatrix(m, n, b, rng.normal(0.0, scale, size=(f, g, b)))
