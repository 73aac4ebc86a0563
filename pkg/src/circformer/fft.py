"""Iterative radix-2 Cooley-Tukey FFT.

Transforms act on the last axis, so a stack of vectors shaped ``(..., n)``
is transformed in one call. Double precision is the default; passing
``dtype=np.complex64`` runs the single-precision path.
"""

from functools import lru_cache

import numpy as np

from .errors import DomainError, LengthError

__all__ = ["fft", "ifft", "next_pow2", "is_pow2"]


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two that is >= ``n``."""
    n = int(n)
    if n < 1:
        raise DomainError(f"next_pow2 needs n >= 1, got {n}")
    return 1 << (n - 1).bit_length()


@lru_cache(maxsize=64)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx = idx >> 1
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=256)
def _twiddles(half: int, dtype) -> np.ndarray:
    k = np.arange(half)
    w = np.exp(-2j * np.pi * k / (2 * half)).astype(dtype)
    w.setflags(write=False)
    return w


def _transform(x, dtype) -> np.ndarray:
    a = np.asarray(x)
    dtype = np.dtype(dtype) if dtype is not None else (
        np.dtype(np.complex64) if a.dtype in (np.float32, np.complex64) else np.dtype(np.complex128)
    )
    if a.ndim == 0:
        raise LengthError("fft needs at least one axis")
    n = a.shape[-1]
    if not is_pow2(n):
        raise LengthError(f"transform length must be a power of two, got {n}")
    out = a.astype(dtype)[..., _bit_reversal(n)]
    lead = out.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(lead + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(half, dtype)
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(lead + (n,))
        size *= 2
    return out


def fft(x, dtype=None) -> np.ndarray:
    """Forward DFT ``X[k] = sum_j x[j] exp(-2 pi i j k / n)`` along the last axis.

    Raises:
        LengthError: if the last axis length is not a power of two.
    """
    return _transform(x, dtype)


def ifft(X, dtype=None) -> np.ndarray:
    """Inverse DFT with ``1/n`` normalisation, so ``ifft(fft(x)) == x``."""
    a = np.asarray(X)
    n = a.shape[-1] if a.ndim else 0
    out = np.conj(_transform(np.conj(a), dtype))
    return out / n
