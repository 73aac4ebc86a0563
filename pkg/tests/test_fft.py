import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circformer.errors import DomainError, LengthError
from circformer.fft import fft, ifft, next_pow2

from oracles import dft, idft


def test_impulse_and_constant():
    np.testing.assert_allclose(fft([1, 0, 0, 0]), [1, 1, 1, 1], atol=1e-15)
    np.testing.assert_allclose(fft([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(ifft([4, 0, 0, 0]), [1, 1, 1, 1], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16, 32])
def test_matches_naive_dft(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.abs(fft(x) - dft(x)).max() <= 1e-9
    assert np.abs(ifft(x) - idft(x)).max() <= 1e-9


def test_random_length8_against_oracles():
    rng = np.random.default_rng(8)
    x = rng.normal(size=8)
    assert np.abs(fft(x) - dft(x)).max() <= 1e-9
    assert np.abs(ifft(x) - idft(x)).max() <= 1e-9


def test_roundtrip_n16():
    x = np.random.default_rng(16).normal(size=16)
    assert np.abs(ifft(fft(x)) - x).max() <= 1e-9


@pytest.mark.parametrize("n", [3, 6, 12, 100])
def test_rejects_non_power_of_two(n):
    with pytest.raises(LengthError):
        fft(np.zeros(n))
    with pytest.raises(LengthError):
        ifft(np.zeros(n))


def test_batched_last_axis():
    x = np.random.default_rng(0).normal(size=(3, 5, 8))
    got = fft(x)
    for idx in np.ndindex(3, 5):
        np.testing.assert_allclose(got[idx], dft(x[idx]), atol=1e-9)


def test_single_precision_path():
    x = np.random.default_rng(1).normal(size=64).astype(np.float32)
    X = fft(x)
    assert X.dtype == np.complex64
    assert np.abs(X - dft(x)).max() <= 1e-4
    assert np.abs(ifft(X) - x).max() <= 1e-4


@pytest.mark.parametrize("n,want", [(1, 1), (2, 2), (3, 4), (8, 8), (9, 16), (200, 256)])
def test_next_pow2(n, want):
    assert next_pow2(n) == want


def test_next_pow2_rejects_zero():
    with pytest.raises(DomainError):
        next_pow2(0)


pow2 = st.sampled_from([2 ** k for k in range(11)])


@settings(max_examples=40, deadline=None)
@given(pow2, st.integers(0, 2 ** 32 - 1))
def test_roundtrip_property(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.abs(ifft(fft(x)) - x).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(pow2, st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(n, seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, n))
    assert np.abs(fft(a * x + b * y) - (a * fft(x) + b * fft(y))).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(pow2, st.integers(0, 2 ** 32 - 1))
def test_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    assert abs(np.sum(np.abs(x) ** 2) - np.sum(np.abs(fft(x)) ** 2) / n) <= 1e-9
