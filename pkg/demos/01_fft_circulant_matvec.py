"""
Circulant products through the FFT
==================================

A circulant matrix is fixed by one column. Multiplying it by a vector is a
circular convolution, which the FFT turns into an elementwise product.
"""

import numpy as np

from circformer import bcm, fft

rng = np.random.default_rng(0)

# a length-8 transform next to the textbook DFT sum
x = rng.normal(size=8)
k = np.arange(8)
dft = np.exp(-2j * np.pi * np.outer(k, k) / 8) @ x
print("fft vs DFT:", np.abs(fft.fft(x) - dft).max())
print("round trip:", np.abs(fft.ifft(fft.fft(x)).real - x).max())

# transforms run along the last axis, so a batch is one call
batch = rng.normal(size=(1000, 64))
print("batched spectrum shape:", fft.fft(batch).shape)

# one circulant block: column p, entry (r, c) = p[(r - c) mod b]
p = np.array([1.0, 2.0, 0.0, -1.0])
C = bcm.circulant_block(p)
print(C)

v = rng.normal(size=4)
via_fft = fft.ifft(fft.fft(p) * fft.fft(v)).real
print("dense:", C @ v)
print("fft:  ", via_fft)

# a full block-circulant matrix stores one vector per block and caches its spectrum
M = bcm.random_bcm(64, 48, 8, rng)
x = rng.normal(size=48)
print("blocks:", M.f, "x", M.g, "stored scalars:", M.stored_size, "dense:", 64 * 48)
print("matvec vs dense:", np.abs(bcm.matvec(M, x) - bcm.expand(M) @ x).max())

# block sizes that are not powers of two fall back to a padded linear convolution
M6 = bcm.random_bcm(12, 18, 6, rng)
x6 = rng.normal(size=18)
print("b=6 matvec vs dense:", np.abs(bcm.matvec(M6, x6) - bcm.expand(M6) @ x6).max())
