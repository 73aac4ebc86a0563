"""
Compressing a dense weight matrix
=================================

Each b x b block is replaced by the circulant matrix closest to it. Three
ways of picking the index vector are available.
"""

import numpy as np

from circformer.bcm import CompressionMode, compress, compression_ratio, expand

rng = np.random.default_rng(1)
W = rng.normal(size=(64, 64))

for mode in CompressionMode:
    M = compress(W, 16, mode)
    err = np.linalg.norm(W - expand(M)) / np.linalg.norm(W)
    print(f"{mode.name:<14} relative Frobenius error {err:.3f}  ratio {compression_ratio(M):.1f}")

# the diagonal mean is the least-squares circulant fit: nudging it only hurts
M = compress(W, 16)
base = np.linalg.norm(W - expand(M))
worse = 0
for _ in range(100):
    idx = M.index + rng.normal(scale=0.01, size=M.index.shape)
    worse += np.linalg.norm(W - expand(type(M)(64, 64, 16, idx))) >= base
print(f"perturbed fits no better: {worse}/100")

# a matrix that already is block-circulant comes back exactly
exact = expand(compress(W, 8))
again = compress(exact, 8)
print("re-compression error:", np.abs(expand(again) - exact).max())

# the row mean collapses every circulant block to a constant
flat = compress(exact, 8, "row_mean")
print("row-mean index of block (0, 0):", np.round(flat.index[0, 0], 3))

# sizes that do not divide b are zero padded
odd = compress(rng.normal(size=(10, 13)), 4)
print("padded rows/cols:", odd.pad_rows, odd.pad_cols, "ratio", round(compression_ratio(odd), 3))
