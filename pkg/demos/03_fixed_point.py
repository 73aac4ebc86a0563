"""
16-bit fixed point
==================

Weights are stored as int16 with a per-tensor fraction-bit count and
dequantized for arithmetic.
"""

import numpy as np

from circformer import bcm
from circformer.quant import FixedPointFormat, choose_format, dequantize, quantize, quantize_bcm

f = FixedPointFormat(10)
print(f, "range", f.min_value, "to", f.max_value, "step", f.step)
print("0.5 ->", quantize(0.5, f).raw, "   1e6 ->", quantize(1e6, f).raw)

# the format is picked from the tensor's range
for scale in (0.9, 100.0, 3e4):
    print(f"max |x| = {scale:>8}: {choose_format(np.array([scale, -scale]))}")

rng = np.random.default_rng(2)
x = rng.normal(size=100_000)
q = quantize(x, choose_format(x))
err = np.abs(dequantize(q) - x).max()
print(f"format {q.format}, worst error {err:.2e}, half step {q.format.step / 2:.2e}")

# BCM index vectors quantize the same way
M = bcm.random_bcm(64, 64, 8, rng)
Q = quantize_bcm(M)
y = rng.normal(size=64)
print("matvec drift after quantizing:", np.abs(bcm.matvec(Q.dequantize(), y) - bcm.matvec(M, y)).max())
