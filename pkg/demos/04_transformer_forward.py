"""
Forward passes over dense, block-circulant and fixed-point weights
==================================================================
"""

import time

import numpy as np

from circformer import bcm
from circformer.nn import LinearWeight, SoftmaxImpl, TransformerConfig, random_model

cfg = TransformerConfig.preset("micro")
print(cfg)

# every linear layer block-circulant with b = 4
model = random_model(cfg, 0, block_size=4)
dense = model.densified()
tokens = [5, 17, 3, 42, 8, 8, 1]

t0 = time.perf_counter()
h_bcm = model.forward(tokens)
print(f"bcm forward {1e3 * (time.perf_counter() - t0):.1f} ms, output {h_bcm.shape}")
print("bcm vs dense:", np.abs(h_bcm - dense.forward(tokens)).max())

# precision and softmax variants
for precision in ("f32", "q16"):
    print(f"{precision} vs f64:", np.abs(model.forward(tokens, precision=precision) - h_bcm).max())
print("pwl softmax vs exact:", np.abs(model.forward(tokens, impl=SoftmaxImpl.pwl(32)) - h_bcm).max())

# compress a dense model layer by layer and compare
plain = random_model(cfg, 1)
compressed = plain.map_linears(lambda name, w: LinearWeight(bcm.compress(w.dense(), 4), w.bias))
drift = np.abs(compressed.forward(tokens) - plain.forward(tokens)).max()
print("dense model after lossy compression, max drift:", round(float(drift), 3))

logits = model.forward(tokens, logits=True)
print("next-token guesses:", logits.argmax(axis=1))
