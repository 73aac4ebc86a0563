"""
The FTRW weight file
====================

Configs are JSON, weights live in one binary container with a record table.
The command-line tool drives the same functions.
"""

import tempfile
from pathlib import Path

from circformer import bundle
from circformer.cli import main
from circformer.container import WeightContainer
from circformer.nn import TransformerConfig

tmp = Path(tempfile.mkdtemp())

main(["gen-toy", "--preset", "micro", "--seed", "7", "--out", str(tmp)])
main(["compress", str(tmp / "weights.ftrw"), "--config", str(tmp / "config.json"),
      "-b", "8", "--layers", "encoder.*", "--quantize", "-o", str(tmp / "small.ftrw")])

c = WeightContainer.read(tmp / "small.ftrw")
cfg = bundle.load_config(tmp / "config.json")
for name, entry in list(bundle.manifest(c, cfg).items())[:8]:
    print(f"{name:<28} {entry.kind:<10} ratio {entry.ratio:.1f}")

print("file sizes:", (tmp / "weights.ftrw").stat().st_size, "->", (tmp / "small.ftrw").stat().st_size, "bytes")

# the embedding is served from a memory map rather than read into RAM
model = bundle.load_model(tmp / "config.json", tmp / "small.ftrw")
print("embedding backed by", type(model.embedding).__name__)

# reading and rewriting a container is byte-identical
c.write(tmp / "copy.ftrw")
print("byte-identical rewrite:", (tmp / "copy.ftrw").read_bytes() == (tmp / "small.ftrw").read_bytes())

(tmp / "in.txt").write_text("1 2 3 4")
main(["infer", "--config", str(tmp / "config.json"), "--weights", str(tmp / "small.ftrw"),
      "--input", str(tmp / "in.txt"), "--precision", "q16", "-o", str(tmp / "out.ftrw")])

bundle.save_config(TransformerConfig.preset("shallow"), tmp / "shallow.json")
(tmp / "device.json").write_text('{"device": {"ff": 2000000, "lut": 1000000, "dsp": 6000, "bram": 2000, "clock_mhz": 200}}')
main(["schedule", "--config", str(tmp / "shallow.json"), "--device", str(tmp / "device.json"),
      "--seq-len", "16", "-o", str(tmp / "report.json"), "--gantt", str(tmp / "gantt.txt")])
print((tmp / "gantt.txt").read_text().splitlines()[-1])
