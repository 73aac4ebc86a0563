import json
import subprocess
import sys
import time

import numpy as np
import pytest

from circformer import bcm, bundle
from circformer.cli import main
from circformer.container import WeightContainer
from circformer.nn import TransformerConfig

GENEROUS = {"device": {"ff": 10 ** 9, "lut": 10 ** 9, "dsp": 10 ** 6, "bram": 10 ** 6, "clock_mhz": 200}}


@pytest.fixture
def toy(tmp_path):
    assert main(["gen-toy", "--preset", "micro", "--seed", "3", "--out", str(tmp_path / "toy")]) == 0
    return tmp_path / "toy"


def write(path, text):
    path.write_text(text)
    return str(path)


def test_gen_toy_deterministic(tmp_path, toy):
    main(["gen-toy", "--preset", "micro", "--seed", "3", "--out", str(tmp_path / "again")])
    for f in ("config.json", "weights.ftrw"):
        assert (toy / f).read_bytes() == (tmp_path / "again" / f).read_bytes()
    main(["gen-toy", "--preset", "micro", "--seed", "4", "--out", str(tmp_path / "other")])
    assert (toy / "weights.ftrw").read_bytes() != (tmp_path / "other" / "weights.ftrw").read_bytes()


def test_shallow_preset_config(tmp_path):
    assert main(["gen-toy", "--preset", "shallow", "--out", str(tmp_path)]) == 0
    cfg = bundle.load_config(tmp_path / "config.json")
    assert (cfg.num_layers, cfg.d_model, cfg.num_heads) == (2, 200, 4)


def test_compress_ratio_16(toy, capsys):
    out = toy / "c.ftrw"
    rc = main(["compress", str(toy / "weights.ftrw"), "--config", str(toy / "config.json"), "-b", "16", "-o", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "total ratio 16.0000" in text
    c = WeightContainer.read(out)
    cfg = bundle.load_config(toy / "config.json")
    kinds = {n: c.kind(n) for n in bundle.linear_names(cfg)}
    assert set(kinds.values()) == {"bcm"}
    assert c.kind("embedding") == "dense"
    assert {e.ratio for e in bundle.manifest(c, cfg).values()} == {16.0}


def test_compress_b1_keeps_logical_weights(toy, capsys):
    out = toy / "b1.ftrw"
    assert main(["compress", str(toy / "weights.ftrw"), "--config", str(toy / "config.json"), "-b", "1", "-o", str(out)]) == 0
    assert "total ratio 1.0000" in capsys.readouterr().out
    before, after = WeightContainer.read(toy / "weights.ftrw"), WeightContainer.read(out)
    for name in bundle.linear_names(bundle.load_config(toy / "config.json")):
        np.testing.assert_array_equal(bcm.expand(after.get(name)), before.get(name))


def test_compress_idempotent(toy):
    once, twice = toy / "once.ftrw", toy / "twice.ftrw"
    args = ["--config", str(toy / "config.json"), "-b", "4", "--mode", "diagonal_mean"]
    assert main(["compress", str(toy / "weights.ftrw"), *args, "-o", str(once)]) == 0
    assert main(["compress", str(once), *args, "-o", str(twice)]) == 0
    a, b = WeightContainer.read(once), WeightContainer.read(twice)
    for name in a.names():
        assert a.payload(name) == b.payload(name)


def test_compress_selectors(toy, capsys):
    w, cfg = str(toy / "weights.ftrw"), str(toy / "config.json")
    assert main(["compress", w, "--config", cfg, "-b", "4", "--layers", "*ffn*", "--quantize", "-o", str(toy / "q")]) == 0
    c = WeightContainer.read(toy / "q")
    assert c.kind("encoder.0.ffn1") == "quant-bcm"
    assert c.kind("encoder.0.self_attn.q") == "dense"
    assert main(["compress", w, "--config", cfg, "-b", "4", "--layers", "nope*"]) == 2
    assert "valid layers" in capsys.readouterr().err
    assert main(["compress", w, "--config", cfg, "-b", "0"]) == 2


def infer(toy, weights, tokens="1 2 3 4 5", *extra):
    inp = write(toy / "in.txt", tokens)
    out = toy / "out.ftrw"
    rc = main(["infer", "--config", str(toy / "config.json"), "--weights", str(weights), "--input", inp, "-o", str(out), *extra])
    return rc, (WeightContainer.read(out).get("output") if rc == 0 else None)


def test_infer_empty_input_is_usage_error(toy):
    assert infer(toy, toy / "weights.ftrw", "  \n")[0] == 2


def test_infer_validation_errors(toy):
    assert infer(toy, toy / "weights.ftrw", "1 64")[0] == 4
    assert infer(toy, toy / "missing.ftrw")[0] == 3
    assert infer(toy, toy / "weights.ftrw", "1 x")[0] == 2


def test_infer_dense_vs_bcm(tmp_path):
    main(["gen-toy", "--preset", "micro", "--seed", "5", "--circulant-block", "4", "--out", str(tmp_path)])
    comp = tmp_path / "bcm.ftrw"
    main(["compress", str(tmp_path / "weights.ftrw"), "--config", str(tmp_path / "config.json"), "-b", "4", "-o", str(comp)])
    rc1, dense = infer(tmp_path, tmp_path / "weights.ftrw")
    rc2, circ = infer(tmp_path, comp)
    assert rc1 == rc2 == 0
    assert np.abs(dense - circ).max() <= 1e-6


def test_infer_q16_and_pwl(toy, capsys):
    _, ref = infer(toy, toy / "weights.ftrw")
    rc, q16 = infer(toy, toy / "weights.ftrw", "1 2 3 4 5", "--precision", "q16")
    assert rc == 0 and np.all(np.isfinite(q16))
    print(f"q16 max deviation {np.abs(q16 - ref).max():.3e}")
    rc, logits = infer(toy, toy / "weights.ftrw", "1 2 3 4 5", "--softmax", "pwl", "--logits")
    assert rc == 0 and logits.shape == (5, 64)
    assert "forward" in capsys.readouterr().err


def test_micro_forward_under_one_second(toy):
    model = bundle.load_model(toy / "config.json", toy / "weights.ftrw")
    t0 = time.perf_counter()
    model.forward(list(range(32)))
    assert time.perf_counter() - t0 < 1.0


def test_schedule_shallow(tmp_path, capsys):
    cfg_path = tmp_path / "shallow.json"
    bundle.save_config(TransformerConfig.preset("shallow"), cfg_path)
    dev = write(tmp_path / "dev.json", json.dumps(GENEROUS))
    rep_path, chart_path = tmp_path / "rep.json", tmp_path / "gantt.txt"
    args = ["schedule", "--config", str(cfg_path), "--device", dev, "--seq-len", "16", "--seed", "9",
            "-o", str(rep_path), "--gantt", str(chart_path)]
    assert main(args) == 0
    rep = json.loads(rep_path.read_text())
    assert rep["extra"]["encoder_pipeline_stages"] == 7
    assert "encoder pipeline stages: 7" in chart_path.read_text()
    assert rep["seed"] == 9
    # throughput recomputed from the report's own fields
    assert rep["throughput"] == 200e6 / (rep["n_layers"] * max(l["time_cycles"] for l in rep["layers"]))
    first = rep_path.read_bytes()
    assert main(args) == 0
    assert rep_path.read_bytes() == first


def test_schedule_zero_dsp(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    bundle.save_config(TransformerConfig.preset("micro"), cfg_path)
    dev = write(tmp_path / "dev.json", json.dumps({"device": {**GENEROUS["device"], "dsp": 0}}))
    assert main(["schedule", "--config", str(cfg_path), "--device", dev]) == 5
    assert "dsp" in capsys.readouterr().err


def test_verify_command(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5


def test_entry_point_usage_error():
    r = subprocess.run([sys.executable, "-m", "circformer.cli", "infer"], capture_output=True, text=True)
    assert r.returncode == 2
