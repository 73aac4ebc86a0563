"""Command-line driver.

Exit codes:

===  =======================================================
0    success
2    usage error (bad flags, empty input, unknown selector)
3    I/O error (missing or unreadable file)
4    validation error (shapes, token ids, malformed container)
5    feasibility error (device budget too small)
===  =======================================================
"""

import argparse
import fnmatch
import json
import logging
import sys
import time

import numpy as np

from . import bcm, bundle, verify
from .container import WeightContainer, atomic_write
from .errors import CircformerError, FeasibilityError
from .nn import SoftmaxImpl, TransformerConfig, random_model
from .quant import quantize_bcm
from .sched import DeviceConfig, allocate, build_encoder_graph, build_model_graph, gantt, report, schedule
from .sched.scheduler import stage_durations

log = logging.getLogger("circformer")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_FEASIBILITY = 0, 2, 3, 4, 5


class UsageError(CircformerError):
    pass


def _cmd_gen_toy(args):
    cfg = TransformerConfig.preset(args.preset)
    rng = np.random.default_rng(args.seed)
    model = random_model(cfg, rng)
    if args.circulant_block:
        # dense weights that are exactly block-circulant
        circ = random_model(cfg, np.random.default_rng(args.seed), block_size=args.circulant_block)
        model = circ.densified()
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    bundle.save_model(model, out / "config.json", out / "weights.ftrw")
    print(f"wrote {out / 'config.json'} and {out / 'weights.ftrw'} (preset={args.preset}, seed={args.seed})")


def _select(names, patterns):
    if not patterns:
        return list(names)
    chosen = []
    for pat in patterns:
        hits = [n for n in names if fnmatch.fnmatchcase(n, pat)]
        if not hits:
            raise UsageError(f"layer selector {pat!r} matches nothing; valid layers: {', '.join(names)}")
        chosen += [h for h in hits if h not in chosen]
    return [n for n in names if n in chosen]


def _cmd_compress(args):
    if args.block_size < 1:
        raise UsageError("--block-size must be >= 1")
    cfg = bundle.load_config(args.config)
    c = WeightContainer.read(args.weights)
    linear = bundle.linear_names(cfg, "output_proj" in c)
    selected = _select(linear, args.layers)
    dense_total = stored_total = 0
    for name in selected:
        w = c.get(name)
        if isinstance(w, np.ndarray):
            dense = w
        elif hasattr(w, "dequantize"):
            dense = bcm.expand(w.dequantize())
        elif isinstance(w, bcm.BlockCirculantMatrix):
            dense = bcm.expand(w)
        else:
            raise UsageError(f"{name} is stored as quantized dense and cannot be recompressed")
        M = bcm.compress(dense, args.block_size, args.mode)
        c.put(name, quantize_bcm(M) if args.quantize else M)
        ratio = bcm.compression_ratio(M)
        dense_total += M.m * M.n
        stored_total += M.stored_size
        print(f"{name:<32} {M.m:>5}x{M.n:<5} b={M.b:<3} ratio {ratio:.4f}")
    out = args.output or args.weights
    c.write(out)
    total = dense_total / stored_total if stored_total else 1.0
    print(f"compressed {len(selected)} layers, total ratio {total:.4f} -> {out}")
    return total


def _read_tokens(path):
    with open(path) as fh:
        text = fh.read()
    try:
        ids = [int(t) for t in text.split()]
    except ValueError as exc:
        raise UsageError(f"{path}: token file must hold whitespace-separated integers ({exc})") from None
    if not ids:
        raise UsageError(f"{path}: input sequence is empty (need at least one token)")
    return ids


def _cmd_infer(args):
    timings = {}
    t0 = time.perf_counter()
    model = bundle.load_model(args.config, args.weights, positional=not args.no_positional)
    tokens = _read_tokens(args.input)
    target = _read_tokens(args.target) if args.target else None
    timings["load"] = time.perf_counter() - t0
    impl = SoftmaxImpl.pwl(args.pwl_segments) if args.softmax == "pwl" else SoftmaxImpl()
    t0 = time.perf_counter()
    out = model.forward(tokens, target, impl=impl, precision=args.precision, logits=args.logits)
    timings["forward"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    c = WeightContainer()
    c.put("output", np.asarray(out, dtype=np.float64))
    c.write(args.output)
    timings["write"] = time.perf_counter() - t0
    for phase, secs in timings.items():
        print(f"{phase:<8} {secs * 1e3:9.2f} ms", file=sys.stderr)
    print(f"wrote {'logits' if args.logits else 'hidden states'} {out.shape} -> {args.output}")
    return out


def _cmd_schedule(args):
    cfg = bundle.load_config(args.config)
    device = DeviceConfig.load(args.device)
    graph = build_model_graph(cfg, args.seq_len, args.block_size, device.pe_profiles)
    plan = device.plan(graph, cfg.num_layers)
    plan = allocate(plan)
    graph.nodes[:] = plan.layers
    pool = device.pool(graph)
    sched = schedule(graph, pool, stage_durations(graph, args.granularity))
    rep = report(plan, sched, args.batch, seed=args.seed)
    enc = build_encoder_graph(cfg, args.seq_len, args.block_size, device.pe_profiles)
    rep.extra = {
        "encoder_pipeline_stages": len(enc.stages),
        "pipeline_stages": len(graph.stages),
        "seq_len": args.seq_len,
        "block_size": args.block_size,
        "granularity": args.granularity,
        "schedule": json.loads(sched.to_json(graph)),
    }
    chart = gantt(sched, graph, pool)
    chart += f"encoder pipeline stages: {len(enc.stages)}\n"
    if args.output:
        atomic_write(args.output, rep.to_json() + "\n")
    else:
        print(rep.to_json())
    if args.gantt:
        atomic_write(args.gantt, chart)
    else:
        print(chart)
    print(
        f"throughput {rep.throughput:.3f}/s, max T {rep.max_time_cycles} cycles, makespan {rep.makespan_stages} stages",
        file=sys.stderr,
    )
    return rep


def _cmd_verify(args):
    ok = verify.run(args.seed)
    if not ok:
        raise CircformerError("one or more verification checks failed")


def build_parser():
    from pathlib import Path

    p = argparse.ArgumentParser(prog="circformer", description="Block-circulant transformer toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-toy", help="write a seeded random model")
    g.add_argument("--preset", choices=["micro", "shallow"], default="micro")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--circulant-block", type=int, default=None, help="make dense weights exactly block-circulant")
    g.add_argument("--out", type=Path, default=Path("."))
    g.set_defaults(func=_cmd_gen_toy)

    c = sub.add_parser("compress", help="replace dense layers by block-circulant records")
    c.add_argument("weights")
    c.add_argument("--config", required=True)
    c.add_argument("-b", "--block-size", type=int, required=True)
    c.add_argument("--mode", default="diagonal_mean", choices=["diagonal_mean", "row_mean", "first_row"])
    c.add_argument("--layers", nargs="+", metavar="GLOB", help="layer name patterns (default: every linear layer)")
    c.add_argument("--quantize", action="store_true", help="store index vectors as 16-bit fixed point")
    c.add_argument("-o", "--output", help="output weight file (default: overwrite input)")
    c.set_defaults(func=_cmd_compress)

    i = sub.add_parser("infer", help="run one forward pass")
    i.add_argument("--config", required=True)
    i.add_argument("--weights", required=True)
    i.add_argument("--input", required=True, help="file of whitespace-separated token ids")
    i.add_argument("--target", help="decoder token ids (default: same as --input)")
    i.add_argument("--softmax", choices=["exact", "pwl"], default="exact")
    i.add_argument("--pwl-segments", type=int, default=32)
    i.add_argument("--precision", choices=["f64", "f32", "q16"], default="f64")
    i.add_argument("--logits", action="store_true")
    i.add_argument("--no-positional", action="store_true")
    i.add_argument("-o", "--output", required=True)
    i.set_defaults(func=_cmd_infer)

    s = sub.add_parser("schedule", help="allocate resources, schedule the dataflow graph, report")
    s.add_argument("--config", required=True)
    s.add_argument("--device", required=True)
    s.add_argument("--seq-len", type=int, default=64)
    s.add_argument("--batch", type=int, default=1)
    s.add_argument("--block-size", type=int, default=None)
    s.add_argument("--granularity", type=int, default=1)
    s.add_argument("--seed", type=int, default=None, help="recorded in the report")
    s.add_argument("-o", "--output", help="report JSON path (default: stdout)")
    s.add_argument("--gantt", help="Gantt text path (default: stdout)")
    s.set_defaults(func=_cmd_schedule)

    v = sub.add_parser("verify", help="run the built-in oracle checks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CircformerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
