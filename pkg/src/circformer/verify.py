"""Self-check suite behind ``circformer verify``.

Each check compares a fast path against a slow, independent oracle on
seeded random inputs and returns ``(passed, detail)``.
"""

import itertools
import time

import numpy as np

from . import bcm, fft, quant
from .sched import ComputeGraph, DevicePlan, LayerProfile, PePool, ResourceVector, allocate, schedule, serial_makespan


def naive_dft(x, inverse=False):
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    sign = 1.0 if inverse else -1.0
    jk = np.outer(np.arange(n), np.arange(n))
    F = np.exp(sign * 2j * np.pi * jk / n)
    out = x @ F.T
    return out / n if inverse else out


def check_fft(rng, trials=20):
    worst = 0.0
    for n in (1, 2, 4, 8, 16, 32, 64):
        x = rng.normal(size=(trials, n)) + 1j * rng.normal(size=(trials, n))
        worst = max(worst, np.abs(fft.fft(x) - naive_dft(x)).max())
        worst = max(worst, np.abs(fft.ifft(fft.fft(x)) - x).max())
    return worst <= 1e-9, f"max error {worst:.2e}"


def dense_by_index(M):
    """Dense matrix built entry by entry from the index vectors."""
    b = M.b
    out = np.zeros((M.f * b, M.g * b))
    for i in range(M.f):
        for j in range(M.g):
            for r in range(b):
                for c in range(b):
                    out[i * b + r, j * b + c] = M.index[i, j, (r - c) % b]
    return out[: M.m, : M.n]


def check_bcm(rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        b = int(rng.choice([2, 4, 8, 16]))
        m, n = int(rng.integers(1, 5)) * b, int(rng.integers(1, 5)) * b
        M = bcm.random_bcm(m, n, b, rng)
        x = rng.normal(size=n)
        worst = max(worst, np.abs(bcm.matvec(M, x) - dense_by_index(M) @ x).max())
    return worst <= 1e-9, f"max error {worst:.2e}"


def check_quant(rng):
    ok = True
    for frac in range(16):
        fmt = quant.FixedPointFormat(frac)
        x = rng.uniform(fmt.min_value, fmt.max_value, size=2000)
        x = np.concatenate([x, [fmt.min_value, fmt.max_value, 0.0]])
        err = np.abs(quant.dequantize(quant.quantize(x, fmt)) - x)
        ok &= bool(err.max() <= 2.0 ** (-frac - 1))
        sat = quant.quantize([1e9, -1e9], fmt).raw
        ok &= sat.tolist() == [32767, -32768]
    return ok, "round-trip and saturation bounds"


def schedule_violations(graph, sched, durations):
    """Independent checker: dependencies, durations, PE classes and PE overlaps."""
    problems = []
    got = {e.layer: e for e in sched.entries}
    if sorted(got) != list(range(len(graph))):
        problems.append("not every layer scheduled exactly once")
        return problems
    for e in sched.entries:
        if e.end_stage - e.start_stage + 1 != durations[e.layer]:
            problems.append(f"layer {e.layer} has wrong duration")
        if e.pe.pe_class != graph.nodes[e.layer].pe_class:
            problems.append(f"layer {e.layer} on wrong PE class")
    for u, v in graph.edges:
        if not got[u].end_stage < got[v].start_stage:
            problems.append(f"edge {u}->{v} violated")
    for a, b in itertools.combinations(sched.entries, 2):
        if a.pe == b.pe and a.start_stage <= b.end_stage and b.start_stage <= a.end_stage:
            problems.append(f"layers {a.layer} and {b.layer} overlap on {a.pe}")
    return problems


def random_dag(rng, max_nodes=12, classes=("PE-A", "PE-B", "Adder")):
    n = int(rng.integers(1, max_nodes + 1))
    g = ComputeGraph()
    for i in range(n):
        g.add(LayerProfile(f"n{i}", int(rng.integers(1, 50)), 1.0, ResourceVector(), str(rng.choice(classes))))
    perm = rng.permutation(n)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.25:
                g.connect(int(perm[a]), int(perm[b]))
    return g


def check_schedule(rng, trials=200):
    bad = 0
    for _ in range(trials):
        g = random_dag(rng)
        pool = PePool({c: int(rng.integers(1, 4)) for c in ("PE-A", "PE-B", "Adder")})
        dur = [int(rng.integers(1, 4)) for _ in range(len(g))]
        s = schedule(g, pool, dur)
        if schedule_violations(g, s, dur) or s.makespan > serial_makespan(dur):
            bad += 1
    return bad == 0, f"{trials - bad}/{trials} valid"


def feasible_factor_vectors(plan):
    """Every K vector (K_j >= 1) that fits the device budget."""
    limit = np.array(list(plan.device_limits))
    R = np.array([list(l.resources) for l in plan.layers])
    base = plan.n_replicas * R.sum(axis=0) + np.array(list(plan.misc))
    caps = []
    for r in R:
        room = limit - base
        extra = [room[i] // (plan.n_replicas * r[i]) for i in range(4) if r[i] > 0]
        caps.append(1 + int(min(extra)) if extra else 1)
    out = []
    for ks in itertools.product(*(range(1, c + 1) for c in caps)):
        use = plan.n_replicas * (np.array(ks) @ R) + np.array(list(plan.misc))
        if np.all(use <= limit):
            out.append(ks)
    return out


def brute_force_max_time(plan):
    """Minimum over feasible K vectors of max_j ceil(N_j / (F_j K_j)), integer F only."""
    best = None
    for ks in feasible_factor_vectors(plan):
        t = max(-(-l.n_op // (int(l.base_throughput) * k)) for l, k in zip(plan.layers, ks))
        best = t if best is None else min(best, t)
    return best


def random_alloc_instance(rng, n_layers=3):
    layers = [
        LayerProfile(f"l{j}", int(rng.integers(10, 400)), float(rng.integers(1, 4)),
                     ResourceVector(ff=int(rng.integers(1, 6)), dsp=int(rng.integers(1, 4))), "PE-A")
        for j in range(n_layers)
    ]
    base = sum((l.resources for l in layers), ResourceVector())
    extra = ResourceVector(ff=int(rng.integers(0, 3 * base.ff + 1)), dsp=int(rng.integers(0, 3 * base.dsp + 1)))
    return DevicePlan(base + extra, layers, 1, ResourceVector(), 100e6)


def check_allocate(rng, trials=30):
    optimal = 0
    for _ in range(trials):
        plan = random_alloc_instance(rng)
        got = allocate(plan).max_time
        if got == brute_force_max_time(plan):
            optimal += 1
    return optimal >= 0.9 * trials, f"{optimal}/{trials} optimal"


CHECKS = {
    "fft-vs-dft": check_fft,
    "bcm-vs-dense": check_bcm,
    "quant-bounds": check_quant,
    "schedule-validity": check_schedule,
    "allocator-vs-exhaustive": check_allocate,
}


def run(seed=0, out=print):
    """Run every check; return True when all pass."""
    all_ok = True
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        ok, detail = fn(np.random.default_rng(seed))
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:<26} {detail}  ({time.perf_counter() - t0:.2f}s)")
    return all_ok
