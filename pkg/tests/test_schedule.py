import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circformer.errors import CycleError, DomainError, UnschedulableError
from circformer.sched import ComputeGraph, LayerProfile, PePool, ResourceVector, gantt, schedule, serial_makespan
from circformer.sched.scheduler import PeInstance, Schedule, stage_durations

from oracles import schedule_problems


def node(cls="PE-A", n_op=10, name=None):
    return LayerProfile(name or cls, n_op, 1, ResourceVector(), cls)


def chain(*classes):
    g = ComputeGraph()
    ids = [g.add(node(c, name=f"n{i}")) for i, c in enumerate(classes)]
    for a, b in zip(ids, ids[1:]):
        g.connect(a, b)
    return g


def test_single_node():
    g = chain("PE-A")
    s = schedule(g, PePool({"PE-A": 1}), [1])
    assert [(e.layer, e.start_stage, e.end_stage, e.pe.name) for e in s.entries] == [(0, 1, 1, "PE-A1")]


def test_chain_two_classes():
    g = chain("PE-A", "PE-B")
    s = schedule(g, PePool({"PE-A": 1, "PE-B": 1}), [1, 1]).by_layer()
    assert (s[0].start_stage, s[1].start_stage) == (1, 2)


def test_parallel_nodes_share_stage_when_pes_allow():
    g = ComputeGraph()
    for _ in range(3):
        g.add(node())
    s = schedule(g, PePool({"PE-A": 2}), [1, 1, 1])
    assert [(e.layer, e.start_stage, e.pe.index) for e in s.entries] == [(0, 1, 1), (1, 1, 2), (2, 2, 1)]
    assert s.makespan == 2


def test_cycle_error_names_back_edge():
    g = chain("PE-A", "PE-A", "PE-A")
    g.connect(2, 0)
    with pytest.raises(CycleError) as exc:
        schedule(g, PePool({"PE-A": 1}))
    assert exc.value.edge in {(2, 0), (1, 2), (0, 1)}
    u, v = exc.value.edge
    assert (u, v) in g.edges


def test_missing_pe_class():
    with pytest.raises(UnschedulableError):
        schedule(chain("PE-A", "Softmax"), PePool({"PE-A": 1}))


def test_bad_durations():
    with pytest.raises(DomainError):
        schedule(chain("PE-A"), PePool({"PE-A": 1}), [0])
    with pytest.raises(DomainError):
        stage_durations(chain("PE-A"), 0)


def test_stage_durations_bucket():
    g = ComputeGraph()
    for n in (100, 50, 1, 0):
        g.add(node(n_op=n))
    assert stage_durations(g) == [1, 1, 1, 1]
    assert stage_durations(g, 4) == [4, 2, 1, 1]


def random_instance(rng):
    n = int(rng.integers(1, 13))
    classes = ("PE-A", "PE-B", "Adder")
    g = ComputeGraph()
    for i in range(n):
        g.add(node(str(rng.choice(classes)), name=f"n{i}"))
    order = rng.permutation(n)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.3:
                g.connect(int(order[a]), int(order[b]))
    pool = PePool({c: int(rng.integers(1, 4)) for c in classes})
    durations = [int(rng.integers(1, 4)) for _ in range(n)]
    return g, pool, durations


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_schedules_valid(seed):
    g, pool, dur = random_instance(np.random.default_rng(seed))
    s = schedule(g, pool, dur)
    assert schedule_problems(g, s.entries, dur) == []
    assert s.makespan <= serial_makespan(dur)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_deterministic(seed):
    g, pool, dur = random_instance(np.random.default_rng(seed))
    assert schedule(g, pool, dur).entries == schedule(g, pool, dur).entries


def test_json_roundtrip_and_gantt():
    g = chain("PE-A", "Adder", "PE-A")
    pool = PePool({"PE-A": 2, "Adder": 1})
    s = schedule(g, pool, [2, 1, 1])
    assert Schedule.from_json(s.to_json(g)) == s
    chart = gantt(s, g, pool)
    rows = chart.splitlines()
    assert rows[2].startswith("PE-A1") and rows[2].split("|")[1].split() == ["0", "0", ".", "2"]
    assert rows[3].split("|")[1].split() == [".", ".", ".", "."]
    assert rows[4].startswith("Adder1")
    assert "pipeline stages: 1" in chart


def test_pe_instance_name():
    assert PeInstance("PE-FFT", 3).name == "PE-FFT3"
    with pytest.raises(DomainError):
        PePool({"PE-A": -1})
