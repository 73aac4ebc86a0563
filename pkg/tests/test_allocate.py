import pytest

from circformer.errors import FeasibilityError
from circformer.sched import DevicePlan, LayerProfile, ResourceVector, allocate

from alloc_instances import instances


def unit(n_op, f=1, name="l"):
    return LayerProfile(name, n_op, f, ResourceVector(dsp=1), "PE-A")


def test_single_layer_gets_whole_budget():
    plan = DevicePlan(ResourceVector(dsp=4), [unit(1000)])
    out = allocate(plan)
    assert out.factors == [4]
    assert out.max_time == 250


def test_two_identical_layers_one_spare_unit():
    # the spare unit goes to layer 0, but the twin still bounds max T
    plan = DevicePlan(ResourceVector(dsp=3), [unit(100, name="a"), unit(100, name="b")])
    out = allocate(plan)
    assert out.factors == [2, 1]
    assert out.max_time == 100


def test_two_identical_layers_two_spare_units():
    plan = DevicePlan(ResourceVector(dsp=4), [unit(100, name="a"), unit(100, name="b")])
    out = allocate(plan)
    assert out.factors == [2, 2]
    assert out.max_time == 50


def test_infeasible_start():
    with pytest.raises(FeasibilityError):
        allocate(DevicePlan(ResourceVector(dsp=1), [unit(10), unit(10)]))


def test_budget_alternates_between_bottlenecks():
    plan = DevicePlan(ResourceVector(dsp=5), [unit(100, name="a"), unit(90, name="b")])
    out = allocate(plan)
    assert out.feasible()
    assert out.max_time == 45


def test_every_step_is_feasible_and_monotone():
    for plan, *_ in instances(7, count=30):
        seen = []
        out = allocate(plan, on_step=seen.append)
        assert all(p.feasible() for p in seen)
        assert out.feasible()
        assert out.max_time <= plan.with_factors([1] * len(plan.layers)).max_time


def test_against_exhaustive_search():
    inst = instances(11, count=40)
    optimal = sum(allocate(plan).max_time == best for plan, best, _, _ in inst)
    assert all(allocate(plan).max_time <= uniform for plan, _, uniform, _ in inst)
    assert optimal >= 36


def test_deterministic():
    plan, *_ = instances(3, count=1)[0]
    assert allocate(plan).factors == allocate(plan).factors
