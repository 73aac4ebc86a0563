from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from circformer.errors import DomainError, FeasibilityError
from circformer.sched import DevicePlan, LayerProfile, ResourceVector, layer_time, throughput, throughput_exact


def layer(n_op, f=1, k=1, res=ResourceVector(dsp=1), name="l"):
    return LayerProfile(name, n_op, f, res, "PE-A", k)


@pytest.mark.parametrize("n,f,k,t", [(1000, 10, 2, 50), (0, 3, 1, 0), (7, 2, 1, 4), (10, 2.5, 1, 4), (9, 0.5, 3, 6)])
def test_layer_time(n, f, k, t):
    assert layer_time(layer(n, f, k)) == t


def test_layer_time_errors():
    with pytest.raises(DomainError):
        layer_time(layer(10, 1, 0))
    with pytest.raises(DomainError):
        layer(10, 0)
    with pytest.raises(DomainError):
        layer(-1)


def test_resource_vector_ops():
    a = ResourceVector(1, 2, 3, 4)
    assert a + a == ResourceVector(2, 4, 6, 8)
    assert 3 * a == a * 3 == ResourceVector(3, 6, 9, 12)
    assert a.fits(a) and not (a * 2).fits(a)
    assert (a * 2).deficits(ResourceVector(2, 4, 5, 9)) == {"dsp": 1}
    assert ResourceVector.from_dict(a.to_dict()) == a
    with pytest.raises(DomainError):
        ResourceVector(-1)
    with pytest.raises(DomainError):
        ResourceVector.from_dict({"uram": 1})


def test_throughput_example():
    plan = DevicePlan(ResourceVector(dsp=10), [layer(50), layer(20)], clock_freq=100)
    assert throughput(plan) == 1.0
    assert throughput_exact(plan) == Fraction(1)


def test_doubling_slowest_doubles_throughput():
    plan = DevicePlan(ResourceVector(dsp=10), [layer(1000, 10), layer(100, 10)], clock_freq=1e6)
    before = throughput_exact(plan)
    after = throughput_exact(plan.with_factors([2, 1]))
    assert after == 2 * before


def test_infeasible_plan_lists_deficits():
    plan = DevicePlan(ResourceVector(ff=5, dsp=1), [layer(10, res=ResourceVector(ff=3, dsp=1))], n_replicas=2,
                      misc=ResourceVector(ff=1))
    assert plan.resource_usage() == ResourceVector(ff=7, dsp=2)
    with pytest.raises(FeasibilityError) as exc:
        throughput(plan)
    assert exc.value.deficits == {"ff": 2, "dsp": 1}


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10 ** 6), st.integers(1, 50), st.integers(1, 16)), min_size=1, max_size=8),
       st.integers(1, 10 ** 9))
def test_throughput_matches_arithmetic(specs, freq):
    layers = [layer(n, f, k, ResourceVector()) for n, f, k in specs]
    plan = DevicePlan(ResourceVector(), layers, clock_freq=freq)
    slowest = max(-(-n // (f * k)) for n, f, k in specs)
    if slowest == 0:
        with pytest.raises(DomainError):
            throughput(plan)
        return
    assert throughput_exact(plan) == Fraction(freq, len(specs) * slowest)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 5000), st.integers(1, 9)), min_size=1, max_size=6), st.integers(1, 8))
def test_growing_argmax_never_hurts(specs, k):
    layers = [layer(n, f, 1, ResourceVector(), name=str(i)) for i, (n, f) in enumerate(specs)]
    plan = DevicePlan(ResourceVector(), layers, clock_freq=1e8)
    times = plan.times
    j = times.index(max(times))
    factors = [1] * len(specs)
    factors[j] = 1 + k
    grown = plan.with_factors(factors)
    assert throughput_exact(grown) >= throughput_exact(plan)
    if grown.max_time < plan.max_time:
        assert throughput_exact(grown) > throughput_exact(plan)
