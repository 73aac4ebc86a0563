"""Greedy bottleneck-driven resource allocation.

Grow the slowest layer while the budget allows; when it no longer fits,
try taking a unit back from a fast layer and spend the freed resources on
the slowest one. Every intermediate plan respects the budget.
"""

import math
from fractions import Fraction

from .model import DevicePlan


class _State:
    """Allocation factors with times and resource usage kept up to date."""

    def __init__(self, plan: DevicePlan, factors):
        self.work = [Fraction(l.n_op) / Fraction(l.base_throughput) for l in plan.layers]
        self.unit = [tuple(l.resources) for l in plan.layers]
        self.m = plan.n_replicas
        self.limit = tuple(plan.device_limits)
        self.misc = tuple(plan.misc)
        self.factors = list(factors)
        self.times = [self.time(j, k) for j, k in enumerate(self.factors)]
        self.used = [0, 0, 0, 0]
        for j, k in enumerate(self.factors):
            for i in range(4):
                self.used[i] += self.m * k * self.unit[j][i]

    def copy(self):
        new = object.__new__(_State)
        new.__dict__.update(self.__dict__)
        new.factors, new.times, new.used = list(self.factors), list(self.times), list(self.used)
        return new

    def time(self, j, k):
        return math.ceil(self.work[j] / k)

    def fits(self, j, k):
        """Would setting layer ``j`` to factor ``k`` stay within the budget?"""
        dk = k - self.factors[j]
        return all(
            self.used[i] + self.m * dk * self.unit[j][i] + self.misc[i] <= self.limit[i] for i in range(4)
        )

    def set(self, j, k):
        dk = k - self.factors[j]
        for i in range(4):
            self.used[i] += self.m * dk * self.unit[j][i]
        self.factors[j] = k
        self.times[j] = self.time(j, k)

    @property
    def max_time(self):
        return max(self.times, default=0)

    def argmax(self):
        # lowest index wins ties
        return max(range(len(self.times)), key=lambda j: (self.times[j], -j))

    def next_factor(self, j):
        """Smallest K' > K that strictly lowers layer ``j``'s time, or None."""
        t = self.times[j]
        if t <= 1:
            return None
        # ceil(W / K') <= t - 1  <=>  K' >= W / (t - 1)
        return max(math.ceil(self.work[j] / (t - 1)), self.factors[j] + 1)


def _grow(state: _State, on_step):
    """Phase one: keep upgrading the slowest layer while the plan fits."""
    while True:
        j = state.argmax()
        k = state.next_factor(j)
        if k is None or not state.fits(j, k):
            return
        state.set(j, k)
        on_step(list(state.factors))


def allocate(plan: DevicePlan, on_step=None) -> DevicePlan:
    """Return ``plan`` with allocation factors chosen to shrink ``max_j T_j``.

    Starts from ``K_j = 1`` for every layer. ``on_step`` is called with
    every accepted intermediate plan.
    """
    start = plan.with_factors([1] * len(plan.layers))
    start.check_feasible()
    state = _State(plan, start.factors)
    steps = []
    _grow(state, steps.append)
    while True:
        best = state.max_time
        # reclaim candidates: fastest first, lowest index on ties
        order = sorted(range(len(state.factors)), key=lambda j: (state.times[j], j))
        improved = False
        for j in order:
            k = state.factors[j]
            if k == 1 or state.time(j, k - 1) > best:
                continue
            trial = state.copy()
            trial.set(j, k - 1)
            trial_steps = [list(trial.factors)]
            _grow(trial, trial_steps.append)
            if trial.max_time < best:
                state = trial
                steps += trial_steps
                improved = True
                break
        if not improved:
            break
    if on_step:
        for factors in steps:
            on_step(plan.with_factors(factors))
    return plan.with_factors(state.factors)
