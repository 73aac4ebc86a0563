"""Performance report combining an allocated plan with its schedule."""

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional

from .model import DevicePlan, throughput_exact
from .scheduler import Schedule


@dataclass
class LayerReport:
    name: str
    pe_class: str
    n_op: int
    base_throughput: float
    alloc_factor: int
    time_cycles: int


@dataclass
class PerfReport:
    """Modeled performance of one pipelined encoder/decoder.

    Latency for a batch of ``B`` inputs is the pipeline fill,
    ``(makespan - 1)`` stages, plus ``B`` issue intervals of
    ``n * max_j T_j`` cycles, so batch throughput rises toward the
    steady-state figure as ``B`` grows.
    """

    layers: List[LayerReport]
    n_layers: int
    n_replicas: int
    clock_freq: float
    max_time_cycles: int
    throughput: float
    resources_used: dict
    resources_limit: dict
    makespan_stages: int
    stage_cycles: int
    latency_s: float
    batch: int
    batch_latency_s: float
    batch_throughput: float
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PerfReport":
        d = dict(d)
        d["layers"] = [LayerReport(**l) for l in d["layers"]]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "PerfReport":
        return cls.from_dict(json.loads(text))


def report(plan: DevicePlan, sched: Schedule, batch: int = 1, seed: Optional[int] = None) -> PerfReport:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    tput = throughput_exact(plan)
    n = len(plan.layers)
    slowest = plan.max_time
    freq = Fraction(plan.clock_freq)
    makespan = sched.makespan
    latency = Fraction(makespan * slowest) / freq
    batch_cycles = (makespan - 1 + batch * n) * slowest
    batch_latency = Fraction(batch_cycles) / freq
    return PerfReport(
        layers=[
            LayerReport(l.name, l.pe_class.value, l.n_op, l.base_throughput, l.alloc_factor, l.time)
            for l in plan.layers
        ],
        n_layers=n,
        n_replicas=plan.n_replicas,
        clock_freq=plan.clock_freq,
        max_time_cycles=slowest,
        throughput=float(tput),
        resources_used=plan.resource_usage().to_dict(),
        resources_limit=plan.device_limits.to_dict(),
        makespan_stages=makespan,
        stage_cycles=slowest,
        latency_s=float(latency),
        batch=batch,
        batch_latency_s=float(batch_latency),
        batch_throughput=float(batch / batch_latency),
        seed=seed,
    )
