"""Resource vectors, layer profiles and the pipeline throughput model."""

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List

from ..errors import DomainError, FeasibilityError

RESOURCE_KEYS = ("ff", "lut", "dsp", "bram")


class PeClass(str, enum.Enum):
    PE_A = "PE-A"
    PE_B = "PE-B"
    PE_FFT = "PE-FFT"
    ADDER = "Adder"
    SOFTMAX = "Softmax"


@dataclass(frozen=True)
class ResourceVector:
    ff: int = 0
    lut: int = 0
    dsp: int = 0
    bram: int = 0

    def __post_init__(self):
        for k in RESOURCE_KEYS:
            v = getattr(self, k)
            if v < 0 or int(v) != v:
                raise DomainError(f"resource {k} must be a non-negative integer, got {v}")
            object.__setattr__(self, k, int(v))

    def __add__(self, other):
        return ResourceVector(*(a + b for a, b in zip(self, other)))

    def __mul__(self, k: int):
        return ResourceVector(*(a * k for a in self))

    __rmul__ = __mul__

    def __iter__(self):
        return iter((self.ff, self.lut, self.dsp, self.bram))

    def fits(self, limit: "ResourceVector") -> bool:
        return all(a <= b for a, b in zip(self, limit))

    def deficits(self, limit: "ResourceVector") -> Dict[str, int]:
        """Components where this vector exceeds ``limit``, with the excess."""
        return {k: a - b for k, a, b in zip(RESOURCE_KEYS, self, limit) if a > b}

    def to_dict(self):
        return dict(zip(RESOURCE_KEYS, self))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(RESOURCE_KEYS)
        if unknown:
            raise DomainError(f"unknown resource keys {sorted(unknown)}")
        return cls(**{k: d.get(k, 0) for k in RESOURCE_KEYS})


@dataclass(frozen=True)
class LayerProfile:
    """One node of the dataflow graph.

    ``base_throughput`` is operations per cycle with one unit of resources
    and ``resources`` is the cost of that unit; allocating ``alloc_factor``
    units multiplies both.
    """

    name: str
    n_op: int
    base_throughput: float
    resources: ResourceVector
    pe_class: PeClass
    alloc_factor: int = 1
    stage: int = 0
    attrs: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pe_class", PeClass(self.pe_class))
        if self.n_op < 0:
            raise DomainError(f"{self.name}: n_op must be >= 0")
        if not self.base_throughput > 0:
            raise DomainError(f"{self.name}: base_throughput must be positive")

    @property
    def time(self) -> int:
        return layer_time(self)

    def with_factor(self, k: int) -> "LayerProfile":
        return replace(self, alloc_factor=k)


def layer_time(layer: LayerProfile) -> int:
    """Cycles ``ceil(n_op / (F * K))``, computed in exact rational arithmetic."""
    if layer.alloc_factor < 1:
        raise DomainError(f"{layer.name}: allocation factor must be >= 1, got {layer.alloc_factor}")
    return math.ceil(Fraction(layer.n_op) / (Fraction(layer.base_throughput) * layer.alloc_factor))


@dataclass(frozen=True)
class DevicePlan:
    device_limits: ResourceVector
    layers: List[LayerProfile]
    n_replicas: int = 1
    misc: ResourceVector = ResourceVector()
    clock_freq: float = 200e6

    def __post_init__(self):
        object.__setattr__(self, "layers", list(self.layers))
        if self.n_replicas < 1:
            raise DomainError("n_replicas must be >= 1")
        if not self.clock_freq > 0:
            raise DomainError("clock_freq must be positive")

    @property
    def factors(self):
        return [l.alloc_factor for l in self.layers]

    @property
    def times(self):
        return [l.time for l in self.layers]

    @property
    def max_time(self) -> int:
        return max(self.times, default=0)

    def with_factors(self, factors) -> "DevicePlan":
        return replace(self, layers=[l.with_factor(k) for l, k in zip(self.layers, factors)])

    def resource_usage(self) -> ResourceVector:
        """``M * sum_j K_j R_j + misc``."""
        total = ResourceVector()
        for l in self.layers:
            total = total + l.resources * l.alloc_factor
        return total * self.n_replicas + self.misc

    def feasible(self) -> bool:
        return self.resource_usage().fits(self.device_limits)

    def check_feasible(self):
        deficits = self.resource_usage().deficits(self.device_limits)
        if deficits:
            detail = ", ".join(f"{k} over by {v}" for k, v in deficits.items())
            raise FeasibilityError(f"plan exceeds device resources: {detail}", deficits)


def throughput_exact(plan: DevicePlan) -> Fraction:
    """``freq / (n * max_j T_j)`` as an exact fraction, in inferences per second."""
    if not plan.layers:
        raise DomainError("throughput of an empty plan")
    plan.check_feasible()
    slowest = plan.max_time
    if slowest == 0:
        raise DomainError("every layer takes zero cycles; throughput is unbounded")
    return Fraction(plan.clock_freq) / (len(plan.layers) * slowest)


def throughput(plan: DevicePlan) -> float:
    return float(throughput_exact(plan))
