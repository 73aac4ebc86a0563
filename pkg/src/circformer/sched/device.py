"""Device configuration JSON.

::

    {
      "device": {"ff": 2364480, "lut": 1182240, "dsp": 6840, "bram": 2160, "clock_mhz": 200},
      "misc": {"ff": 20000, "lut": 15000, "dsp": 0, "bram": 100},
      "replicas": 2,
      "pe_profiles": {"PE-A": {"base_throughput": 1, "resources": {"ff": 180, "dsp": 1}}},
      "pe_counts": {"PE-A": 3}
    }

``replicas`` (M) defaults to the model's layer count, ``pe_profiles``
entries override :data:`DEFAULT_PE_PROFILES` per class, and
``pe_counts`` overrides the scheduler pool size per class.
"""

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional

from ..errors import DomainError
from .graph import DEFAULT_PE_PROFILES, ComputeGraph, PeProfile
from .model import DevicePlan, PeClass, ResourceVector
from .scheduler import PePool


@dataclass
class DeviceConfig:
    limits: ResourceVector
    clock_mhz: float
    misc: ResourceVector = ResourceVector()
    replicas: Optional[int] = None
    pe_profiles: Dict[PeClass, PeProfile] = field(default_factory=dict)
    pe_counts: Dict[PeClass, int] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceConfig":
        try:
            dev = dict(d["device"])
        except (KeyError, TypeError):
            raise DomainError("device config needs a 'device' object") from None
        clock = dev.pop("clock_mhz", None)
        if clock is None or not clock > 0:
            raise DomainError("device.clock_mhz must be a positive number")
        profiles = {}
        for name, p in (d.get("pe_profiles") or {}).items():
            cls_ = PeClass(name)
            base = DEFAULT_PE_PROFILES[cls_]
            res = ResourceVector.from_dict(p["resources"]) if "resources" in p else base.resources
            profiles[cls_] = PeProfile(float(p.get("base_throughput", base.base_throughput)), res)
        replicas = d.get("replicas")
        if replicas is not None and int(replicas) < 1:
            raise DomainError("replicas must be >= 1")
        return cls(
            ResourceVector.from_dict(dev),
            float(clock),
            ResourceVector.from_dict(d.get("misc") or {}),
            None if replicas is None else int(replicas),
            profiles,
            {PeClass(k): int(v) for k, v in (d.get("pe_counts") or {}).items()},
        )

    @classmethod
    def load(cls, path) -> "DeviceConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        dev = self.limits.to_dict()
        dev["clock_mhz"] = self.clock_mhz
        d = {"device": dev, "misc": self.misc.to_dict()}
        if self.replicas is not None:
            d["replicas"] = self.replicas
        if self.pe_profiles:
            d["pe_profiles"] = {
                k.value: {"base_throughput": p.base_throughput, "resources": p.resources.to_dict()}
                for k, p in self.pe_profiles.items()
            }
        if self.pe_counts:
            d["pe_counts"] = {k.value: v for k, v in self.pe_counts.items()}
        return d

    def plan(self, graph: ComputeGraph, replicas: int) -> DevicePlan:
        return DevicePlan(self.limits, graph.nodes, self.replicas or replicas, self.misc, self.clock_mhz * 1e6)

    def pool(self, graph: ComputeGraph) -> PePool:
        """PE pool for scheduling.

        Unless overridden, each class gets as many instances as the largest
        number of its nodes sharing one pipeline stage.
        """
        per_stage = Counter((n.stage, n.pe_class) for n in graph.nodes)
        counts = {}
        for (_, cls), c in per_stage.items():
            counts[cls] = max(counts.get(cls, 0), c)
        counts.update(self.pe_counts)
        return PePool(counts)
