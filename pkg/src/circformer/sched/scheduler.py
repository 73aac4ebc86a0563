"""Stage-by-stage list scheduling of a layer DAG onto a pool of PEs.

The loop is the usual stage-stepped list scheduler, with two details
made explicit:

* the loop runs while anything is queued *or* executing, since the
  executing set starts empty;
* successors are released when all their predecessors have *retired*,
  not when a predecessor is issued, so no layer starts before its inputs
  exist.
"""

import heapq
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional

from ..errors import DomainError, UnschedulableError
from .graph import ComputeGraph
from .model import PeClass


@dataclass(frozen=True, order=True)
class PeInstance:
    pe_class: PeClass
    index: int

    def __post_init__(self):
        object.__setattr__(self, "pe_class", PeClass(self.pe_class))

    @property
    def name(self) -> str:
        return f"{self.pe_class.value}{self.index}"

    def __str__(self):
        return self.name


class PePool:
    """Multiset of PE instances, e.g. ``PePool({"PE-A": 2, "Adder": 1})``."""

    def __init__(self, counts: Dict):
        self.counts = Counter()
        for cls, n in counts.items():
            if n < 0:
                raise DomainError(f"negative PE count for {cls}")
            if n:
                self.counts[PeClass(cls)] += int(n)

    def instances(self, pe_class) -> List[PeInstance]:
        pe_class = PeClass(pe_class)
        return [PeInstance(pe_class, i + 1) for i in range(self.counts[pe_class])]

    def all_instances(self) -> List[PeInstance]:
        return [pe for cls in PeClass for pe in self.instances(cls)]

    def __repr__(self):
        inner = ", ".join(f"{k.value}: {v}" for k, v in self.counts.items())
        return f"PePool({{{inner}}})"


@dataclass(frozen=True)
class ScheduleEntry:
    layer: int
    start_stage: int
    end_stage: int
    pe: PeInstance

    def to_dict(self, names=None):
        d = {"layer": self.layer, "start_stage": self.start_stage, "end_stage": self.end_stage, "pe": self.pe.name}
        if names is not None:
            d["name"] = names[self.layer]
        return d


@dataclass(frozen=True)
class Schedule:
    entries: List[ScheduleEntry]

    @property
    def makespan(self) -> int:
        return max((e.end_stage for e in self.entries), default=0)

    def by_layer(self) -> Dict[int, ScheduleEntry]:
        return {e.layer: e for e in self.entries}

    def to_json(self, graph: Optional[ComputeGraph] = None) -> str:
        names = [n.name for n in graph.nodes] if graph is not None else None
        return json.dumps([e.to_dict(names) for e in self.entries], indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        entries = []
        for d in json.loads(text):
            pe = d["pe"]
            cls_name = pe.rstrip("0123456789")
            entries.append(
                ScheduleEntry(d["layer"], d["start_stage"], d["end_stage"], PeInstance(PeClass(cls_name), int(pe[len(cls_name):])))
            )
        return cls(entries)


def stage_durations(graph: ComputeGraph, granularity: int = 1) -> List[int]:
    """Bucket each layer's cycle count into whole stages.

    A stage lasts ``max_j T_j / granularity`` cycles; every layer takes at
    least one stage. With the default granularity every layer takes one.
    """
    if granularity < 1:
        raise DomainError("granularity must be >= 1")
    times = [n.time for n in graph.nodes]
    slowest = max(times, default=0)
    if slowest == 0:
        return [1] * len(times)
    return [max(1, math.ceil(t * granularity / slowest)) for t in times]


def schedule(graph: ComputeGraph, pool: PePool, durations: Optional[List[int]] = None) -> Schedule:
    """Assign every layer a start stage, end stage and PE instance.

    Stages are numbered from 1. Ready layers are considered in
    topological-priority order and take the lowest-numbered free PE of
    their class. ``durations`` (stages per layer) defaults to
    :func:`stage_durations`.

    Raises:
        CycleError: if the graph is not acyclic.
        UnschedulableError: if a layer's PE class has no instance in the pool.
    """
    order = graph.topo_order()  # raises on cycles
    missing = sorted({n.pe_class.value for n in graph.nodes if pool.counts[n.pe_class] == 0})
    if missing:
        raise UnschedulableError(f"no PE available for class(es) {', '.join(missing)}")
    if durations is None:
        durations = stage_durations(graph)
    if len(durations) != len(graph) or any(d < 1 for d in durations):
        raise DomainError("durations must give a positive stage count per layer")

    priority = {node: rank for rank, node in enumerate(order)}
    succ = graph.successors()
    waiting = [0] * len(graph)
    for _, v in graph.edges:
        waiting[v] += 1
    ready = [(priority[i], i) for i in range(len(graph)) if waiting[i] == 0]
    heapq.heapify(ready)
    free = {cls: pool.instances(cls) for cls in PeClass}
    for insts in free.values():
        heapq.heapify(insts)
    executing = []  # (end_stage, layer, pe, start_stage)
    entries = []
    stage = 1
    while ready or executing:
        # issue: walk the ready queue in priority order
        deferred = []
        while ready:
            item = heapq.heappop(ready)
            layer = item[1]
            cls = graph.nodes[layer].pe_class
            if free[cls]:
                pe = heapq.heappop(free[cls])
                executing.append((stage + durations[layer] - 1, layer, pe, stage))
            else:
                deferred.append(item)
        for item in deferred:
            heapq.heappush(ready, item)
        # retire everything finishing in this stage, then advance
        executing.sort()
        still = []
        for end, layer, pe, start in executing:
            if end == stage:
                entries.append(ScheduleEntry(layer, start, end, pe))
                heapq.heappush(free[pe.pe_class], pe)
                for v in succ[layer]:
                    waiting[v] -= 1
                    if waiting[v] == 0:
                        heapq.heappush(ready, (priority[v], v))
            else:
                still.append((end, layer, pe, start))
        executing = still
        stage += 1
    entries.sort(key=lambda e: (e.start_stage, priority[e.layer]))
    return Schedule(entries)


def serial_makespan(durations) -> int:
    """Makespan of running layers one at a time."""
    return sum(durations)


def gantt(sched: Schedule, graph: Optional[ComputeGraph] = None, pool: Optional[PePool] = None) -> str:
    """Plain-text chart: one row per PE, one column per stage, cells hold layer ids."""
    pes = pool.all_instances() if pool is not None else sorted({e.pe for e in sched.entries})
    width = max([len(str(e.layer)) for e in sched.entries] + [len(str(sched.makespan)), 1])
    label_w = max([len(pe.name) for pe in pes] + [5])
    cols = range(1, sched.makespan + 1)
    lines = ["stage".ljust(label_w) + " | " + " ".join(str(c).rjust(width) for c in cols)]
    lines.append("-" * len(lines[0]))
    grid = {pe: ["." * width for _ in cols] for pe in pes}
    for e in sched.entries:
        row = grid.setdefault(e.pe, ["." * width for _ in cols])
        for s in range(e.start_stage, e.end_stage + 1):
            row[s - 1] = str(e.layer).rjust(width)
    for pe in pes:
        lines.append(pe.name.ljust(label_w) + " | " + " ".join(grid[pe]))
    if graph is not None:
        lines.append("")
        stages = graph.stages
        lines.append(f"pipeline stages: {len(stages)}")
        for e in sorted(sched.entries, key=lambda e: e.layer):
            node = graph.nodes[e.layer]
            lines.append(f"{str(e.layer).rjust(width)}  {node.name}  (pipeline stage {node.stage}, {node.pe_class.value})")
    return "\n".join(lines) + "\n"
