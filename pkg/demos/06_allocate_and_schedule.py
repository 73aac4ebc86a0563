"""
Resource allocation and pipeline scheduling
===========================================

Build the dataflow graph of one encoder layer, give the slowest operations
more compute until the device is full, then list-schedule the graph onto
processing elements.
"""

from circformer.nn import TransformerConfig
from circformer.sched import (
    DeviceConfig,
    allocate,
    build_encoder_graph,
    gantt,
    report,
    schedule,
    throughput,
)
from circformer.sched.scheduler import stage_durations

cfg = TransformerConfig.preset("shallow")
device = DeviceConfig.from_dict({
    "device": {"ff": 2_364_480, "lut": 1_182_240, "dsp": 6840, "bram": 2160, "clock_mhz": 200},
    "misc": {"ff": 20_000, "lut": 15_000, "bram": 100},
})

graph = build_encoder_graph(cfg, seq_len=32, block_size=8)
print(f"{len(graph)} nodes in {len(graph.stages)} pipeline stages")
for node in graph.nodes[:4]:
    print(f"  {node.name:<24} {node.pe_class.value:<7} {node.n_op:>9} ops")

plan = device.plan(graph, cfg.num_layers)
print("uniform  : max T =", plan.max_time, "cycles, throughput", round(throughput(plan), 1), "/s")

steps = []
plan = allocate(plan, on_step=steps.append)
print("allocated: max T =", plan.max_time, "cycles, throughput", round(throughput(plan), 1), "/s", f"({len(steps)} steps)")
print("resources used:", plan.resource_usage().to_dict())

graph.nodes[:] = plan.layers
pool = device.pool(graph)
sched = schedule(graph, pool, stage_durations(graph, granularity=2))
print(gantt(sched, pool=pool))

for batch in (1, 4, 16):
    r = report(plan, sched, batch)
    print(f"batch {batch:>2}: latency {1e3 * r.batch_latency_s:.3f} ms, {r.batch_throughput:.0f} inferences/s")
