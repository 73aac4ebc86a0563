"""Accelerator performance model: allocation, DAG scheduling and reporting."""

from .allocate import allocate
from .device import DeviceConfig
from .graph import (
    DEFAULT_PE_PROFILES,
    ComputeGraph,
    PeProfile,
    build_decoder_graph,
    build_encoder_graph,
    build_model_graph,
    fft_throughput,
)
from .model import (
    DevicePlan,
    LayerProfile,
    PeClass,
    ResourceVector,
    layer_time,
    throughput,
    throughput_exact,
)
from .report import PerfReport, report
from .scheduler import PeInstance, PePool, Schedule, ScheduleEntry, gantt, schedule, serial_makespan, stage_durations

__all__ = [
    "allocate",
    "DeviceConfig",
    "DEFAULT_PE_PROFILES",
    "ComputeGraph",
    "PeProfile",
    "build_decoder_graph",
    "build_encoder_graph",
    "build_model_graph",
    "fft_throughput",
    "DevicePlan",
    "LayerProfile",
    "PeClass",
    "ResourceVector",
    "layer_time",
    "throughput",
    "throughput_exact",
    "PerfReport",
    "report",
    "PeInstance",
    "PePool",
    "Schedule",
    "ScheduleEntry",
    "gantt",
    "schedule",
    "serial_makespan",
    "stage_durations",
]
