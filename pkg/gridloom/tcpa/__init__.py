"""Iteration-centric backend: LSGP tiling, symbolic scheduling and lockstep simulation of a TCPA."""

from gridloom.tcpa.analysis import classify_tiled
from gridloom.tcpa.arch import FuSpec, TcpaArch, load_tcpa_arch, tcpa_arch_from_dict
from gridloom.tcpa.binding import RegisterBinding, bind_registers, left_edge
from gridloom.tcpa.configuration import TcpaConfiguration, compile_tcpa, dumps_configuration
from gridloom.tcpa.io import AgConfig, IoAllocation, allocate_io
from gridloom.tcpa.programs import FuProgram, GcTable, ProcessorClass, derive_classes, generate_programs
from gridloom.tcpa.schedule import TcpaSchedule, dependence_feasible, predict_latency, schedule_loop
from gridloom.tcpa.sim import dump_tcpa_trace, simulate_tcpa
from gridloom.tcpa.tiling import Tiling, partition, tileable_dims

__all__ = [
    "AgConfig",
    "FuProgram",
    "FuSpec",
    "GcTable",
    "IoAllocation",
    "ProcessorClass",
    "RegisterBinding",
    "TcpaArch",
    "TcpaConfiguration",
    "TcpaSchedule",
    "Tiling",
    "allocate_io",
    "bind_registers",
    "classify_tiled",
    "compile_tcpa",
    "dependence_feasible",
    "derive_classes",
    "dump_tcpa_trace",
    "dumps_configuration",
    "generate_programs",
    "left_edge",
    "load_tcpa_arch",
    "partition",
    "predict_latency",
    "schedule_loop",
    "simulate_tcpa",
    "tcpa_arch_from_dict",
    "tileable_dims",
]
