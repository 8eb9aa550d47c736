"""Operation-centric backend: modulo mapping of a DFG onto a CGRA and its cycle-level simulation."""

from gridloom.cgra.arch import CgraArch, load_cgra_arch
from gridloom.cgra.config_gen import CgraConfig, generate_config
from gridloom.cgra.exhaustive import exhaustive_map
from gridloom.cgra.mapper import map_dfg
from gridloom.cgra.mapping import CgraMapping, Hop, Route, format_mapping
from gridloom.cgra.sim import dump_trace, final_state, replay_trace, simulate_cgra
from gridloom.cgra.validate import validate_mapping

__all__ = [
    "CgraArch",
    "CgraConfig",
    "CgraMapping",
    "Hop",
    "Route",
    "dump_trace",
    "exhaustive_map",
    "final_state",
    "format_mapping",
    "generate_config",
    "load_cgra_arch",
    "map_dfg",
    "replay_trace",
    "simulate_cgra",
    "validate_mapping",
]
