"""Loop-nest descriptions and their data-flow graphs (operation-centric path)."""

from gridloom.dfg.analysis import rec_mii, res_mii
from gridloom.dfg.build import build_loop_dfg
from gridloom.dfg.graph import Dfg, DfgEdge, DfgNode
from gridloom.dfg.loopnest import LoopNestSpec, evaluate_loopnest, load_loopnest, loopnest_from_dict
from gridloom.dfg.transform import flatten_loop, unroll_loop

__all__ = [
    "Dfg",
    "DfgEdge",
    "DfgNode",
    "LoopNestSpec",
    "build_loop_dfg",
    "evaluate_loopnest",
    "flatten_loop",
    "load_loopnest",
    "loopnest_from_dict",
    "rec_mii",
    "res_mii",
    "unroll_loop",
]
