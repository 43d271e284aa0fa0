"""Loop reconstruction and on-stack replacement for an unstructured block IR."""

from .cfg import Cfg, build_cfg, export_dot, reachable_blocks
from .engine import Engine, EngineConfig, RunResult, TierReport, resolve_successor, run_module
from .extract import ExecutableFunction, LoopUnit, extract_loops, loop_exit_successors
from .ir import Module, format_module, parse_module, validate_module
from .loopfind import (BailoutIrreducible, BailoutMutualContainment, LoopForest, Loops,
                       analyze, compute_nesting, find_loops)
from .oracle import natural_loops_oracle
from .semantics import Trap

__all__ = [
    "Cfg", "build_cfg", "export_dot", "reachable_blocks",
    "Engine", "EngineConfig", "RunResult", "TierReport", "resolve_successor", "run_module",
    "ExecutableFunction", "LoopUnit", "extract_loops", "loop_exit_successors",
    "Module", "format_module", "parse_module", "validate_module",
    "BailoutIrreducible", "BailoutMutualContainment", "LoopForest", "Loops",
    "analyze", "compute_nesting", "find_loops", "natural_loops_oracle", "Trap",
]
