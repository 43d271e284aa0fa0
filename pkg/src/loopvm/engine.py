"""Two-tier execution engine with loop-level on-stack replacement.

Functions run through a block dispatch loop whose units are plain blocks or
extracted loop units.  A loop unit runs one iteration at a time; once its
cumulative iteration count reaches the OSR threshold the *current*
activation continues in compiled code.  Independently, a function whose
call count reaches the function threshold is compiled as a whole.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

from . import compiler
from .cfg import build_cfg
from .extract import (RETURN_SENTINEL, BlockUnit, ExecutableFunction, InternalError,
                      LoopUnit, extract_loops)
from .ir import BinOp, Branch, Call, Const, I64_MAX, I64_MIN, Jump, Module, Move, Print
from .loopfind import analyze
from .semantics import BINARY, Trap

MAX_CALL_DEPTH = 10_000
_STACK_BYTES = 512 * 1024 * 1024
_stack_lock = threading.Lock()


@dataclass(frozen=True)
class EngineConfig:
    osr_enabled: bool = True
    osr_threshold: int = 1000
    func_threshold: int = 10
    trace: bool = False
    extract: bool = True

    def __post_init__(self):
        if self.osr_threshold < 1 or self.func_threshold < 1:
            raise ValueError("thresholds must be >= 1")


class Continue:
    __slots__ = ()

    def __repr__(self):
        return "Continue"


CONTINUE = Continue()


@dataclass(frozen=True)
class ExitTo:
    target: int


IterationOutcome = Continue | ExitTo


@dataclass(frozen=True)
class PromotionEvent:
    kind: str                  # "loop" or "fn"
    function: str
    unit: int | str            # loop id, or function name
    at: int                    # counter value that triggered promotion
    frame: tuple[int, ...]     # frame snapshot at the promotion boundary
    mid_activation: bool = False


@dataclass
class TierState:
    call_count: dict[str, int]
    function_code: dict[str, Callable[[list[int]], int]]
    loops: dict[tuple[str, int], LoopUnit]
    instructions: int = 0
    resolutions: int = 0


@dataclass
class TierReport:
    events: list[PromotionEvent]
    call_counts: dict[str, int]
    loop_iterations: dict[tuple[str, int], int]
    compiled_loops: set[tuple[str, int]]
    compiled_functions: set[str]
    instructions: int
    resolutions: int
    trace: list[str] = field(default_factory=list)

    def loop_promotions(self) -> list[PromotionEvent]:
        return [e for e in self.events if e.kind == "loop"]


class RunResult(NamedTuple):
    value: int
    output: str
    report: TierReport


def resolve_successor(u: LoopUnit, frame: Sequence[int]) -> int:
    """Map the successor slot back onto one of *u*'s build-time exit constants."""
    want = frame[-1]
    for t in u.constant_successors:
        if t == want:
            return t
    raise InternalError(f"loop {u.loop_id}: successor {want} not among exits {list(u.constant_successors)}")


def _on_deep_stack(fn, *args):
    """Run *fn* in a thread with a large stack so guest recursion reaches MAX_CALL_DEPTH."""
    box: dict = {}

    def target():
        try:
            box["value"] = fn(*args)
        except BaseException as e:    # re-raised in the caller's thread
            box["error"] = e

    with _stack_lock:
        old_limit = sys.getrecursionlimit()
        old_size = threading.stack_size()
        sys.setrecursionlimit(max(old_limit, MAX_CALL_DEPTH * 24 + 2000))
        threading.stack_size(_STACK_BYTES)
        try:
            t = threading.Thread(target=target, name="loopvm-deep")
            t.start()
            t.join()
        finally:
            threading.stack_size(old_size)
            sys.setrecursionlimit(old_limit)
    if "error" in box:
        raise box["error"]
    return box["value"]


class Engine:
    """One engine instance: isolated tier state, single-threaded.

    IR functions are analysed and extracted once, up front.  State persists
    across :meth:`run` calls, which is what in-process benchmark iterations
    rely on.
    """

    def __init__(self, module: Module, config: EngineConfig | None = None,
                 iteration_hook: Callable[[LoopUnit, int, list[int]], None] | None = None):
        self.module = module
        self.config = config or EngineConfig()
        self.iteration_hook = iteration_hook
        self.functions: dict[str, ExecutableFunction] = {}
        for name, f in module.functions.items():
            outcome = analyze(build_cfg(f)) if self.config.extract else None
            self.functions[name] = extract_loops(f, outcome)
        self.state = TierState(
            {n: 0 for n in self.functions}, {},
            {(u.function, u.loop_id): u for ef in self.functions.values() for u in ef.loop_units()})
        self.events: list[PromotionEvent] = []
        self.trace_lines: list[str] = []
        self._out: list[str] = []
        self._ret = 0
        self._depth = 0
        self._needs_deep_stack = any(
            isinstance(ins, Call) for f in module.functions.values() for b in f.blocks for ins in b.body)

    # -- public entry points -------------------------------------------------

    def run(self, args: Sequence[int] = ()) -> RunResult:
        entry = self.functions[self.module.entry_function]
        if len(args) != len(entry.params):
            raise ValueError(f"{entry.name} expects {len(entry.params)} arguments, got {len(args)}")
        for a in args:
            if not I64_MIN <= a <= I64_MAX:
                raise ValueError(f"argument {a} does not fit in 64 bits")
        self._out = []
        self._depth = 0
        try:
            if self._needs_deep_stack:
                value = _on_deep_stack(self.call, entry.name, list(args))
            else:
                value = self.call(entry.name, list(args))
        except Trap as trap:
            trap.output = "".join(self._out)
            raise
        return RunResult(value, "".join(self._out), self.report())

    def report(self) -> TierReport:
        st = self.state
        return TierReport(
            list(self.events), dict(st.call_count),
            {k: u.tier.iterations for k, u in st.loops.items()},
            {k for k, u in st.loops.items() if u.tier.compiled},
            set(st.function_code), st.instructions, st.resolutions, list(self.trace_lines))

    # -- runtime services used by both tiers --------------------------------

    def emit(self, value: int):
        self._out.append(f"{value}\n")

    def set_return(self, value: int):
        self._ret = value

    def get_return(self) -> int:
        return self._ret

    def _trace(self, line: str):
        self.trace_lines.append(line)

    # -- calls and function tier --------------------------------------------

    def call(self, name: str, args: list[int]) -> int:
        ef = self.functions[name]
        self._depth += 1
        try:
            if self._depth > MAX_CALL_DEPTH:
                raise Trap("call-depth", f"call depth exceeds {MAX_CALL_DEPTH}")
            st = self.state
            count = st.call_count[name] = st.call_count[name] + 1
            frame = [0] * ef.frame_size
            for p, a in zip(ef.params, args):
                frame[p] = a
            if self.config.trace:
                self._trace(f"enter fn {name}")
            code = st.function_code.get(name)
            if code is None and count >= self.config.func_threshold:
                code = self._promote_function(ef, count, frame)
            value = code(frame) if code is not None else self.dispatch_function(ef, frame)
            if self.config.trace:
                self._trace(f"exit fn {name} -> {value}")
            return value
        finally:
            self._depth -= 1

    def _promote_function(self, ef: ExecutableFunction, count: int, frame: list[int]):
        for u in ef.loop_units():       # inner before outer
            if not u.tier.compiled:
                u.tier.code = compiler.compile_loop(self, u, ef.successor_slot, inner_compiled=True)
                u.tier.compiled = True
        code = compiler.compile_function(self, ef)
        self.state.function_code[ef.name] = code
        self.events.append(PromotionEvent("fn", ef.name, ef.name, count, tuple(frame)))
        if self.config.trace:
            self._trace(f"promote fn {ef.name} at {count}")
        return code

    # -- interpreted tier ----------------------------------------------------

    def dispatch_function(self, ef: ExecutableFunction, frame: list[int]) -> int:
        units = ef.units
        index = 0
        while index != RETURN_SENTINEL:
            unit = units[index]
            if type(unit) is BlockUnit:
                index = self.execute_block(unit, frame)
            else:
                index = self.execute_loop_unit(unit, frame)
        return self._ret

    def execute_block(self, unit: BlockUnit, frame: list[int]) -> int:
        st = self.state
        if self.config.trace:
            self._trace(f"block {unit.index}")
        for ins in unit.body:
            st.instructions += 1
            cls = type(ins)
            if cls is BinOp:
                frame[ins.dst] = BINARY[ins.op](frame[ins.lhs], frame[ins.rhs])
            elif cls is Const:
                frame[ins.dst] = ins.value
            elif cls is Move:
                frame[ins.dst] = frame[ins.src]
            elif cls is Call:
                frame[ins.dst] = self.call(ins.callee, [frame[a] for a in ins.args])
            elif cls is Print:
                self.emit(frame[ins.src])
        st.instructions += 1
        term = unit.terminator
        cls = type(term)
        if cls is Jump:
            return term.target
        if cls is Branch:
            c = frame[term.cond]
            if c == 1:
                return term.true_target
            if c == 0:
                return term.false_target
            raise Trap("bad-condition", f"branch condition {c} is not 0/1")
        self._ret = frame[term.src]
        return RETURN_SENTINEL

    def execute_loop_unit(self, u: LoopUnit, frame: list[int]) -> int:
        """Run one activation of *u* and return the block to continue at."""
        tier = u.tier
        cfg = self.config
        if tier.compiled and cfg.osr_enabled:
            return tier.code(frame)
        activation = 0
        while True:
            outcome = self.execute_repeating(u, frame)
            tier.iterations += 1
            activation += 1
            n = tier.iterations
            if cfg.trace:
                self._trace(f"loop {u.loop_id} iter {n}")
            if self.iteration_hook is not None:
                self.iteration_hook(u, n, frame)
            if cfg.osr_enabled:
                if not tier.compiled and n >= cfg.osr_threshold:
                    self._promote_loop(u, n, frame, outcome is CONTINUE)
                if tier.compiled and outcome is CONTINUE:
                    return tier.code(frame)
            if outcome is not CONTINUE:
                frame[-1] = outcome.target
                self.state.resolutions += 1
                return resolve_successor(u, frame)

    def execute_repeating(self, u: LoopUnit, frame: list[int]) -> IterationOutcome:
        """One loop iteration: dispatch over the members starting at the header."""
        members = u.members
        header = u.header
        index = header
        while True:
            m = members[index]
            if type(m) is BlockUnit:
                index = self.execute_block(m, frame)
            else:
                index = self.execute_loop_unit(m, frame)
            if index == header:
                return CONTINUE
            if index not in members:
                return ExitTo(index)

    def _promote_loop(self, u: LoopUnit, n: int, frame: list[int], mid: bool):
        ef = self.functions[u.function]
        u.tier.code = compiler.compile_loop(self, u, ef.successor_slot, inner_compiled=False)
        u.tier.compiled = True
        self.events.append(PromotionEvent("loop", u.function, u.loop_id, n, tuple(frame), mid))
        if self.config.trace:
            self._trace(f"promote loop {u.loop_id} at {n}")


def run_module(m: Module, args: Sequence[int] = (), cfg: EngineConfig | None = None) -> RunResult:
    """Execute *m*'s entry function once in a fresh engine."""
    return Engine(m, cfg).run(args)
