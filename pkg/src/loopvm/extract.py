"""Turn a function plus its loop forest into a dispatch structure.

Every loop becomes a :class:`LoopUnit` sitting in its header's slot.  Units
are built inside-out, so an outer unit's members already contain the units
of its inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Union

from .cfg import Cfg, build_cfg
from .ir import BasicBlock, Function, Instruction, Ret, Terminator
from .loopfind import AnalysisOutcome, Loop, Loops


class InternalError(RuntimeError):
    """An analysis or extraction invariant was broken; never a user error."""


RETURN_SENTINEL = -1


@dataclass(frozen=True)
class BlockUnit:
    index: int
    body: tuple[Instruction, ...]
    terminator: Terminator

    @classmethod
    def of(cls, b: BasicBlock) -> "BlockUnit":
        return cls(b.index, b.body, b.terminator)


@dataclass(eq=False)
class LoopTier:
    """Mutable hotness state of one loop unit, owned by one engine."""
    iterations: int = 0
    compiled: bool = False
    code: Callable[[list[int]], int] | None = None


@dataclass(frozen=True, eq=False)
class LoopUnit:
    function: str
    loop_id: int
    header: int
    members: dict[int, "ExecUnit"]
    constant_successors: tuple[int, ...]
    tier: LoopTier = field(default_factory=LoopTier)


ExecUnit = Union[BlockUnit, LoopUnit]


@dataclass(frozen=True, eq=False)
class ExecutableFunction:
    name: str
    params: tuple[int, ...]
    units: tuple[ExecUnit, ...]
    num_registers: int
    successor_slot: int
    function: Function
    outcome: AnalysisOutcome | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def frame_size(self) -> int:
        return self.num_registers + 1

    def loop_units(self) -> list[LoopUnit]:
        """Every loop unit, inner before outer."""
        return [u for top in self.units for u in iter_loop_units(top)]


def iter_loop_units(unit: ExecUnit) -> Iterator[LoopUnit]:
    if isinstance(unit, LoopUnit):
        for m in unit.members.values():
            yield from iter_loop_units(m)
        yield unit


def loop_exit_successors(loop: Loop, g: Cfg) -> tuple[int, ...]:
    """Ascending exit targets of *loop*; -1 stands for a member ending in ``ret``."""
    out: set[int] = set()
    for b in loop.blocks:
        succ = g.successors[b]
        if not succ:
            out.add(RETURN_SENTINEL)
        out.update(t for t in succ if t not in loop.blocks)
    return tuple(sorted(out))


def plain_units(f: Function) -> tuple[BlockUnit, ...]:
    return tuple(BlockUnit.of(b) for b in f.blocks)


def extract_loops(f: Function, outcome: AnalysisOutcome | None, g: Cfg | None = None) -> ExecutableFunction:
    """Build the unit array for *f*.

    Any bailout (or ``outcome=None``, extraction disabled) yields plain
    block dispatch.
    """
    units: list[ExecUnit] = list(plain_units(f))
    if isinstance(outcome, Loops):
        g = g or build_cfg(f)
        n = len(f.blocks)
        forest = outcome.forest
        built: dict[int, LoopUnit] = {}
        for lp in forest.loops:
            bad = [b for b in lp.blocks if not 0 <= b < n]
            if bad or lp.header not in lp.blocks:
                raise InternalError(f"{f.name}: loop {lp.id} references unknown blocks {bad or lp.header}")
            members: dict[int, ExecUnit] = {}
            nested: set[int] = set()
            for cid in forest.children[lp.id]:
                if cid not in built:
                    raise InternalError(f"{f.name}: loop {cid} not built before its parent {lp.id}")
                child = forest.by_id(cid)
                nested |= child.blocks
                members[child.header] = built[cid]
            for b in sorted(lp.blocks - nested):
                if isinstance(f.blocks[b].terminator, Ret):
                    raise InternalError(f"{f.name}: ret block {b} inside loop {lp.id}")
                members[b] = units[b]
            built[lp.id] = LoopUnit(f.name, lp.id, lp.header, dict(sorted(members.items())),
                                    loop_exit_successors(lp, g))
        for rid in forest.roots:
            u = built[rid]
            units[u.header] = u
    return ExecutableFunction(f.name, f.params, tuple(units), f.num_registers,
                              f.num_registers, f, outcome)


def describe_units(ef: ExecutableFunction) -> list[str]:
    """Indented listing used by ``--dump-units``."""
    lines = [f"fn {ef.name} slots={ef.frame_size} successor_slot={ef.successor_slot}"]

    def emit(unit: ExecUnit, depth: int, slot: int | None):
        pad = "  " * depth
        at = f"[{slot}] " if slot is not None else ""
        if isinstance(unit, BlockUnit):
            lines.append(f"{pad}{at}block {unit.index}")
        else:
            exits = ",".join(map(str, unit.constant_successors))
            lines.append(f"{pad}{at}loop {unit.loop_id} header={unit.header} exits=[{exits}]")
            for m in unit.members.values():
                emit(m, depth + 1, None)

    for i, u in enumerate(ef.units):
        emit(u, 1, i)
    return lines
