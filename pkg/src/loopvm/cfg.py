"""Explicit control-flow graph over block indices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .ir import Function, terminator_targets

if TYPE_CHECKING:
    from .loopfind import LoopForest


@dataclass(frozen=True)
class Cfg:
    """Successor/predecessor adjacency; every adjacency tuple is ascending."""

    num_blocks: int
    successors: tuple[tuple[int, ...], ...]
    predecessors: tuple[tuple[int, ...], ...]
    entry: int = 0

    @classmethod
    def from_edges(cls, num_blocks: int, edges: Iterable[tuple[int, int]]) -> "Cfg":
        succ: list[set[int]] = [set() for _ in range(num_blocks)]
        pred: list[set[int]] = [set() for _ in range(num_blocks)]
        for u, v in edges:
            if not (0 <= u < num_blocks and 0 <= v < num_blocks):
                raise ValueError(f"edge {u}->{v} outside 0..{num_blocks - 1}")
            succ[u].add(v)
            pred[v].add(u)
        return cls(num_blocks,
                   tuple(tuple(sorted(s)) for s in succ),
                   tuple(tuple(sorted(p)) for p in pred))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.num_blocks) for v in self.successors[u]]


def build_cfg(f: Function) -> Cfg:
    """CFG of *f*, derived from block terminators only."""
    return Cfg.from_edges(
        len(f.blocks),
        ((b.index, t) for b in f.blocks for t in terminator_targets(b.terminator)))


def reachable_blocks(g: Cfg) -> frozenset[int]:
    seen = {g.entry}
    work = [g.entry]
    while work:
        for s in g.successors[work.pop()]:
            if s not in seen:
                seen.add(s)
                work.append(s)
    return frozenset(seen)


def restrict_to_reachable(g: Cfg) -> Cfg:
    """Same block numbering, with edges out of unreachable blocks removed."""
    live = reachable_blocks(g)
    return Cfg.from_edges(g.num_blocks, ((u, v) for u, v in g.edges() if u in live))


def export_dot(g: Cfg, loops: "LoopForest | None" = None, name: str = "cfg") -> str:
    """Render *g* as a GraphViz digraph.

    With a loop forest, each loop becomes a (nested) ``cluster_loop<id>``
    subgraph and loop headers are drawn double-circled.
    """
    lines = [f'digraph "{name}" {{', "  node [shape=circle];"]
    placed: set[int] = set()
    if loops is not None and loops.loops:
        by_id = {lp.id: lp for lp in loops.loops}

        def emit(loop_id: int, depth: int):
            lp = by_id[loop_id]
            pad = "  " * depth
            lines.append(f"{pad}subgraph cluster_loop{lp.id} {{")
            lines.append(f'{pad}  label="loop {lp.id}";')
            lines.append(f"{pad}  {lp.header} [shape=doublecircle];")
            placed.add(lp.header)
            inner: set[int] = set()
            for child in loops.children[lp.id]:
                emit(child, depth + 1)
                inner |= by_id[child].blocks
            for b in sorted(lp.blocks - inner - {lp.header}):
                lines.append(f"{pad}  {b};")
                placed.add(b)
            lines.append(f"{pad}}}")

        for root in loops.roots:
            emit(root, 1)
    for b in range(g.num_blocks):
        if b not in placed:
            lines.append(f"  {b};")
    for u, v in g.edges():
        lines.append(f"  {u} -> {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"
