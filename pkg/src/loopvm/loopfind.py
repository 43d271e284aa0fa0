"""Depth-first loop detection over a CFG, loop nesting, and bailouts.

The traversal marks blocks *visited* and *active*; reaching an active block
means the edge is a backedge and that block heads a loop.  Loop-id sets are
back-propagated from successors to predecessors, with a header's own loop
removed whenever the header is entered other than through a backedge.  If
the entry block ends up inside any loop, some loop has a second entry and
the function is irreducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .cfg import Cfg


@dataclass
class TraversalState:
    visited: list[bool]
    active: list[bool]
    is_loop_header: list[bool]
    block_loops: list[set[int]]
    main_loop: list[int | None]
    backedges: set[tuple[int, int]] = field(default_factory=set)

    @classmethod
    def fresh(cls, n: int) -> "TraversalState":
        return cls([False] * n, [False] * n, [False] * n,
                   [set() for _ in range(n)], [None] * n)


@dataclass(frozen=True)
class Loop:
    id: int
    header: int
    blocks: frozenset[int]
    backedge_sources: frozenset[int]


@dataclass(frozen=True)
class LoopForest:
    loops: tuple[Loop, ...]            # inside-out: children before parents
    children: dict[int, tuple[int, ...]]
    roots: tuple[int, ...]
    parent: dict[int, int | None]

    def by_id(self, loop_id: int) -> Loop:
        for lp in self.loops:
            if lp.id == loop_id:
                return lp
        raise KeyError(loop_id)

    def depth(self) -> int:
        def d(lid: int) -> int:
            return 1 + max((d(c) for c in self.children[lid]), default=0)
        return max((d(r) for r in self.roots), default=0)


@dataclass(frozen=True)
class FoundLoops:
    loops: tuple[Loop, ...]            # creation order
    state: TraversalState = field(compare=False, repr=False)


@dataclass(frozen=True)
class Loops:
    forest: LoopForest


@dataclass(frozen=True)
class BailoutIrreducible:
    reason: str
    evidence: tuple[int, ...]


@dataclass(frozen=True)
class BailoutMutualContainment:
    pair: tuple[int, int]


AnalysisOutcome = Union[Loops, BailoutIrreducible, BailoutMutualContainment]

ENTRY_IN_LOOP = "entry block acquired loop membership"


def traverse(g: Cfg, *, complete: bool = True) -> tuple[TraversalState, list[dict]]:
    """Run the depth-first loop detection and return the raw state.

    Successors are visited in ascending index order.  The recursion is
    driven by an explicit stack.

    The single pass copies loop sets at the moment they are returned, so a
    block that reached an inner header before an enclosing loop was
    discovered misses the enclosing loop.  With ``complete`` (the default)
    the back-propagation rule is re-applied to every visited block until no
    set changes, which closes those gaps; sets only grow.
    """
    n = g.num_blocks
    if g.entry in g.successors[g.entry]:
        raise ValueError("entry block has a self-loop")
    st = TraversalState.fresh(n)
    loops: list[dict] = []

    def make_loop(b: int) -> int:
        if st.main_loop[b] is None:
            lid = len(loops)
            loops.append({"id": lid, "header": b, "blocks": set(), "backedge_sources": set()})
            st.is_loop_header[b] = True
            st.main_loop[b] = lid
            st.block_loops[b].add(lid)
        return st.main_loop[b]

    def outward(b: int) -> set[int]:
        if st.is_loop_header[b]:
            return st.block_loops[b] - {st.main_loop[b]}
        return set(st.block_loops[b])

    stack: list[list[int]] = []

    def arrive(b: int, pred: int) -> set[int] | None:
        if st.visited[b]:
            if st.active[b]:
                lid = make_loop(b)
                loops[lid]["backedge_sources"].add(pred)
                st.backedges.add((pred, b))
                return set(st.block_loops[b])
            return outward(b)
        st.visited[b] = st.active[b] = True
        stack.append([b, 0])
        return None

    postorder: list[int] = []
    st.visited[g.entry] = st.active[g.entry] = True
    stack.append([g.entry, 0])
    while stack:
        top = stack[-1]
        b, i = top
        succ = g.successors[b]
        if i < len(succ):
            top[1] = i + 1
            got = arrive(succ[i], b)
            if got is not None:
                st.block_loops[b] |= got
            continue
        for lid in st.block_loops[b]:
            loops[lid]["blocks"].add(b)
        st.active[b] = False
        stack.pop()
        postorder.append(b)
        if stack:
            st.block_loops[stack[-1][0]] |= outward(b)

    if complete:
        changed = True
        while changed:
            changed = False
            for b in postorder:
                acc = st.block_loops[b]
                before = len(acc)
                for s in g.successors[b]:
                    if st.is_loop_header[s] and (b, s) not in st.backedges:
                        acc |= st.block_loops[s] - {st.main_loop[s]}
                    else:
                        acc |= st.block_loops[s]
                if len(acc) != before:
                    changed = True
        for lp in loops:
            lp["blocks"] = {b for b in postorder if lp["id"] in st.block_loops[b]}
    return st, loops


def find_loops(g: Cfg, *, complete: bool = True) -> FoundLoops | BailoutIrreducible:
    """Detect loops in the reachable part of *g*.

    Returns the loops in creation order, or :class:`BailoutIrreducible`
    whose evidence is the sorted ids left in the entry block's loop set.
    """
    st, raw = traverse(g, complete=complete)
    residual = st.block_loops[g.entry]
    if residual:
        return BailoutIrreducible(ENTRY_IN_LOOP, tuple(sorted(residual)))
    loops = tuple(
        Loop(r["id"], r["header"], frozenset(r["blocks"]), frozenset(r["backedge_sources"]))
        for r in raw)
    return FoundLoops(loops, st)


def compute_nesting(loops) -> LoopForest | BailoutMutualContainment:
    """Arrange *loops* into a forest by header containment.

    B is a direct child of A when A contains B's header and no third loop
    sits between them.  The forest's loop tuple is in depth-first postorder
    so inner loops always come before the loops enclosing them.
    """
    loops = tuple(loops)
    ids = [lp.id for lp in loops]
    by_id = {lp.id: lp for lp in loops}
    contains = {a: {b for b in ids if b != a and by_id[b].header in by_id[a].blocks} for a in ids}
    for a in ids:
        for b in sorted(contains[a]):
            if a < b and a in contains[b]:
                return BailoutMutualContainment((a, b))
    parent: dict[int, int | None] = {}
    for b in ids:
        outer = [a for a in ids if b in contains[a]]
        direct = [a for a in outer if not any(c in contains[a] and b in contains[c] for c in outer)]
        parent[b] = min(direct) if direct else None
    children = {a: tuple(sorted(b for b in ids if parent[b] == a)) for a in ids}
    roots = tuple(sorted(b for b in ids if parent[b] is None))

    order: list[int] = []
    for root in roots:
        work = [(root, False)]
        while work:
            lid, expanded = work.pop()
            if expanded:
                order.append(lid)
                continue
            work.append((lid, True))
            for c in reversed(children[lid]):
                work.append((c, False))
    return LoopForest(tuple(by_id[i] for i in order), children, roots, parent)


def analyze(g: Cfg, *, complete: bool = True) -> AnalysisOutcome:
    """Loop detection followed by nesting, folding both bailouts together."""
    found = find_loops(g, complete=complete)
    if isinstance(found, BailoutIrreducible):
        return found
    forest = compute_nesting(found.loops)
    if isinstance(forest, BailoutMutualContainment):
        return forest
    return Loops(forest)


def describe_outcome(outcome: AnalysisOutcome) -> list[str]:
    """Lines in the ``--dump-loops`` format."""
    if isinstance(outcome, BailoutIrreducible):
        ids = ",".join(map(str, outcome.evidence))
        return [f"bailout: irreducible ({outcome.reason}; entry loops={{{ids}}})"]
    if isinstance(outcome, BailoutMutualContainment):
        a, b = outcome.pair
        return [f"bailout: mutual-containment (loops {a} and {b})"]
    forest = outcome.forest
    out = []
    for lp in sorted(forest.loops, key=lambda x: x.id):
        par = forest.parent[lp.id]
        blocks = ",".join(map(str, sorted(lp.blocks)))
        out.append(f"loop {lp.id} header={lp.header} blocks={{{blocks}}} "
                   f"parent={'none' if par is None else par}")
    return out
