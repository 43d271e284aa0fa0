"""Dominator-based natural-loop oracle, used to cross-check loop detection.

Shares nothing with :mod:`loopvm.loopfind` beyond the :class:`Cfg` type.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cfg import Cfg, reachable_blocks


@dataclass(frozen=True)
class OracleResult:
    reducible: bool
    loops: dict[int, frozenset[int]]     # header -> natural loop (union over backedges)


def _rpo(g: Cfg, live: frozenset[int]) -> tuple[list[int], list[tuple[int, int]]]:
    """Reverse postorder and the retreating edges of one DFS from the entry."""
    order: list[int] = []
    retreating: list[tuple[int, int]] = []
    state = {g.entry: 1}   # 1 = on stack, 2 = done
    stack = [(g.entry, iter(g.successors[g.entry]))]
    while stack:
        b, it = stack[-1]
        for s in it:
            if s not in state:
                state[s] = 1
                stack.append((s, iter(g.successors[s])))
                break
            if state[s] == 1:
                retreating.append((b, s))
        else:
            state[b] = 2
            order.append(b)
            stack.pop()
    order.reverse()
    return order, retreating


def dominators(g: Cfg) -> dict[int, frozenset[int]]:
    """Iterative dataflow: dom(n) = {n} | intersection of dom(p) over preds."""
    live = reachable_blocks(g)
    order, _ = _rpo(g, live)
    everything = frozenset(live)
    dom = {b: everything for b in live}
    dom[g.entry] = frozenset({g.entry})
    changed = True
    while changed:
        changed = False
        for b in order:
            if b == g.entry:
                continue
            preds = [p for p in g.predecessors[b] if p in live]
            new = frozenset.intersection(*(dom[p] for p in preds)) | {b}
            if new != dom[b]:
                dom[b] = new
                changed = True
    return dom


def natural_loops_oracle(g: Cfg) -> OracleResult:
    live = reachable_blocks(g)
    dom = dominators(g)
    _, retreating = _rpo(g, live)
    reducible = all(h in dom[u] for u, h in retreating)
    loops: dict[int, set[int]] = {}
    for u in sorted(live):
        for h in g.successors[u]:
            if h not in dom[u]:
                continue
            body = loops.setdefault(h, {h})
            work = [u]
            while work:
                x = work.pop()
                if x in body:
                    continue
                body.add(x)
                work.extend(p for p in g.predecessors[x] if p in live)
    return OracleResult(reducible, {h: frozenset(b) for h, b in loops.items()})
