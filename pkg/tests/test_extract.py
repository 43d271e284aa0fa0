import random

import pytest
from hypothesis import given, settings, strategies as st

from loopvm import corpus
from loopvm.cfg import Cfg, build_cfg, reachable_blocks
from loopvm.extract import (BlockUnit, InternalError, LoopUnit, describe_units, extract_loops,
                            iter_loop_units, loop_exit_successors)
from loopvm.ir import parse_module
from loopvm.loopfind import Loop, LoopForest, Loops, analyze
from loopvm.testing import random_program


def _extract(f):
    return extract_loops(f, analyze(build_cfg(f)))


def test_fig1_units(fig1):
    ef = _extract(fig1.functions["main"])
    b0, loop, b2 = ef.units
    assert isinstance(b0, BlockUnit) and b0.index == 0
    assert isinstance(loop, LoopUnit)
    assert (loop.header, list(loop.members), loop.constant_successors) == (1, [1], (2,))
    assert isinstance(b2, BlockUnit) and b2.index == 2
    assert ef.successor_slot == ef.num_registers == ef.frame_size - 1


def test_loop_free_function_is_plain():
    f = corpus.load("loopless.ir").entry
    ef = _extract(f)
    assert all(isinstance(u, BlockUnit) for u in ef.units)
    assert [(u.body, u.terminator) for u in ef.units] == [(b.body, b.terminator) for b in f.blocks]


def test_bailout_gives_plain_units():
    f = corpus.load("irreducible.ir").entry
    ef = _extract(f)
    assert all(isinstance(u, BlockUnit) for u in ef.units)
    assert all(isinstance(u, BlockUnit) for u in extract_loops(f, None).units)


def test_triple_nest_structure():
    ef = _extract(corpus.load("nest3.ir").entry)
    top = [u for u in ef.units if isinstance(u, LoopUnit)]
    assert len(top) == 1 and ef.units[1] is top[0]
    l1 = top[0]
    l2 = l1.members[3]
    l3 = l2.members[5]
    assert isinstance(l2, LoopUnit) and isinstance(l3, LoopUnit)
    assert all(isinstance(m, BlockUnit) for m in l3.members.values())
    assert set(l1.members) == {1, 2, 3, 8}
    assert set(l2.members) == {3, 4, 5, 7}
    assert set(l3.members) == {5, 6}
    assert (l1.constant_successors, l2.constant_successors, l3.constant_successors) == ((9,), (8,), (7,))
    assert [u.header for u in ef.loop_units()] == [5, 3, 1]


def test_exit_successors_fig1(fig1):
    g = build_cfg(fig1.functions["main"])
    assert loop_exit_successors(Loop(0, 1, frozenset({1}), frozenset({1})), g) == (2,)


def test_exit_successors_include_return_sentinel():
    # hand-built loop that contains the ret block 2
    g = Cfg.from_edges(4, [(0, 1), (1, 2), (1, 3), (3, 1)])
    lp = Loop(0, 1, frozenset({1, 2, 3}), frozenset({3}))
    assert loop_exit_successors(lp, g) == (-1,)
    lp2 = Loop(0, 1, frozenset({1, 2}), frozenset())
    assert loop_exit_successors(lp2, g) == (-1, 3)


BREAK_GOTO = """
fn main(r0) {
entry:
  r1 = const 0
  r2 = const 1
  jump head
head:
  r3 = cmp_lt r1, r0
  branch r3, body, join
body:
  r1 = add r1, r2
  r4 = cmp_eq r1, r2
  branch r4, join, more
more:
  r5 = cmp_eq r1, r0
  branch r5, far, head
join:
  print r1
  ret r1
far:
  ret r0
}
"""


def _brute_force_exits(loop: Loop, g: Cfg):
    out = set()
    for u, v in g.edges():
        if u in loop.blocks and v not in loop.blocks:
            out.add(v)
    if any(not g.successors[b] for b in loop.blocks):
        out.add(-1)
    return tuple(sorted(out))


def test_break_and_goto_exits_against_edge_scan():
    f = parse_module(BREAK_GOTO).entry
    g = build_cfg(f)
    (lp,) = analyze(g).forest.loops
    assert loop_exit_successors(lp, g) == _brute_force_exits(lp, g) == (4, 5)


def test_unknown_block_is_internal_error(fig1):
    f = fig1.functions["main"]
    bad = Loop(0, 1, frozenset({1, 7}), frozenset({1}))
    forest = LoopForest((bad,), {0: ()}, (0,), {0: None})
    with pytest.raises(InternalError):
        extract_loops(f, Loops(forest))


def test_ret_block_inside_loop_is_internal_error(fig1):
    f = fig1.functions["main"]
    bad = Loop(0, 1, frozenset({1, 2}), frozenset({1}))
    with pytest.raises(InternalError):
        extract_loops(f, Loops(LoopForest((bad,), {0: ()}, (0,), {0: None})))


def test_describe_units_fig1(fig1):
    assert describe_units(_extract(fig1.functions["main"])) == [
        "fn main slots=8 successor_slot=7",
        "  [0] block 0",
        "  [1] loop 0 header=1 exits=[2]",
        "    block 1",
        "  [2] block 2",
    ]


def _innermost_owner(unit, b):
    """Loop ids on the path from a top-level unit down to the member block b."""
    if isinstance(unit, BlockUnit):
        return [] if unit.index == b else None
    for m in unit.members.values():
        path = _innermost_owner(m, b)
        if path is not None:
            return [unit.loop_id] + path
    return None


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_slot_preservation_partition_and_exits(seed):
    for f in random_program(random.Random(seed)).functions.values():
        g = build_cfg(f)
        outcome = analyze(g)
        ef = extract_loops(f, outcome, g)
        assert len(ef.units) == len(f.blocks)
        headers = {u.header for u in ef.units if isinstance(u, LoopUnit)}
        for i, u in enumerate(ef.units):
            if i not in headers:
                assert isinstance(u, BlockUnit)
                assert (u.index, u.body, u.terminator) == (i, f.blocks[i].body, f.blocks[i].terminator)
        if not isinstance(outcome, Loops):
            assert not headers
            continue
        by_header = {lp.header: lp for lp in outcome.forest.loops}
        in_loop = set().union(*(lp.blocks for lp in outcome.forest.loops))
        for b in reachable_blocks(g):
            owners = [p for top in ef.units if (p := _innermost_owner(top, b)) is not None]
            if b not in in_loop:
                assert owners == [[]]
            else:
                # the slot copy stays a plain block; exactly one chain runs through loop units
                chains = [p for p in owners if p]
                assert len(chains) == 1
                innermost = outcome.forest.by_id(chains[0][-1])
                assert b in innermost.blocks
                assert all(b not in outcome.forest.by_id(c).blocks for c in outcome.forest.children[innermost.id])
        for top in ef.units:
            for u in iter_loop_units(top):
                assert u.constant_successors == loop_exit_successors(by_header[u.header], g)
