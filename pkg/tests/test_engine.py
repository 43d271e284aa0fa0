import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from loopvm import corpus
from loopvm.engine import (CONTINUE, MAX_CALL_DEPTH, Engine, EngineConfig, ExitTo, resolve_successor,
                           run_module)
from loopvm.extract import BlockUnit, ExecutableFunction, InternalError, LoopUnit
from loopvm.ir import BasicBlock, Branch, Function, Jump, Module, parse_module
from loopvm.semantics import Trap
from loopvm.testing import random_program

OFF = EngineConfig(osr_enabled=False)
NO_EXTRACT = EngineConfig(osr_enabled=False, extract=False)


def _observable(m, args, cfg):
    try:
        r = run_module(m, args, cfg)
        return ("ok", r.value, r.output)
    except Trap as t:
        return ("trap", t.kind, t.output)


def test_fig1_million_iterations_promotes_once(fig1):
    on = run_module(fig1, [10**6])
    off = run_module(fig1, [10**6], OFF)
    (promo,) = on.report.loop_promotions()
    assert (promo.function, promo.unit, promo.at) == ("main", 0, 1000)
    assert (on.value, on.output) == (off.value, off.output) == (0, "1499998500000\n")
    assert off.report.loop_promotions() == []


def test_program_without_loops():
    r = run_module(corpus.load("loopless.ir"), [4])
    assert (r.value, r.output) == (32, "32\n")
    assert r.report.events == []


def test_single_ret_block():
    r = run_module(parse_module("fn main() { b0: r0 = const 42; ret r0 }"))
    assert r.value == 42 and r.report.instructions == 2


def test_osr_on_and_off_agree_on_corpus(corpus_name):
    m = corpus.load(corpus_name)
    args = [37, 5][:len(m.entry.params)]
    assert _observable(m, args, EngineConfig()) == _observable(m, args, OFF) == \
        _observable(m, args, NO_EXTRACT)


def _main_trace(trace):
    """Trace lines of main only, dropping nested call activity."""
    out, depth = [], 0
    for line in trace:
        if line.startswith("enter fn"):
            depth += 1
        elif line.startswith("exit fn"):
            depth -= 1
        elif depth == 1:
            out.append(line)
    return out


def test_fig1_dispatch_order(fig1):
    r = run_module(fig1, [2], EngineConfig(trace=True))
    assert _main_trace(r.report.trace) == [
        "block 0", "block 1", "loop 0 iter 1", "block 1", "loop 0 iter 2", "block 2"]


def _shuffle_blocks(f: Function, rng: random.Random) -> Function:
    """Same CFG with non-entry blocks renumbered."""
    perm = list(range(1, len(f.blocks)))
    rng.shuffle(perm)
    new_index = {0: 0, **{old: new for new, old in enumerate(perm, 1)}}

    def remap(term):
        if isinstance(term, Jump):
            return Jump(new_index[term.target])
        if isinstance(term, Branch):
            return Branch(term.cond, new_index[term.true_target], new_index[term.false_target])
        return term

    blocks = sorted((BasicBlock(new_index[b.index], b.body, remap(b.terminator), b.label) for b in f.blocks),
                    key=lambda b: b.index)
    return Function(f.name, f.params, tuple(blocks), f.num_registers)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_shuffled_block_order_same_behaviour(seed):
    rng = random.Random(seed)
    m = random_program(rng)
    shuffled = Module({n: _shuffle_blocks(f, rng) for n, f in m.functions.items()}, m.entry_function)
    args = [rng.randint(-3, 9), rng.randint(-3, 9)]
    cfg = EngineConfig(osr_threshold=3, func_threshold=2)
    assert _observable(shuffled, args, cfg) == _observable(m, args, cfg)


@pytest.mark.parametrize("n, mid", [(1000, False), (1001, True)])
def test_threshold_boundary(n, mid):
    r = run_module(corpus.load("hotloop.ir"), [n])
    (promo,) = r.report.loop_promotions()
    assert promo.at == 1000 and promo.mid_activation is mid
    assert r.report.loop_iterations[("main", 0)] == 1000
    assert (r.value, r.output) == (run_module(corpus.load("hotloop.ir"), [n], OFF)[:2])


def test_below_threshold_never_promoted():
    r = run_module(corpus.load("hotloop.ir"), [999])
    assert r.report.events == []


def _fig1_at_loop(n):
    engine = Engine(corpus.load("fig1.ir"))
    ef = engine.functions["main"]
    frame = [0] * ef.frame_size
    frame[0] = n
    assert engine.execute_block(ef.units[0], frame) == 1
    return engine, ef.units[1], frame


def test_execute_loop_unit_five_iterations_exits_to_2():
    engine, u, frame = _fig1_at_loop(5)
    assert engine.execute_loop_unit(u, frame) == 2
    assert u.tier.iterations == 5 and not u.tier.compiled
    assert frame[-1] == 2


def test_execute_repeating_continue_and_exit():
    engine, u, frame = _fig1_at_loop(2)
    assert engine.execute_repeating(u, frame) is CONTINUE
    assert engine.execute_repeating(u, frame) == ExitTo(2)


def _ret_in_loop():
    """Hand-built loop unit whose member block returns from the function.

    Regular extraction never puts a ret block inside a loop, so the unit
    is assembled directly.
    """
    src = """
    fn main(r0) {
    entry: r1 = const 0; r2 = const 1; r3 = const 3; jump head
    head:  r1 = add r1, r2; print r1; r4 = cmp_le r3, r1; branch r4, out, latch
    out:   r5 = mul r1, r0; ret r5
    latch: jump head
    }"""
    m = parse_module(src)
    f = m.entry
    blocks = [BlockUnit.of(b) for b in f.blocks]
    loop = LoopUnit("main", 0, 1, {1: blocks[1], 2: blocks[2], 3: blocks[3]}, (-1,))
    units = (blocks[0], loop, blocks[2], blocks[3])
    ef = ExecutableFunction("main", f.params, units, f.num_registers, f.num_registers, f)
    return m, ef


@pytest.mark.parametrize("cfg", [OFF, EngineConfig(osr_threshold=1), EngineConfig(osr_threshold=2)])
def test_loop_with_ret_member_returns_sentinel(cfg):
    m, ef = _ret_in_loop()
    engine = Engine(m, cfg)
    frame = [0] * ef.frame_size
    frame[0] = 7
    assert engine.dispatch_function(ef, frame) == 21
    assert frame[-1] == -1
    assert "".join(engine._out) == "1\n2\n3\n"
    plain = run_module(m, [7], NO_EXTRACT)
    assert (plain.value, plain.output) == (21, "1\n2\n3\n")


def test_nested_loop_runs_inside_one_outer_step():
    r = run_module(corpus.load("nest3.ir"), [2], EngineConfig(trace=True))
    trace = r.report.trace
    # inner loop 1 runs all n+1 of its iterations inside each outer step that enters it
    per_step, count = [], 0
    for line in trace:
        if line.startswith("loop 1 iter"):
            count += 1
        elif line.startswith("loop 2 iter"):
            per_step.append(count)
            count = 0
    assert per_step == [3, 3, 0]
    assert r.report.loop_iterations == {("main", 0): 12, ("main", 1): 6, ("main", 2): 3}
    assert (r.value, r.output) == run_module(corpus.load("nest3.ir"), [2], NO_EXTRACT)[:2]


def _unit(exits):
    return LoopUnit("f", 0, 1, {}, tuple(exits))


def test_resolve_successor_examples():
    assert resolve_successor(_unit([2]), [0, 2]) == 2
    assert resolve_successor(_unit([-1, 7]), [0, -1]) == -1
    with pytest.raises(InternalError):
        resolve_successor(_unit([2, 5]), [0, 9])


def test_resolve_returns_the_constant_not_the_slot():
    class Slot(int):
        pass
    got = resolve_successor(_unit([2, 5]), [Slot(5)])
    assert got == 5 and type(got) is int


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_forced_tiers_agree(seed):
    rng = random.Random(seed)
    m = random_program(rng)
    args = [rng.randint(-3, 9), rng.randint(-3, 9)]
    compiled = EngineConfig(osr_threshold=1, func_threshold=1)
    interpreted = EngineConfig(osr_enabled=False, func_threshold=10**9)
    assert _observable(m, args, compiled) == _observable(m, args, interpreted)


def test_function_promotion_compiles_whole_function(fig1):
    r = run_module(fig1, [30], EngineConfig(func_threshold=1, osr_enabled=False))
    assert {(e.kind, e.unit) for e in r.report.events} == {("fn", "main"), ("fn", "processRequest")}
    assert r.report.compiled_functions == {"main", "processRequest"}
    assert r.report.loop_iterations[("main", 0)] == 0


@pytest.mark.slow
def test_compiled_loop_at_least_twice_as_fast():
    m = corpus.load("hotloop.ir")
    n = 10**6

    def per_iteration(cfg):
        best = float("inf")
        for _ in range(2):
            t0 = time.perf_counter_ns()
            run_module(m, [n], cfg)
            best = min(best, (time.perf_counter_ns() - t0) / n)
        return best

    compiled = per_iteration(EngineConfig(osr_threshold=1))
    interpreted = per_iteration(OFF)
    assert interpreted >= 2 * compiled, (interpreted, compiled)


def test_promotion_snapshot_matches_interpreted_frame():
    m = corpus.load("hotloop.ir")
    seen = {}

    def hook(u, n, frame):
        if n == 1000:
            seen["frame"] = tuple(frame)

    Engine(m, OFF, iteration_hook=hook).run([5000])
    on = run_module(m, [5000])
    (promo,) = on.report.loop_promotions()
    assert promo.mid_activation
    assert promo.frame == seen["frame"]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5000), st.integers(2, 50))
def test_osr_off_once_called_main_is_never_promoted(n, func_threshold):
    r = run_module(corpus.load("hotloop.ir"), [n], EngineConfig(osr_enabled=False, func_threshold=func_threshold))
    assert r.report.events == []
    assert r.report.compiled_loops == set() and r.report.compiled_functions == set()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_counter_and_tier_monotonicity(seed):
    rng = random.Random(seed)
    m = random_program(rng, traps=0.0)
    engine = Engine(m, EngineConfig(osr_threshold=4, func_threshold=3, trace=True))
    before = engine.report()
    for _ in range(3):
        engine.run([rng.randint(0, 6), rng.randint(0, 6)])
        after = engine.report()
        assert before.compiled_loops <= after.compiled_loops
        assert before.compiled_functions <= after.compiled_functions
        assert before.instructions <= after.instructions
        for k, v in before.loop_iterations.items():
            assert v <= after.loop_iterations[k]
        before = after
    last: dict[tuple[str, str], int] = {}
    promoted = set()
    calls: list[str] = []
    for line in engine.trace_lines:
        parts = line.split()
        if parts[:2] == ["enter", "fn"]:
            calls.append(parts[2])
        elif parts[:2] == ["exit", "fn"]:
            calls.pop()
        elif parts[0] == "loop":
            key = (calls[-1], parts[1])
            assert int(parts[3]) > last.get(key, 0)
            last[key] = int(parts[3])
        elif parts[0] == "promote":
            key = (parts[1], calls[-1] if parts[1] == "loop" else parts[2])
            assert key + (parts[2],) not in promoted
            promoted.add(key + (parts[2],))


# -- traps --------------------------------------------------------------------

def test_divide_by_zero_traps_with_partial_output():
    m = parse_module("fn main(r0) { b0: print r0; r1 = const 0; r2 = div r0, r1; ret r2 }")
    for cfg in (EngineConfig(), EngineConfig(func_threshold=1)):
        with pytest.raises(Trap) as exc:
            run_module(m, [5], cfg)
        assert exc.value.kind == "divide-by-zero"
        assert exc.value.output == "5\n"


RECURSE = """
fn main(r0) { b0: r1 = call rec(r0); ret r1 }
fn rec(r0) {
entry: r1 = const 1; r2 = cmp_le r0, r1; branch r2, base, step
base:  ret r0
step:  r3 = sub r0, r1; r4 = call rec(r3); r5 = add r4, r1; ret r5
}
"""


@pytest.mark.parametrize("cfg", [EngineConfig(), EngineConfig(func_threshold=1)])
def test_call_depth_limit(cfg):
    m = parse_module(RECURSE)
    assert run_module(m, [MAX_CALL_DEPTH - 1], cfg).value == MAX_CALL_DEPTH - 1
    with pytest.raises(Trap) as exc:
        run_module(m, [MAX_CALL_DEPTH], cfg)
    assert exc.value.kind == "call-depth"


@pytest.mark.parametrize("cfg", [OFF, EngineConfig(func_threshold=1)])
def test_non_boolean_branch_condition_traps(cfg):
    m = parse_module("fn main(r0) { a: branch r0, b, b\n b: ret r0 }")
    assert run_module(m, [1], cfg).value == 1
    with pytest.raises(Trap) as exc:
        run_module(m, [2], cfg)
    assert exc.value.kind == "bad-condition"


def test_arguments_checked():
    m = corpus.load("hotloop.ir")
    with pytest.raises(ValueError):
        Engine(m).run([])
    with pytest.raises(ValueError):
        Engine(m).run([2**63])


def test_thresholds_must_be_positive():
    with pytest.raises(ValueError):
        EngineConfig(osr_threshold=0)
