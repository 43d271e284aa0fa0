"""The compiled tier: dispatch regions lowered to generated Python source.

A region is either a whole function (entry 0, ``ret`` returns the value)
or one loop unit (entry at the header, exits write the successor slot and
return the constant exit index).  Generated code carries no instruction
counting, hotness accounting, or tracing.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Callable

from .extract import RETURN_SENTINEL, BlockUnit, ExecUnit, ExecutableFunction, LoopUnit
from .ir import BinOp, Branch, Call, Const, I64_MAX, I64_MIN, Jump, Move, Print, Ret
from .semantics import Trap, sdiv, smod, wrap

if TYPE_CHECKING:
    from .engine import Engine

_ARITH = {"add": "+", "sub": "-", "mul": "*"}
_CMP = {"cmp_lt": "<", "cmp_le": "<=", "cmp_eq": "==", "cmp_ne": "!="}


class _Region:
    def __init__(self, units: dict[int, ExecUnit], entry: int, slot: int, loop: LoopUnit | None):
        self.units = units
        self.entry = entry
        self.slot = slot
        self.loop = loop
        self.lines: list[str] = []
        self.refs: dict[str, LoopUnit] = {}

    def goto(self, t: int, pad: str) -> list[str]:
        if t in self.units:
            return [f"{pad}b = {t}"]
        if self.loop is None:
            raise AssertionError(f"function region jumps to unknown block {t}")
        return [f"{pad}s[{self.slot}] = {t}", f"{pad}return {t}"]

    def ret(self, src: int, pad: str) -> list[str]:
        if self.loop is None:
            return [f"{pad}return s[{src}]"]
        return [f"{pad}_setret(s[{src}])", f"{pad}s[{self.slot}] = {RETURN_SENTINEL}",
                f"{pad}return {RETURN_SENTINEL}"]

    def block(self, u: BlockUnit, pad: str) -> list[str]:
        out = []
        for ins in u.body:
            if isinstance(ins, Const):
                out.append(f"{pad}s[{ins.dst}] = {ins.value}")
            elif isinstance(ins, Move):
                out.append(f"{pad}s[{ins.dst}] = s[{ins.src}]")
            elif isinstance(ins, BinOp):
                a, b = f"s[{ins.lhs}]", f"s[{ins.rhs}]"
                if ins.op in _ARITH:
                    out.append(f"{pad}v = {a} {_ARITH[ins.op]} {b}")
                    out.append(f"{pad}s[{ins.dst}] = v if {I64_MIN} <= v <= {I64_MAX} else _wrap(v)")
                elif ins.op in _CMP:
                    out.append(f"{pad}s[{ins.dst}] = 1 if {a} {_CMP[ins.op]} {b} else 0")
                elif ins.op == "div":
                    out.append(f"{pad}s[{ins.dst}] = _sdiv({a}, {b})")
                else:
                    out.append(f"{pad}s[{ins.dst}] = _smod({a}, {b})")
            elif isinstance(ins, Call):
                args = ", ".join(f"s[{r}]" for r in ins.args)
                out.append(f"{pad}s[{ins.dst}] = _call({ins.callee!r}, [{args}])")
            elif isinstance(ins, Print):
                out.append(f"{pad}_out(s[{ins.src}])")
        term = u.terminator
        if isinstance(term, Jump):
            out += self.goto(term.target, pad)
        elif isinstance(term, Branch):
            out.append(f"{pad}c = s[{term.cond}]")
            out.append(f"{pad}if c == 1:")
            out += self.goto(term.true_target, pad + "    ")
            out.append(f"{pad}elif c == 0:")
            out += self.goto(term.false_target, pad + "    ")
            out.append(f"{pad}else:")
            out.append(f"{pad}    _badcond(c)")
        elif isinstance(term, Ret):
            out += self.ret(term.src, pad)
        return out

    def inner(self, u: LoopUnit, pad: str) -> list[str]:
        name = f"_L{u.loop_id}"
        self.refs[name] = u
        out = [f"{pad}b = {name}(s)"]
        for t in u.constant_successors:
            if t in self.units:
                continue
            out.append(f"{pad}if b == {t}:")
            if t != RETURN_SENTINEL:
                out += self.goto(t, pad + "    ")
            elif self.loop is None:
                out.append(f"{pad}    return _getret()")
            else:
                out += [f"{pad}    s[{self.slot}] = {t}", f"{pad}    return {t}"]
        return out

    def source(self, fname: str) -> str:
        lines = [f"def {fname}(s):", f"    b = {self.entry}", "    while True:"]
        order = [self.entry] + sorted(i for i in self.units if i != self.entry)
        for k, idx in enumerate(order):
            unit = self.units[idx]
            lines.append(f"        {'if' if k == 0 else 'elif'} b == {idx}:")
            if isinstance(unit, BlockUnit):
                lines += self.block(unit, " " * 12)
            else:
                lines += self.inner(unit, " " * 12)
        lines.append("        else:")
        lines.append("            _badindex(b)")
        return "\n".join(lines) + "\n"


def _link(src: str, fname: str, namespace: dict) -> Callable[[list[int]], int]:
    code = compile(src, f"<compiled {fname}>", "exec")
    exec(code, namespace)
    fn = namespace[fname]
    fn.source = src
    return fn


def _namespace(engine: "Engine") -> dict:
    def badcond(c):
        raise Trap("bad-condition", f"branch condition {c} is not 0/1")

    def badindex(b):
        raise AssertionError(f"compiled dispatch reached unknown index {b}")

    return {
        "_wrap": wrap, "_sdiv": sdiv, "_smod": smod,
        "_call": engine.call, "_out": engine.emit,
        "_setret": engine.set_return, "_getret": engine.get_return,
        "_badcond": badcond, "_badindex": badindex,
    }


def compile_loop(engine: "Engine", u: LoopUnit, slot: int, *, inner_compiled: bool) -> Callable[[list[int]], int]:
    """Compile loop unit *u*; the result runs iterations until the loop exits.

    Inner loop units are called either through their own compiled code
    (``inner_compiled``) or through the engine's tier-aware loop driver, so
    they keep their own hotness counters.
    """
    region = _Region(u.members, u.header, slot, u)
    fname = f"{u.function}_loop{u.loop_id}".replace(".", "_")
    src = region.source(fname)
    ns = _namespace(engine)
    for name, inner in region.refs.items():
        if inner_compiled:
            ns[name] = inner.tier.code
        else:
            ns[name] = (lambda s, _u=inner: engine.execute_loop_unit(_u, s))
    return _link(src, fname, ns)


def compile_function(engine: "Engine", ef: ExecutableFunction) -> Callable[[list[int]], int]:
    """Compile all of *ef*; loop units must already hold compiled code."""
    units = dict(enumerate(ef.units))
    region = _Region(units, 0, ef.successor_slot, None)
    fname = f"fn_{ef.name}".replace(".", "_")
    src = region.source(fname)
    ns = _namespace(engine)
    for name, inner in region.refs.items():
        ns[name] = inner.tier.code
    return _link(src, fname, ns)
