"""Random CFG and random program generators for property and differential tests."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cfg import Cfg, build_cfg
from .ir import BasicBlock, Branch, Const, Function, Jump, Module, Ret, parse_module


def random_cfg_function(rng: random.Random, num_blocks: int, branch_density: float = 0.5,
                        back_prob: float = 0.15, name: str = "f") -> Function:
    """A function of ``num_blocks`` random blocks plus a ret-terminated sink.

    Each block jumps or branches (probability ``branch_density``); targets
    are either short forward hops or, with ``back_prob``, any non-entry
    block.  Targets that run past the last block go to the sink, and block 0
    is never targeted.
    """
    n = num_blocks
    sink = n

    def target(b: int) -> int:
        if rng.random() < back_prob:
            return rng.randint(1, n)
        t = b + rng.randint(1, 3)
        return t if t < n else sink

    blocks = []
    for b in range(n):
        if rng.random() < branch_density:
            term = Branch(0, target(b), target(b))
        else:
            term = Jump(target(b))
        blocks.append(BasicBlock(b, (), term))
    blocks.append(BasicBlock(sink, (Const(0, 0),), Ret(0)))
    return Function(name, (), tuple(blocks), 1)


def random_cfg(rng: random.Random, max_blocks: int = 30) -> Cfg:
    """Random CFG with at most ``max_blocks`` blocks (sink included)."""
    n = rng.randint(1, max_blocks - 1)
    density = rng.choice((0.2, 0.4, 0.6, 0.8, 1.0))
    back = rng.choice((0.0, 0.05, 0.15, 0.3, 0.5))
    return build_cfg(random_cfg_function(rng, n, density, back))


# -- structured random programs ----------------------------------------------

@dataclass
class _Loop:
    latch: str
    exit: str


@dataclass
class _Fn:
    name: str
    nparams: int
    blocks: list[list] = field(default_factory=list)   # [label, [instrs], terminator]
    nreg: int = 0

    def reg(self) -> int:
        self.nreg += 1
        return self.nreg - 1


class _ProgramGen:
    ARITH = ("add", "sub", "mul")
    CMP = ("cmp_lt", "cmp_le", "cmp_eq", "cmp_ne")

    def __init__(self, rng: random.Random, *, max_depth: int, irreducible: float, traps: float):
        self.rng = rng
        self.max_depth = max_depth
        self.irreducible = irreducible
        self.traps = traps
        self.labels = 0

    def label(self, hint: str) -> str:
        self.labels += 1
        return f"{hint}{self.labels}"

    # block plumbing
    def start(self, fn: _Fn, label: str):
        fn.blocks.append([label, [], None])

    def emit(self, fn: _Fn, text: str):
        fn.blocks[-1][1].append(text)

    def end(self, fn: _Fn, term: str):
        assert fn.blocks[-1][2] is None
        fn.blocks[-1][2] = term

    def const(self, fn: _Fn, value: int) -> int:
        r = fn.reg()
        self.emit(fn, f"r{r} = const {value}")
        return r

    def pick(self, pool: list[int]) -> int:
        return self.rng.choice(pool)

    def cond(self, fn: _Fn, pool: list[int]) -> int:
        r = fn.reg()
        self.emit(fn, f"r{r} = {self.rng.choice(self.CMP)} r{self.pick(pool)}, r{self.pick(pool)}")
        return r

    # statements
    def stmts(self, fn: _Fn, pool: list[int], loops: list[_Loop], depth: int, callees: list[str]):
        for _ in range(self.rng.randint(1, 4)):
            self.stmt(fn, pool, loops, depth, callees)

    def stmt(self, fn: _Fn, pool: list[int], loops: list[_Loop], depth: int, callees: list[str]):
        rng = self.rng
        kinds = ["arith", "arith", "print", "if"]
        if depth < self.max_depth:
            kinds += ["loop", "loop", "dowhile"]
        if loops:
            kinds += ["break", "continue"]
        kinds.append("return")
        if callees:
            kinds.append("call")
        if rng.random() < self.traps:
            kinds.append("div")
        kind = rng.choice(kinds)

        if kind == "arith":
            r = fn.reg()
            self.emit(fn, f"r{r} = {rng.choice(self.ARITH)} r{self.pick(pool)}, r{self.pick(pool)}")
            pool.append(r)
        elif kind == "div":
            r = fn.reg()
            op = rng.choice(("div", "mod"))
            self.emit(fn, f"r{r} = {op} r{self.pick(pool)}, r{self.pick(pool)}")
            pool.append(r)
        elif kind == "print":
            self.emit(fn, f"print r{self.pick(pool)}")
        elif kind == "call":
            r = fn.reg()
            self.emit(fn, f"r{r} = call {rng.choice(callees)}(r{self.pick(pool)})")
            pool.append(r)
        elif kind == "if":
            c = self.cond(fn, pool)
            then, other, join = self.label("then"), self.label("else"), self.label("join")
            self.end(fn, f"branch r{c}, {then}, {other}")
            self.start(fn, then)
            self.stmts(fn, list(pool), loops, depth + 1, callees)
            self.end(fn, f"jump {join}")
            self.start(fn, other)
            if rng.random() < 0.5:
                self.stmts(fn, list(pool), loops, depth + 1, callees)
            self.end(fn, f"jump {join}")
            self.start(fn, join)
        elif kind in ("loop", "dowhile"):
            self.loop(fn, pool, loops, depth, callees, kind == "dowhile")
        elif kind in ("break", "continue"):
            target = rng.choice(loops)
            c = self.cond(fn, pool)
            rest = self.label("cont")
            dest = target.exit if kind == "break" else target.latch
            self.end(fn, f"branch r{c}, {dest}, {rest}")
            self.start(fn, rest)
        elif kind == "return":
            c = self.cond(fn, pool)
            out, rest = self.label("ret"), self.label("cont")
            self.end(fn, f"branch r{c}, {out}, {rest}")
            self.start(fn, out)
            self.end(fn, f"ret r{self.pick(pool)}")
            self.start(fn, rest)

    def loop(self, fn: _Fn, pool, loops, depth, callees, dowhile: bool):
        rng = self.rng
        counter, bound, one = fn.reg(), fn.reg(), fn.reg()
        head, body, latch, exit_ = (self.label(x) for x in ("head", "body", "latch", "exit"))
        pre = self.label("pre")
        self.emit(fn, f"r{one} = const 1")
        if rng.random() < self.irreducible:
            # second entry straight into the latch, bypassing the loop header
            c = self.cond(fn, pool)
            self.end(fn, f"branch r{c}, {latch}, {pre}")
        else:
            self.end(fn, f"jump {pre}")
        self.start(fn, pre)
        self.emit(fn, f"r{counter} = const 0")
        self.emit(fn, f"r{bound} = const {rng.randint(0, 6)}")
        inner = loops + [_Loop(latch, exit_)]
        if dowhile:
            self.end(fn, f"jump {body}")
            self.start(fn, body)
            self.stmts(fn, list(pool) + [counter], inner, depth + 1, callees)
            self.end(fn, f"jump {latch}")
            self.start(fn, latch)
            self.emit(fn, f"r{counter} = add r{counter}, r{one}")
            t = fn.reg()
            self.emit(fn, f"r{t} = cmp_lt r{counter}, r{bound}")
            self.end(fn, f"branch r{t}, {body}, {exit_}")
        else:
            self.end(fn, f"jump {head}")
            self.start(fn, head)
            t = fn.reg()
            self.emit(fn, f"r{t} = cmp_lt r{counter}, r{bound}")
            self.end(fn, f"branch r{t}, {body}, {exit_}")
            self.start(fn, body)
            self.stmts(fn, list(pool) + [counter], inner, depth + 1, callees)
            self.end(fn, f"jump {latch}")
            self.start(fn, latch)
            self.emit(fn, f"r{counter} = add r{counter}, r{one}")
            self.end(fn, f"jump {head}")
        self.start(fn, exit_)
        if rng.random() < 0.5:
            self.emit(fn, f"print r{counter}")

    def function(self, name: str, nparams: int, callees: list[str]) -> _Fn:
        fn = _Fn(name, nparams, nreg=nparams)
        self.start(fn, "entry")
        pool = list(range(nparams))
        for _ in range(2):
            pool.append(self.const(fn, self.rng.randint(-5, 9)))
        self.stmts(fn, pool, [], 0, callees)
        self.emit(fn, f"print r{self.pick(pool)}")
        self.end(fn, f"ret r{self.pick(pool)}")
        return fn

    @staticmethod
    def render(fn: _Fn) -> str:
        params = ", ".join(f"r{i}" for i in range(fn.nparams))
        lines = [f"fn {fn.name}({params}) {{"]
        for label, body, term in fn.blocks:
            lines.append(f"{label}:")
            lines += [f"  {s}" for s in body]
            lines.append(f"  {term}")
        lines.append("}")
        return "\n".join(lines)


def random_program_text(rng: random.Random, *, max_depth: int = 3, irreducible: float = 0.05,
                        traps: float = 0.1, helpers: int = 2) -> str:
    """IR text of a terminating random program with nested and multi-exit loops.

    Every loop is counter-bounded and every path back to a loop header goes
    through the loop's latch increment, so programs always terminate.  The
    entry function ``main`` takes two integer arguments and may call the
    helper functions, which are loop-bearing leaf functions.
    """
    gen = _ProgramGen(rng, max_depth=max_depth, irreducible=irreducible, traps=traps)
    names = [f"h{i}" for i in range(helpers)]
    fns = [gen.function(n, 1, []) for n in names]
    fns.insert(0, gen.function("main", 2, names))
    return "\n\n".join(gen.render(f) for f in fns) + "\n"


def random_program(rng: random.Random, **kw) -> Module:
    return parse_module(random_program_text(rng, **kw))
