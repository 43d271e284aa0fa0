"""Minimal unstructured IR: functions as flat arrays of basic blocks.

Registers are function-local, mutable, zero-initialised signed 64-bit
integers named ``r0``, ``r1``, ...  Control flow only happens through block
terminators (``jump``, ``branch``, ``ret``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

I64_MIN = -(1 << 63)
I64_MAX = (1 << 63) - 1

BINOPS = ("add", "sub", "mul", "div", "mod", "cmp_lt", "cmp_le", "cmp_eq", "cmp_ne")


# -- instructions ----------------------------------------------------------

@dataclass(frozen=True)
class Const:
    dst: int
    value: int


@dataclass(frozen=True)
class Move:
    dst: int
    src: int


@dataclass(frozen=True)
class BinOp:
    op: str
    dst: int
    lhs: int
    rhs: int


@dataclass(frozen=True)
class Call:
    dst: int
    callee: str
    args: tuple[int, ...]


@dataclass(frozen=True)
class Print:
    src: int


Instruction = Union[Const, Move, BinOp, Call, Print]


@dataclass(frozen=True)
class Jump:
    target: int


@dataclass(frozen=True)
class Branch:
    cond: int
    true_target: int
    false_target: int


@dataclass(frozen=True)
class Ret:
    src: int


Terminator = Union[Jump, Branch, Ret]


def terminator_targets(term: Terminator) -> tuple[int, ...]:
    """Successor block indices of a terminator, deduplicated, ascending."""
    if isinstance(term, Jump):
        return (term.target,)
    if isinstance(term, Branch):
        return tuple(sorted({term.true_target, term.false_target}))
    return ()


def instruction_registers(ins: Instruction) -> tuple[int, ...]:
    if isinstance(ins, Const):
        return (ins.dst,)
    if isinstance(ins, Move):
        return (ins.dst, ins.src)
    if isinstance(ins, BinOp):
        return (ins.dst, ins.lhs, ins.rhs)
    if isinstance(ins, Call):
        return (ins.dst,) + ins.args
    return (ins.src,)


def terminator_registers(term: Terminator) -> tuple[int, ...]:
    if isinstance(term, Branch):
        return (term.cond,)
    if isinstance(term, Ret):
        return (term.src,)
    return ()


# -- program structure -----------------------------------------------------

@dataclass(frozen=True)
class BasicBlock:
    index: int
    body: tuple[Instruction, ...]
    terminator: Terminator
    label: str = ""


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[int, ...]
    blocks: tuple[BasicBlock, ...]
    num_registers: int

    def __post_init__(self):
        for i, b in enumerate(self.blocks):
            if b.index != i:
                raise ValueError(f"{self.name}: block at position {i} has index {b.index}")

    def label_of(self, index: int) -> str:
        return self.blocks[index].label or f"b{index}"


@dataclass(frozen=True)
class Module:
    functions: dict[str, Function]
    entry_function: str

    @property
    def entry(self) -> Function:
        return self.functions[self.entry_function]


# -- errors ----------------------------------------------------------------

class IRSyntaxError(SyntaxError):
    """Raised for text outside the IR grammar; carries the 1-based line."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class Violation:
    function: str | None
    block: int | None
    message: str

    def __str__(self) -> str:
        loc = self.function or "<module>"
        if self.block is not None:
            loc += f":b{self.block}"
        return f"{loc}: {self.message}"


class ValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


# -- validation ------------------------------------------------------------

def validate_module(m: Module) -> list[Violation]:
    """Check every structural invariant of *m*.

    Returns the list of violations; an empty list means the module is
    well formed.
    """
    out: list[Violation] = []
    if m.entry_function not in m.functions:
        out.append(Violation(None, None, f"entry function {m.entry_function!r} not defined"))
    for name, f in m.functions.items():
        if f.name != name:
            out.append(Violation(name, None, f"function registered under {name!r} is named {f.name!r}"))
        if not f.blocks:
            out.append(Violation(name, None, "function has no blocks"))
            continue
        if len(set(f.params)) != len(f.params):
            out.append(Violation(name, None, "duplicate parameter register"))
        for p in f.params:
            if not 0 <= p < f.num_registers:
                out.append(Violation(name, None, f"unknown register r{p} in parameter list"))
        n = len(f.blocks)
        for b in f.blocks:
            for ins in b.body:
                if not isinstance(ins, (Const, Move, BinOp, Call, Print)):
                    out.append(Violation(name, b.index, f"non-instruction in block body: {ins!r}"))
                    continue
                for r in instruction_registers(ins):
                    if not 0 <= r < f.num_registers:
                        out.append(Violation(name, b.index, f"unknown register r{r}"))
                if isinstance(ins, Const) and not I64_MIN <= ins.value <= I64_MAX:
                    out.append(Violation(name, b.index, f"constant {ins.value} outside i64"))
                if isinstance(ins, BinOp) and ins.op not in BINOPS:
                    out.append(Violation(name, b.index, f"unknown operator {ins.op!r}"))
                if isinstance(ins, Call):
                    callee = m.functions.get(ins.callee)
                    if callee is None:
                        out.append(Violation(name, b.index, f"unresolved call to {ins.callee!r}"))
                    elif len(callee.params) != len(ins.args):
                        out.append(Violation(
                            name, b.index,
                            f"call to {ins.callee!r} passes {len(ins.args)} args, expects {len(callee.params)}"))
            term = b.terminator
            if not isinstance(term, (Jump, Branch, Ret)):
                out.append(Violation(name, b.index, f"block does not end in a terminator: {term!r}"))
                continue
            for r in terminator_registers(term):
                if not 0 <= r < f.num_registers:
                    out.append(Violation(name, b.index, f"unknown register r{r}"))
            for t in terminator_targets(term):
                if not 0 <= t < n:
                    out.append(Violation(name, b.index, f"jump target {t} out of range 0..{n - 1}"))
        if any(0 in terminator_targets(b.terminator) for b in f.blocks):
            out.append(Violation(name, 0, "entry has predecessor"))
    return out


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<int>[-+]?\d+(?![A-Za-z_]))
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*|\d[A-Za-z0-9_.]*)
  | (?P<punct>[(){}:,;=])
  | (?P<bad>.)
""", re.VERBOSE)

_REG = re.compile(r"r(\d+)\Z")
_KEYWORDS = {"fn", "const", "call", "print", "jump", "branch", "ret"} | set(BINOPS)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line = 1
    for mo in _TOKEN.finditer(text):
        kind = mo.lastgroup
        if kind == "nl":
            line += 1
        elif kind in ("ws", "comment"):
            pass
        elif kind == "bad":
            raise IRSyntaxError(line, f"unexpected character {mo.group()!r}")
        else:
            toks.append(_Tok(kind, mo.group(), line))
    toks.append(_Tok("eof", "", line))
    return toks


@dataclass
class _RawBlock:
    label: str
    line: int
    body: list = field(default_factory=list)
    terminator: tuple | None = None


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def error(self, message: str, tok: _Tok | None = None) -> IRSyntaxError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return IRSyntaxError(tok.line, f"{message} (found {found!r})")

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text:
            raise self.error(f"expected {text!r}")
        return self.next()

    def name(self, what: str) -> str:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}")
        return self.next().text

    def reg(self) -> int:
        t = self.tok
        mo = _REG.match(t.text) if t.kind == "name" else None
        if mo is None:
            raise self.error("expected register")
        self.next()
        return int(mo.group(1))

    def is_reg(self, tok: _Tok) -> bool:
        return tok.kind == "name" and _REG.match(tok.text) is not None

    def skip_semis(self):
        while self.tok.text == ";":
            self.next()

    def module(self) -> list[tuple]:
        funcs = []
        while self.tok.kind != "eof":
            funcs.append(self.function())
        if not funcs:
            raise self.error("expected at least one function")
        return funcs

    def function(self) -> tuple:
        line = self.tok.line
        self.expect("fn")
        name = self.name("function name")
        if name in _KEYWORDS or self.is_reg(self.toks[self.pos - 1]):
            raise self.error("invalid function name", self.toks[self.pos - 1])
        self.expect("(")
        params = []
        if self.tok.text != ")":
            params.append(self.reg())
            while self.tok.text == ",":
                self.next()
                params.append(self.reg())
        self.expect(")")
        self.expect("{")
        blocks: list[_RawBlock] = []
        self.skip_semis()
        while self.tok.text != "}":
            blocks.append(self.block())
            self.skip_semis()
        self.expect("}")
        if not blocks:
            raise IRSyntaxError(line, f"function {name!r} has no blocks")
        return name, params, blocks, line

    def label(self) -> str:
        t = self.tok
        if t.kind not in ("name", "int") or (t.kind == "name" and (t.text in _KEYWORDS or self.is_reg(t))):
            raise self.error("expected label")
        self.next()
        return t.text

    def block(self) -> _RawBlock:
        t = self.tok
        label = self.label()
        self.expect(":")
        blk = _RawBlock(label, t.line)
        while True:
            self.skip_semis()
            t = self.tok
            if t.text in ("jump", "branch", "ret"):
                blk.terminator = self.terminator()
                return blk
            if t.text == "print":
                self.next()
                blk.body.append((Print, t.line, self.reg()))
            elif self.is_reg(t):
                blk.body.append(self.assignment())
            elif t.text == "}" or (self.peek().text == ":" and t.kind in ("name", "int")):
                raise self.error(f"block {label!r} has no terminator")
            else:
                raise self.error("expected instruction or terminator")

    def assignment(self) -> tuple:
        line = self.tok.line
        dst = self.reg()
        self.expect("=")
        t = self.tok
        if t.text == "const":
            self.next()
            if self.tok.kind != "int":
                raise self.error("expected integer literal")
            value = int(self.next().text)
            if not I64_MIN <= value <= I64_MAX:
                raise IRSyntaxError(line, f"constant {value} does not fit in 64 bits")
            return (Const, line, dst, value)
        if t.text == "call":
            self.next()
            callee = self.name("function name")
            self.expect("(")
            args = []
            if self.tok.text != ")":
                args.append(self.reg())
                while self.tok.text == ",":
                    self.next()
                    args.append(self.reg())
            self.expect(")")
            return (Call, line, dst, callee, tuple(args))
        if t.text in BINOPS:
            self.next()
            lhs = self.reg()
            self.expect(",")
            rhs = self.reg()
            return (BinOp, line, t.text, dst, lhs, rhs)
        if self.is_reg(t):
            return (Move, line, dst, self.reg())
        raise self.error("expected const, call, operator or register")

    def terminator(self) -> tuple:
        t = self.next()
        if t.text == "jump":
            return (Jump, t.line, (self.label(),))
        if t.text == "branch":
            cond = self.reg()
            self.expect(",")
            a = self.label()
            self.expect(",")
            b = self.label()
            return (Branch, t.line, cond, (a, b))
        return (Ret, t.line, self.reg())


def parse_module(text: str) -> Module:
    """Parse IR source text into a validated :class:`Module`.

    Raises :class:`IRSyntaxError` for text outside the grammar and
    :class:`ValidationError` for well-formed text that breaks an invariant
    (unknown label, unresolved call, entry block used as a jump target, ...).
    """
    raw = _Parser(text).module()
    functions: dict[str, Function] = {}
    problems: list[Violation] = []
    for name, params, blocks, line in raw:
        if name in functions:
            raise IRSyntaxError(line, f"function {name!r} defined twice")
        labels: dict[str, int] = {}
        for i, rb in enumerate(blocks):
            if rb.label in labels:
                raise IRSyntaxError(rb.line, f"label {rb.label!r} defined twice in {name!r}")
            labels[rb.label] = i

        def resolve(lbl: str, bi: int) -> int:
            if lbl not in labels:
                problems.append(Violation(name, bi, f"jump target {lbl!r} out of range (no such label)"))
                return -1
            return labels[lbl]

        built = []
        max_reg = max(params, default=-1)
        for i, rb in enumerate(blocks):
            body = []
            for item in rb.body:
                cls, _line, *fields = item
                ins = cls(*fields)
                max_reg = max(max_reg, *instruction_registers(ins))
                body.append(ins)
            cls, _line, *fields = rb.terminator
            if cls is Jump:
                term = Jump(resolve(fields[0][0], i))
            elif cls is Branch:
                a, b = fields[1]
                term = Branch(fields[0], resolve(a, i), resolve(b, i))
            else:
                term = Ret(fields[0])
            max_reg = max(max_reg, *terminator_registers(term), -1)
            built.append(BasicBlock(i, tuple(body), term, rb.label))
        functions[name] = Function(name, tuple(params), tuple(built), max_reg + 1)
    entry = "main" if "main" in functions else raw[0][0]
    m = Module(functions, entry)
    # unresolved labels were recorded above with their names; skip the index echo
    problems.extend(v for v in validate_module(m) if not v.message.startswith("jump target -1 "))
    if problems:
        raise ValidationError(problems)
    return m


# -- printing --------------------------------------------------------------

def _fmt_instruction(ins: Instruction) -> str:
    if isinstance(ins, Const):
        return f"r{ins.dst} = const {ins.value}"
    if isinstance(ins, Move):
        return f"r{ins.dst} = r{ins.src}"
    if isinstance(ins, BinOp):
        return f"r{ins.dst} = {ins.op} r{ins.lhs}, r{ins.rhs}"
    if isinstance(ins, Call):
        return f"r{ins.dst} = call {ins.callee}({', '.join(f'r{a}' for a in ins.args)})"
    return f"print r{ins.src}"


def _fmt_terminator(f: Function, term: Terminator) -> str:
    if isinstance(term, Jump):
        return f"jump {f.label_of(term.target)}"
    if isinstance(term, Branch):
        return f"branch r{term.cond}, {f.label_of(term.true_target)}, {f.label_of(term.false_target)}"
    return f"ret r{term.src}"


def iter_lines(m: Module) -> Iterator[str]:
    for f in m.functions.values():
        yield f"fn {f.name}({', '.join(f'r{p}' for p in f.params)}) {{"
        for b in f.blocks:
            yield f"{f.label_of(b.index)}:"
            for ins in b.body:
                yield f"  {_fmt_instruction(ins)}"
            yield f"  {_fmt_terminator(f, b.terminator)}"
        yield "}"


def format_module(m: Module) -> str:
    """Pretty-print *m* in the textual grammar accepted by :func:`parse_module`."""
    return "\n".join(iter_lines(m)) + "\n"
