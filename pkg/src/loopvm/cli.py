"""Command line: ``run``, ``analyze`` and ``bench``.

Exit status is 0 on success, 1 on a trap, parse or validation error, and
2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import corpus
from .cfg import build_cfg, export_dot
from .engine import EngineConfig, Engine
from .extract import InternalError, describe_units, extract_loops
from .harness import bench_single_run, format_summary, load_bench_spec, run_bench, samples_to_csv
from .ir import IRSyntaxError, ValidationError, parse_module
from .loopfind import Loops, analyze, describe_outcome
from .semantics import Trap


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    try:
        return corpus.path(path)
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loopvm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a module's entry function")
    run.add_argument("file")
    run.add_argument("args", nargs="*", type=int, help="integer arguments for the entry function")
    run.add_argument("--osr", choices=("on", "off"), default="on")
    run.add_argument("--osr-threshold", type=_positive, default=EngineConfig.osr_threshold)
    run.add_argument("--func-threshold", type=_positive, default=EngineConfig.func_threshold)
    run.add_argument("--no-extract", action="store_true", help="skip loop extraction entirely")
    run.add_argument("--trace", action="store_true", help="write the event trace to stderr")
    run.add_argument("--report", action="store_true", help="write return value and promotions to stderr")

    an = sub.add_parser("analyze", help="print CFG, loops and dispatch units")
    an.add_argument("file")
    an.add_argument("--dump-cfg", action="store_true")
    an.add_argument("--dump-loops", action="store_true")
    an.add_argument("--dump-units", action="store_true")

    bench = sub.add_parser("bench", help="warm-up benchmark from a spec file; CSV to stdout")
    bench.add_argument("spec")
    bench.add_argument("--csv", help="write CSV here instead of stdout")
    bench.add_argument("--subprocess", action="store_true", help="one CLI process per run")
    bench.add_argument("--parallel-runs", action="store_true")
    bench.add_argument("--single-run", nargs=2, metavar=("CONFIG", "RUN"), help=argparse.SUPPRESS)
    return ap


def _cmd_run(ns) -> int:
    module = parse_module(_resolve(ns.file).read_text(encoding="utf-8"))
    cfg = EngineConfig(osr_enabled=ns.osr == "on", osr_threshold=ns.osr_threshold,
                       func_threshold=ns.func_threshold, trace=ns.trace, extract=not ns.no_extract)
    engine = Engine(module, cfg)
    arity = len(module.entry.params)
    if len(ns.args) != arity:
        print(f"error: {module.entry_function} expects {arity} argument(s), got {len(ns.args)}", file=sys.stderr)
        return 2
    try:
        value, output, report = engine.run(ns.args)
    except Trap as trap:
        sys.stdout.write(trap.output)
        if ns.trace:
            sys.stderr.write("".join(f"{line}\n" for line in engine.trace_lines))
        raise
    sys.stdout.write(output)
    if ns.trace:
        sys.stderr.write("".join(f"{line}\n" for line in report.trace))
    if ns.report:
        print(f"return {value}", file=sys.stderr)
        for e in report.events:
            print(f"promote {e.kind} {e.unit} in {e.function} at {e.at}", file=sys.stderr)
    return 0


def analyze_text(text: str, dump_cfg: bool = False, dump_loops: bool = True, dump_units: bool = False) -> str:
    module = parse_module(text)
    lines = []
    for f in module.functions.values():
        g = build_cfg(f)
        outcome = analyze(g)
        lines.append(f"fn {f.name}")
        if dump_cfg:
            forest = outcome.forest if isinstance(outcome, Loops) else None
            lines.extend(export_dot(g, forest, f.name).splitlines())
        if dump_loops:
            lines.extend(describe_outcome(outcome))
        if dump_units:
            lines.extend(describe_units(extract_loops(f, outcome, g)))
    return "\n".join(lines) + "\n"


def _cmd_analyze(ns) -> int:
    text = _resolve(ns.file).read_text(encoding="utf-8")
    dump_loops = ns.dump_loops or not (ns.dump_cfg or ns.dump_units)
    sys.stdout.write(analyze_text(text, ns.dump_cfg, dump_loops, ns.dump_units))
    return 0


def _cmd_bench(ns) -> int:
    spec_path = _resolve(ns.spec)
    spec = load_bench_spec(spec_path)
    if ns.single_run:
        name, run = ns.single_run[0], int(ns.single_run[1])
        module = parse_module(spec.program.read_text(encoding="utf-8"))
        sys.stdout.write(samples_to_csv(bench_single_run(module, spec, name, run)))
        return 0
    result = run_bench(spec, spec_path=spec_path, isolate=ns.subprocess, parallel_runs=ns.parallel_runs)
    text = result.to_csv()
    summary = format_summary(result.summaries(), spec.warmup_window) if result.samples else ""
    if ns.csv:
        Path(ns.csv).write_text(text, encoding="utf-8")
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        sys.stderr.write(summary)
    for name, msg in result.failures.items():
        print(f"error: config {name} failed: {msg}", file=sys.stderr)
    return 1 if result.failures else 0


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "analyze": _cmd_analyze, "bench": _cmd_bench}[ns.command]
    try:
        return handler(ns)
    except (IRSyntaxError, ValidationError, Trap, InternalError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
