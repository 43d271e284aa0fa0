"""Warm-up benchmark harness.

Each *run* uses a fresh engine (standing in for a fresh process); inside a
run the program executes ``in_process_iterations`` times against the same
engine so tier state carries over, exactly like in-process iterations.
Per-iteration wall time is recorded with a monotonic nanosecond clock.
"""

from __future__ import annotations

import csv
import gc
import io
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .engine import Engine, EngineConfig
from .ir import Module, parse_module
from .semantics import Trap

CSV_HEADER = ("config", "run", "iteration", "nanos")

PRESETS = {
    "osr-on": EngineConfig(osr_enabled=True),
    "osr-off": EngineConfig(osr_enabled=False),
    "no-extract": EngineConfig(osr_enabled=False, extract=False),
}


@dataclass(frozen=True)
class BenchSpec:
    program: Path
    args: tuple[int, ...] = ()
    in_process_iterations: int = 50
    out_of_process_runs: int = 10
    warmup_window: int = 10
    configs: tuple[tuple[str, EngineConfig], ...] = (
        ("osr-on", PRESETS["osr-on"]), ("osr-off", PRESETS["osr-off"]))

    def __post_init__(self):
        if self.in_process_iterations < 1 or self.out_of_process_runs < 1:
            raise ValueError("iterations and runs must be >= 1")
        if not 1 <= self.warmup_window <= self.in_process_iterations:
            raise ValueError("warmup_window must be between 1 and in_process_iterations")
        if not self.configs:
            raise ValueError("at least one engine config is required")

    def config(self, name: str) -> EngineConfig:
        return dict(self.configs)[name]


def parse_bench_spec(text: str, base_dir: Path | None = None) -> BenchSpec:
    """Read the ``key=value`` benchmark spec format.

    Keys: program, args (comma separated), iterations, runs, warmup_window,
    configs (comma separated preset names), and optionally osr_threshold /
    func_threshold, which apply to every config.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        values[key.strip()] = value.strip()
    known = {"program", "args", "iterations", "runs", "warmup_window", "configs",
             "osr_threshold", "func_threshold"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown bench spec keys: {sorted(unknown)}")
    if "program" not in values:
        raise ValueError("bench spec needs a program")
    program = Path(values["program"])
    if base_dir is not None and not program.is_absolute():
        program = base_dir / program
    args = tuple(int(a) for a in values.get("args", "").split(",") if a.strip())
    overrides = {}
    for key in ("osr_threshold", "func_threshold"):
        if key in values:
            overrides[key] = int(values[key])
    configs = []
    for name in (c.strip() for c in values.get("configs", "osr-on,osr-off").split(",")):
        if name not in PRESETS:
            raise ValueError(f"unknown config {name!r}; choose from {sorted(PRESETS)}")
        configs.append((name, replace(PRESETS[name], **overrides)))
    return BenchSpec(program, args,
                     int(values.get("iterations", 50)), int(values.get("runs", 10)),
                     int(values.get("warmup_window", 10)), tuple(configs))


def load_bench_spec(path: str | Path) -> BenchSpec:
    path = Path(path)
    return parse_bench_spec(path.read_text(encoding="utf-8"), path.parent)


@dataclass(frozen=True)
class Sample:
    config: str
    run: int
    iteration: int       # 1-based
    nanos: int


@dataclass(frozen=True)
class ConfigSummary:
    config: str
    iteration_medians: tuple[float, ...]   # index 0 is iteration 1
    steady_median: float
    steady_stderr: float
    steady_count: int


@dataclass
class BenchResult:
    spec: BenchSpec
    samples: list[Sample]
    failures: dict[str, str] = field(default_factory=dict)

    def summaries(self) -> list[ConfigSummary]:
        return summarize(self.samples, self.spec.warmup_window)

    def summary(self, config: str) -> ConfigSummary:
        for s in self.summaries():
            if s.config == config:
                return s
        raise KeyError(config)

    def to_csv(self) -> str:
        return samples_to_csv(self.samples)


def samples_to_csv(samples: list[Sample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in samples:
        w.writerow((s.config, s.run, s.iteration, s.nanos))
    return buf.getvalue()


def read_csv(text: str) -> list[Sample]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"CSV header must be {','.join(CSV_HEADER)}")
    return [Sample(c, int(r), int(i), int(n)) for c, r, i, n in rows[1:]]


def summarize(samples: list[Sample], warmup_window: int) -> list[ConfigSummary]:
    """Median per iteration index over runs, plus steady state.

    Steady state pools the last ``warmup_window`` iterations of every run;
    the standard error is that of the pooled sample mean.
    """
    out = []
    for config in dict.fromkeys(s.config for s in samples):
        mine = [s for s in samples if s.config == config]
        iters = max(s.iteration for s in mine)
        medians = tuple(float(np.median([s.nanos for s in mine if s.iteration == i]))
                        for i in range(1, iters + 1))
        steady = np.array([s.nanos for s in mine if s.iteration > iters - warmup_window], dtype=float)
        stderr = float(steady.std(ddof=1) / np.sqrt(steady.size)) if steady.size > 1 else 0.0
        out.append(ConfigSummary(config, medians, float(np.median(steady)), stderr, int(steady.size)))
    return out


def format_summary(summaries: list[ConfigSummary], warmup_window: int) -> str:
    lines = []
    for s in summaries:
        shown = s.iteration_medians[:warmup_window]
        lines.append(f"{s.config}: warm-up medians (ns) "
                     + " ".join(f"it{i}={m:.1f}" for i, m in enumerate(shown, 1)))
        lines.append(f"{s.config}: steady-state median {s.steady_median:.1f} ns "
                     f"+/- {s.steady_stderr:.1f} (n={s.steady_count})")
    return "\n".join(lines) + "\n"


def bench_single_run(module: Module, spec: BenchSpec, config_name: str, run: int) -> list[Sample]:
    """One fresh engine, ``in_process_iterations`` timed executions."""
    engine = Engine(module, spec.config(config_name))
    samples = []
    gc.collect()
    for it in range(1, spec.in_process_iterations + 1):
        gc.disable()
        try:
            t0 = time.perf_counter_ns()
            engine.run(spec.args)
            t1 = time.perf_counter_ns()
        finally:
            gc.enable()
        samples.append(Sample(config_name, run, it, t1 - t0))
    return samples


def _pool_job(spec: BenchSpec, config_name: str, run: int) -> list[Sample]:
    module = parse_module(spec.program.read_text(encoding="utf-8"))
    return bench_single_run(module, spec, config_name, run)


def _subprocess_run(spec_path: Path, config_name: str, run: int) -> list[Sample]:
    proc = subprocess.run(
        [sys.executable, "-m", "loopvm", "bench", str(spec_path), "--single-run", config_name, str(run)],
        capture_output=True, text=True)
    if proc.returncode != 0:
        raise Trap("subprocess", proc.stderr.strip())
    return read_csv(proc.stdout)


def run_bench(spec: BenchSpec, *, spec_path: Path | None = None, isolate: bool = False,
              parallel_runs: bool = False) -> BenchResult:
    """Run every config x run of *spec*.

    A config whose program traps contributes no samples; the trap message
    is kept in ``failures``.  ``isolate`` shells out to the CLI per run
    (needs ``spec_path``); ``parallel_runs`` runs a config's runs in a
    process pool.
    """
    if isolate and spec_path is None:
        raise ValueError("subprocess isolation needs the spec file path")
    module = parse_module(spec.program.read_text(encoding="utf-8"))
    result = BenchResult(spec, [])
    runs = range(1, spec.out_of_process_runs + 1)
    for name, _ in spec.configs:
        try:
            if isolate:
                per_run = [_subprocess_run(spec_path, name, r) for r in runs]
            elif parallel_runs:
                with ProcessPoolExecutor() as pool:
                    per_run = list(pool.map(_pool_job, [spec] * len(runs), [name] * len(runs), runs))
            else:
                per_run = [bench_single_run(module, spec, name, r) for r in runs]
        except Trap as trap:
            result.failures[name] = str(trap)
            continue
        for samples in per_run:
            result.samples.extend(samples)
    return result
