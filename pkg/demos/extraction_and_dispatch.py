"""
Loop units and the dispatch loop
================================

Each loop is wrapped into a unit that sits in its header's slot.  One call
to the unit's repeating body runs one iteration; leaving the loop writes the
target into a fixed frame slot, which is mapped back onto a build-time
constant before dispatch continues.
"""

# %%
from loopvm import corpus
from loopvm.cfg import build_cfg
from loopvm.engine import EngineConfig, run_module
from loopvm.extract import describe_units, extract_loops
from loopvm.loopfind import analyze

for name in ("fig1.ir", "nest3.ir", "multiexit.ir"):
    f = corpus.load(name).entry
    g = build_cfg(f)
    print("\n".join(describe_units(extract_loops(f, analyze(g), g))))
    print()

# %% Dispatch order for three iterations of the do-while loop.
r = run_module(corpus.load("fig1.ir"), [3], EngineConfig(trace=True))
depth = 0
for line in r.report.trace:
    if line.startswith("enter"):
        depth += 1
    elif line.startswith("exit"):
        depth -= 1
    elif depth == 1:
        print(line)

# %% The multi-exit loop: every way out lands on its own block.
m = corpus.load("multiexit.ir")
for n, k in [(5, 99), (20, 4), (30, 99), (20, -3)]:
    r = run_module(m, [n, k])
    print(f"n={n:3} k={k:3} -> value {r.value:6}  output {r.output.split()}")
