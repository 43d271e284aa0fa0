"""
Irreducible control flow
========================

When a cycle can be entered somewhere other than its header, the loop set
leaks all the way back to the entry block.  The analysis then declines to
build loops and the function runs under plain block dispatch.
"""

# %%
from loopvm import corpus
from loopvm.cfg import build_cfg
from loopvm.engine import EngineConfig, run_module
from loopvm.extract import describe_units, extract_loops
from loopvm.loopfind import analyze, describe_outcome, traverse

m = corpus.load("irreducible.ir")
f = m.entry
g = build_cfg(f)
print("successors:", g.successors)

# %% The entry block ends up holding a loop id.
state, _ = traverse(g)
print("loop sets:", [sorted(s) for s in state.block_loops])
outcome = analyze(g)
print("\n".join(describe_outcome(outcome)))

# %% No loop units, so nothing can be promoted by OSR.
print("\n".join(describe_units(extract_loops(f, outcome, g))))
for osr in (True, False):
    r = run_module(m, [5000], EngineConfig(osr_enabled=osr))
    print(f"osr={osr}: value={r.value} loop promotions={len(r.report.loop_promotions())}")
