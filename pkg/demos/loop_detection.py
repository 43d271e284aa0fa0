"""
Finding loops in an unstructured CFG
====================================

A depth-first walk marks blocks visited and active; an edge into an active
block is a backedge and names a loop header.  Loop sets flow back to
predecessors, so every block learns which loops contain it.
"""

# %%
from loopvm import corpus
from loopvm.cfg import Cfg, build_cfg, export_dot
from loopvm.loopfind import analyze, describe_outcome, find_loops
from loopvm.oracle import natural_loops_oracle

# %% The do-while loop: a single block that branches to itself.
fig1 = corpus.load("fig1.ir").functions["main"]
g = build_cfg(fig1)
print("successors:", g.successors)
print("\n".join(describe_outcome(analyze(g))))

# %% A two-level nest.  Block 3 is the outer latch, block 2 a self loop.
nest = Cfg.from_edges(5, [(0, 1), (1, 2), (2, 2), (2, 3), (3, 1), (3, 4)])
outcome = analyze(nest)
print("\n".join(describe_outcome(outcome)))
print(export_dot(nest, outcome.forest, "nest"))

# %% The single DFS pass alone can miss members of an outer loop.
# Block 3 hangs off inner header 2 and is finished before the backedge 4->1
# is seen.  Re-applying the propagation rule to a fixpoint repairs it.
tricky = Cfg.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 2), (2, 4), (4, 1), (4, 5)])
for complete in (False, True):
    found = find_loops(tricky, complete=complete)
    print(f"complete={complete}:", {lp.header: sorted(lp.blocks) for lp in found.loops})
print("dominator oracle:", {h: sorted(b) for h, b in natural_loops_oracle(tricky).loops.items()})

# %% Triple nest from the corpus: inner loops come first in the forest.
forest = analyze(build_cfg(corpus.load("nest3.ir").entry)).forest
print("inside-out headers:", [lp.header for lp in forest.loops], "depth", forest.depth())
