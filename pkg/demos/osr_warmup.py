"""
Warm-up with and without on-stack replacement
=============================================

The hot loop lives in ``main``, which is called once per benchmark
iteration.  Without OSR the loop stays interpreted until ``main`` itself
has been called often enough to be compiled.  With OSR the running loop
switches to compiled code after a fixed number of iterations.
"""

# %%
import numpy as np

from loopvm import corpus
from loopvm.engine import EngineConfig, run_module
from loopvm.harness import format_summary, load_bench_spec, run_bench

m = corpus.load("hotloop.ir")
on = run_module(m, [10**6], EngineConfig(osr_threshold=1000))
off = run_module(m, [10**6], EngineConfig(osr_enabled=False))
print("osr on promotions:", [(e.kind, e.unit, e.at, e.mid_activation) for e in on.report.events])
print("osr off promotions:", off.report.events)
print("same answer:", on.value == off.value)

# %% The bundled benchmark spec: 10 fresh engines x 20 in-process iterations.
spec = load_bench_spec(corpus.path("whetstone-like.spec"))
result = run_bench(spec)
print(format_summary(result.summaries(), spec.warmup_window))

# %% Ratio of the per-iteration medians, off over on.
on_med = np.array(result.summary("osr-on").iteration_medians)
off_med = np.array(result.summary("osr-off").iteration_medians)
print(np.round(off_med / on_med, 2))
