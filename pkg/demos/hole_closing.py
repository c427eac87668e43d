"""A square annulus under pure disturbance dynamics x' in B_1(0).

The reachable set at time t is the annulus grown by t in every direction, so
the hole of inradius 1 closes at t = 1.  The boundary scheme tracks only the
boundary layers, yet the void count read off them shows the same event.
"""

import warnings

from inclusion_reach.analysis import topology_report
from inclusion_reach.config import builtin
from inclusion_reach.scheme import run

cfg = builtin("annulus")
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    params = cfg.params()
rep = run("boundary", cfg.rhs(), cfg.initial_set(), params, workers=1)

print("step     t  |boundary|  components  voids")
for rec, state in zip(rep.steps, rep.states):
    topo = topology_report(state)
    print(f"{rec.index:4d}  {rec.t:4.1f}  {rec.boundary_cells:10d}  {topo.boundary_components:10d}  {topo.enclosed_voids:5d}")
