"""Topology change of the reachable set of the "mustache" inclusion.

    x1' = x1 (1 - |x1|) - x1 x2,   x2' = x1^4 - 1/2,   plus a disturbance in B_0.2(0)

Starting from the origin, the reachable set first grows as one connected
blob and later separates into pieces.  The boundary scheme counts the
chain components of its boundary layer after every step.

By default this runs a coarse version (h = 0.05, about a minute).  Pass
--fine for h = 0.025 with the registry's Lipschitz constant (several minutes).
"""

import sys
import warnings

from inclusion_reach.config import builtin
from inclusion_reach.scheme import run

cfg = builtin("mustache")
if "--fine" not in sys.argv:
    # the step-size gate h <= 1/(4L) allows at most L = 5 at h = 0.05
    cfg = cfg.replace(h=0.05, T=6.0, L=5.0)

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    params = cfg.params()
print(f"h={cfg.h} rho={cfg.spacing:g} L={cfg.L} steps={params.n_steps}")


def show(index, t, state):
    if index % 10 == 0:
        print(f"  step {index:4d}  t={t:6.3f}  |boundary|={len(state.boundary)}", flush=True)


rep = run("boundary", cfg.rhs(), cfg.initial_set(), params, emit=show, keep_states=False)
changes = [(a, b) for a, b in zip(rep.steps, rep.steps[1:]) if a.components != b.components]
for a, b in changes[:12]:
    print(f"components {a.components} -> {b.components} between t={a.t:.3f} and t={b.t:.3f}")
if not changes:
    print(f"boundary stays one chain component up to t={rep.steps[-1].t:.3f}")
