"""Where the boundary scheme's guarantees stop.

1. The step-size gate: h must not exceed h* = 1/(4L).
2. Disconnected initial sets: strict mode refuses them.  Without the check,
   two nearby point seeds make the final boundary scheme disagree with the
   full scheme, while the preliminary variant (full images of boundary cells)
   still agrees.
"""

import warnings

from inclusion_reach.analysis import compare_runs
from inclusion_reach.config import builtin
from inclusion_reach.scheme import ConnectivityError, ParameterError, run, validate

try:
    validate(1.0, 0.3, 0.04)
except ParameterError as exc:
    print(f"gate: {exc}")


def runs(cfg, variant):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = cfg.params()
        full = run("full", cfg.rhs(), cfg.initial_set(), params, strict=cfg.strict_connectivity, workers=1)
        other = run(variant, cfg.rhs(), cfg.initial_set(), params, strict=cfg.strict_connectivity, workers=1)
    return compare_runs(full.states, other.states)


try:
    runs(builtin("twopoints"), "boundary")
except ConnectivityError as exc:
    print(f"strict mode: {exc}")

for name in ("twopoints", "twopoints_close"):
    cfg = builtin(name).replace(strict_connectivity=False)
    for variant in ("preliminary", "boundary"):
        rep = runs(cfg, variant)
        if rep.all_equal:
            print(f"{name:16s} {variant:12s} equal to the full scheme at every step")
        else:
            s = rep.steps[rep.first_mismatch]
            print(
                f"{name:16s} {variant:12s} mismatch at step {s.index}: "
                f"{len(s.boundary_diff)} boundary cells, {len(s.outer_diff)} exterior cells differ"
            )
