"""Reachable sets of differential inclusions on uniform grids.

The full Euler scheme maps every grid cell of the current set; the boundary
schemes only track the boundary layer and the first exterior layer.
"""

from .analysis import compare_runs, convergence_study, error_vs_exact, exact_linear_reachable, topology_report
from .config import ScenarioConfig, builtin, load_config
from .geometry import Box, ConvexBody, HPolytope
from .grid import BoundaryState, GridSet, extract_layers
from .inclusion import InclusionRHS, estimate_lipschitz, inverse_image_point
from .scheme import SchemeParams, run, validate

__all__ = [
    "Box",
    "BoundaryState",
    "ConvexBody",
    "GridSet",
    "HPolytope",
    "InclusionRHS",
    "ScenarioConfig",
    "SchemeParams",
    "builtin",
    "compare_runs",
    "convergence_study",
    "error_vs_exact",
    "estimate_lipschitz",
    "exact_linear_reachable",
    "extract_layers",
    "inverse_image_point",
    "load_config",
    "run",
    "topology_report",
    "validate",
]
