"""Errors against the closed-form linear reachable set, convergence studies,
topology counts and the full-vs-boundary comparator."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Box
from .grid import BoundaryState, GridSet, connected_components, extract_layers
from .scheme import FullState, run

__all__ = [
    "UnsupportedScenario",
    "ErrorRecord",
    "StudySlopes",
    "TopologyReport",
    "StepComparison",
    "ComparisonReport",
    "exact_linear_reachable",
    "error_vs_exact",
    "lattice_box_hausdorff",
    "convergence_study",
    "fit_slopes",
    "study_csv",
    "study_json",
    "topology_report",
    "compare_runs",
]

LINEAR_SCENARIOS = ("linear2d",)


class UnsupportedScenario(ValueError):
    pass


def exact_linear_reachable(T: float, dim: int = 2) -> Box:
    """Reachable set of x' in x + B_1(0) from the origin at time T: the cube of radius e^T - 1."""
    if T < 0:
        raise ValueError("T must be >= 0")
    return Box.centered(np.zeros(dim), math.expm1(T))


def _axis_hausdorff(a: int, b: int, rho: float, lo: float, hi: float) -> float:
    """Hausdorff distance between {a*rho, ..., b*rho} and the interval [lo, hi]."""

    def to_lattice(y):
        i = min(max(round(y / rho), a), b)
        return abs(y - i * rho)

    # lattice points to the interval: only the extreme points matter
    d = max(lo - a * rho, b * rho - hi, 0.0)
    # interval to the lattice: its ends, and midpoints between lattice points
    d = max(d, to_lattice(lo), to_lattice(hi))
    first = max(a, math.ceil(lo / rho - 0.5))
    last = min(b - 1, math.floor(hi / rho - 0.5))
    if first <= last:
        d = max(d, rho / 2)
    return d


def lattice_box_hausdorff(ilo, ihi, rho: float, box: Box) -> float:
    """Exact inf-norm Hausdorff distance between a filled lattice box and a box.

    Both sets are products over the axes, so the distance is the largest
    one-dimensional distance.
    """
    return max(_axis_hausdorff(int(a), int(b), rho, float(lo), float(hi)) for a, b, lo, hi in zip(ilo, ihi, box.lo, box.hi))


def _filled_box(cells: GridSet, perimeter: bool):
    if not cells:
        raise ValueError("cannot measure the error of an empty set")
    lo, hi = cells.bbox()
    ext = hi - lo + 1
    if perimeter:
        inner = np.clip(ext - 2, 0, None)
        expected = int(np.prod(ext) - np.prod(inner))
    else:
        expected = int(np.prod(ext))
    if len(cells) != expected:
        kind = "box perimeter" if perimeter else "filled box"
        raise UnsupportedScenario(f"discrete set is not a lattice {kind}; exact error needs the linear scenario")
    return lo, hi


def error_vs_exact(state, T: float, scenario: str = "linear2d") -> float:
    """Hausdorff distance (inf-norm) between a discrete state and the exact reachable box.

    A boundary state stands for the filled lattice box whose perimeter is its
    boundary layer; for the linear scenario that is exactly the full-scheme set.
    """
    if scenario not in LINEAR_SCENARIOS:
        raise UnsupportedScenario(f"no closed-form reachable set for scenario {scenario!r}")
    if isinstance(state, FullState):
        cells, perimeter = state.cells, False
    elif isinstance(state, BoundaryState):
        cells, perimeter = state.boundary, True
    elif isinstance(state, GridSet):
        cells, perimeter = state, False
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    lo, hi = _filled_box(cells, perimeter)
    return lattice_box_hausdorff(lo, hi, cells.spacing, exact_linear_reachable(T, cells.dim))


@dataclass
class ErrorRecord:
    h: float
    rho: float
    T: float
    hausdorff_error: float
    wall_ms_full: float | None
    wall_ms_boundary: float
    cells_touched_full: int | None
    cells_touched_boundary: int

    def __post_init__(self):
        if not self.hausdorff_error >= 0:
            raise ValueError("hausdorff_error must be >= 0")


def _final_only(cfg, variant, workers):
    last = {}

    def keep(index, t, state):
        last["state"] = state

    report = run(
        variant,
        cfg.rhs(),
        cfg.initial_set(),
        cfg.params(),
        strict=cfg.strict_connectivity,
        emit=keep,
        workers=workers,
        keep_states=False,
        count_components=False,
    )
    return report, last["state"]


def convergence_study(h_list, scenario="linear2d", T: float = 1.0, *, include_full: bool = True, workers: int = 1):
    """Run the full and boundary schemes for each h with rho = h^2.

    ``scenario`` is a built-in name or a ScenarioConfig.  Runs are sequential
    so that wall times are comparable.
    """
    from .config import ScenarioConfig, builtin

    base = scenario if isinstance(scenario, ScenarioConfig) else builtin(scenario)
    records = []
    for h in h_list:
        cfg = base.replace(h=float(h), rho=float(h) ** 2, T=T)
        b_report, b_state = _final_only(cfg, "boundary", workers)
        wall_full = touched_full = None
        if include_full:
            f_report, f_state = _final_only(cfg, "full", workers)
            wall_full, touched_full = f_report.total_wall_ms, f_report.total_sources
            err = error_vs_exact(f_state, T, base.name)
        else:
            err = error_vs_exact(b_state, T, base.name)
        records.append(
            ErrorRecord(cfg.h, cfg.spacing, T, err, wall_full, b_report.total_wall_ms, touched_full, b_report.total_sources)
        )
    return records


def _slope(x, y) -> float | None:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2 or np.ptp(np.log(x[ok])) == 0:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


@dataclass
class StudySlopes:
    order_h: float | None  # d log(error) / d log(h)
    rate_full: float | None  # -d log(error) / d log(time), full scheme
    rate_boundary: float | None


def fit_slopes(records) -> StudySlopes:
    errs = [r.hausdorff_error for r in records]
    rate_full = None
    if all(r.wall_ms_full is not None for r in records):
        s = _slope([r.wall_ms_full for r in records], errs)
        rate_full = None if s is None else -s
    s = _slope([r.wall_ms_boundary for r in records], errs)
    return StudySlopes(_slope([r.h for r in records], errs), rate_full, None if s is None else -s)


STUDY_COLUMNS = ("h", "rho", "T", "time full [s]", "time boundary [s]", "numerical error", "sources full", "sources boundary")


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def study_csv(records, slopes: StudySlopes | None = None) -> str:
    """Table with the columns of the classical comparison plus h, rho and the fitted slopes."""
    slopes = slopes or fit_slopes(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STUDY_COLUMNS)
    for r in records:
        w.writerow(
            [
                _fmt(r.h),
                _fmt(r.rho),
                _fmt(r.T),
                _fmt(None if r.wall_ms_full is None else r.wall_ms_full / 1e3),
                _fmt(r.wall_ms_boundary / 1e3),
                _fmt(r.hausdorff_error),
                _fmt(r.cells_touched_full),
                _fmt(r.cells_touched_boundary),
            ]
        )
    w.writerow([f"# order_h={_fmt(slopes.order_h)}", f"rate_full={_fmt(slopes.rate_full)}", f"rate_boundary={_fmt(slopes.rate_boundary)}"])
    return buf.getvalue()


def study_json(records, slopes: StudySlopes | None = None) -> str:
    slopes = slopes or fit_slopes(records)
    return json.dumps({"records": [asdict(r) for r in records], "slopes": asdict(slopes)}, indent=2)


@dataclass(frozen=True)
class TopologyReport:
    boundary_components: int
    enclosed_voids: int | None  # None when not computed (d != 2)


def _layers(state):
    if isinstance(state, BoundaryState):
        return state.boundary, state.outer
    cells = state.cells if isinstance(state, FullState) else state
    lay = extract_layers(cells, 0, 1)
    return lay[0], lay[1]


def _count_voids(b0: GridSet, b1: GridSet) -> int:
    """Complement components of the boundary layer that hold exterior cells but miss the frame."""
    if not b0:
        return 0
    lo, hi = (b0 | b1).bbox()
    lo, hi = lo - 1, hi + 1
    shape = tuple(hi - lo + 1)
    wall = np.zeros(shape, dtype=bool)
    wall[tuple((b0.indices - lo).T)] = True
    # the boundary layer is connected through diagonals, so its complement uses edge neighbours
    labels, n = ndimage.label(~wall)
    if n == 0:
        return 0
    frame = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    outer_labels = np.unique(labels[tuple((b1.indices - lo).T)]) if b1 else np.array([], dtype=int)
    voids = np.setdiff1d(outer_labels, frame)
    return int(np.count_nonzero(voids))


def topology_report(state, count_voids: bool = True) -> TopologyReport:
    """Chain components of the boundary layer and, in the plane, enclosed voids."""
    b0, b1 = _layers(state)
    comps = len(connected_components(b0))
    voids = None
    if count_voids:
        if b0.dim != 2:
            raise UnsupportedScenario("void counting is only supported for d=2")
        voids = _count_voids(b0, b1)
    return TopologyReport(comps, voids)


@dataclass
class StepComparison:
    index: int
    boundary_equal: bool
    outer_equal: bool
    boundary_diff: GridSet = field(repr=False)
    outer_diff: GridSet = field(repr=False)

    @property
    def equal(self) -> bool:
        return self.boundary_equal and self.outer_equal


@dataclass
class ComparisonReport:
    steps: list

    @property
    def all_equal(self) -> bool:
        return all(s.equal for s in self.steps)

    @property
    def first_mismatch(self) -> int | None:
        return next((s.index for s in self.steps if not s.equal), None)

    def to_dict(self) -> dict:
        out = []
        for s in self.steps:
            row = {"step": s.index, "boundary_equal": s.boundary_equal, "outer_equal": s.outer_equal}
            if not s.equal:
                row["boundary_symdiff"] = [list(c) for c in s.boundary_diff]
                row["outer_symdiff"] = [list(c) for c in s.outer_diff]
            out.append(row)
        return {"all_equal": self.all_equal, "first_mismatch": self.first_mismatch, "steps": out}


def compare_runs(full_states, boundary_states) -> ComparisonReport:
    """Step-by-step exact comparison of boundary layers with those of the full scheme."""
    full_states, boundary_states = list(full_states), list(boundary_states)
    if len(full_states) != len(boundary_states):
        raise ValueError(f"run lengths differ: {len(full_states)} full vs {len(boundary_states)} boundary states")
    steps = []
    for i, (f, b) in enumerate(zip(full_states, boundary_states)):
        f0, f1 = _layers(f)
        b0, b1 = _layers(b)
        d0, d1 = (f0 - b0) | (b0 - f0), (f1 - b1) | (b1 - f1)
        steps.append(StepComparison(i, not d0, not d1, d0, d1))
    return ComparisonReport(steps)
