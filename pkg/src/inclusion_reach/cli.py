"""Command line front end: run, compare, study, topology and validate."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import analysis
from .config import ConfigError, builtin, load_config
from .exprparser import EvalError, ExprError
from .grid import write_csv
from .scheme import VARIANTS, FullState, ParameterError, SchemeError, default_workers, run

EXIT_OK, EXIT_VALIDATION, EXIT_SCHEME, EXIT_MISMATCH = 0, 2, 3, 4


def _scenario(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = builtin(args.scenario or "linear2d")
    cfg = cfg.replace(h=args.h, T=args.T, L=args.L, rho=args.rho, kappa_override=args.kappa_override)
    if args.no_strict:
        cfg = cfg.replace(strict_connectivity=False)
    return cfg


def _workers(args) -> int:
    return args.threads if args.threads is not None else default_workers()


def _run(cfg, variant, args, **kw):
    return run(
        variant,
        cfg.rhs(),
        cfg.initial_set(),
        cfg.params(),
        strict=cfg.strict_connectivity,
        workers=_workers(args),
        **kw,
    )


def _dump_state(out: Path, index: int, state) -> None:
    if isinstance(state, FullState):
        write_csv(state.cells, out / f"step_{index:04d}_full.csv", "full")
    else:
        write_csv(state.boundary, out / f"step_{index:04d}_boundary.csv", "boundary")
        write_csv(state.outer, out / f"step_{index:04d}_outer.csv", "outer")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    cfg = _scenario(args)
    variant = args.variant or cfg.scheme
    out = Path(args.out) if args.out else None
    emit = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

        def emit(index, t, state):
            _dump_state(out, index, state)

    report = _run(cfg, variant, args, emit=emit, keep_states=False)
    report.metadata["scenario"] = cfg.name
    if out is not None:
        _write_text(out / "report.json", report.to_json(indent=2) + "\n")
    last = report.steps[-1]
    print(f"{cfg.name} [{variant}] {len(report.steps) - 1} steps: |boundary|={last.boundary_cells} |outer|={last.outer_cells}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _scenario(args)
    variant = args.variant or "boundary"
    if variant == "full":
        raise ConfigError("compare needs a boundary variant (preliminary or boundary)")
    full = _run(cfg, "full", args, count_components=False)
    bnd = _run(cfg, variant, args, count_components=False)
    report = analysis.compare_runs(full.states, bnd.states)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "compare.json", json.dumps(report.to_dict(), indent=2) + "\n")
    for s in report.steps:
        status = "equal" if s.equal else f"MISMATCH boundary +-{len(s.boundary_diff)} outer +-{len(s.outer_diff)}"
        print(f"step {s.index}: {status}")
    if report.all_equal:
        print("all steps equal")
        if args.expect_mismatch:
            print("expected a mismatch but none occurred", file=sys.stderr)
            return EXIT_MISMATCH
        return EXIT_OK
    print(f"first mismatch at step {report.first_mismatch}")
    return EXIT_OK if args.expect_mismatch else EXIT_MISMATCH


def cmd_study(args) -> int:
    cfg = _scenario(args)
    h_list = [float(v) for v in args.h_list.split(",") if v.strip()]
    records = analysis.convergence_study(h_list, cfg, cfg.T, include_full=not args.no_full, workers=_workers(args))
    slopes = analysis.fit_slopes(records)
    table = analysis.study_csv(records, slopes)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "study.csv", table)
        _write_text(out / "study.json", analysis.study_json(records, slopes) + "\n")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_topology(args) -> int:
    cfg = _scenario(args)
    variant = args.variant or "boundary"
    rows = ["step,t,boundary_components,enclosed_voids"]

    def emit(index, t, state):
        rep = analysis.topology_report(state, count_voids=not args.no_voids and cfg.dim == 2)
        voids = "" if rep.enclosed_voids is None else rep.enclosed_voids
        rows.append(f"{index},{t!r},{rep.boundary_components},{voids}")

    _run(cfg, variant, args, emit=emit, keep_states=False, count_components=False)
    text = "\n".join(rows) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(out / "topology.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _scenario(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = cfg.params()
    echo = params.echo()
    echo["scenario"] = cfg.name
    echo["lipschitz_certified"] = cfg.lipschitz()[1]
    print(json.dumps(echo, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="inclusion-reach", description="Grid-based reachable sets of differential inclusions.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--scenario", help="built-in scenario name")
        src.add_argument("--config", help="JSON scenario config")
        sp.add_argument("--h", type=float, help="time step")
        sp.add_argument("--T", type=float, help="final time")
        sp.add_argument("--rho", type=float, help="grid spacing (default h^2)")
        sp.add_argument("--L", type=float, help="Lipschitz constant of the drift")
        sp.add_argument("--kappa-override", type=float)
        sp.add_argument("--threads", type=int, help="worker threads (env INCLUSION_REACH_THREADS)")
        sp.add_argument("--no-strict", action="store_true", help="warn instead of failing on a disconnected initial set")
        sp.add_argument("--out", help="output directory")
        return sp

    r = common(sub.add_parser("run", help="run one scheme variant"))
    r.add_argument("--variant", choices=VARIANTS)
    r.set_defaults(func=cmd_run)

    c = common(sub.add_parser("compare", help="full scheme vs a boundary variant"))
    c.add_argument("--variant", choices=VARIANTS[1:])
    c.add_argument("--expect-mismatch", action="store_true")
    c.set_defaults(func=cmd_compare)

    s = common(sub.add_parser("study", help="convergence ladder with rho = h^2"))
    s.add_argument("--h-list", default="0.2,0.1,0.05")
    s.add_argument("--no-full", action="store_true", help="skip the full scheme")
    s.set_defaults(func=cmd_study)

    t = common(sub.add_parser("topology", help="per-step component and void counts"))
    t.add_argument("--variant", choices=VARIANTS)
    t.add_argument("--no-voids", action="store_true")
    t.set_defaults(func=cmd_topology)

    v = common(sub.add_parser("validate", help="check parameters and echo derived constants"))
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemeError, EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEME
    except (ConfigError, ParameterError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
