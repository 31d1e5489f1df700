"""Command line entry point: ``pivotlab {simulate,eoc,consistency,meshes} --config ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, load, preset_names
from .convergence import run_consistency, run_study
from .errors import ConfigError, InvalidArgument, NumericalFailure, UnsupportedCombination
from .fixed_pivot import build_event_table
from .initial_condition import project_to_cells
from .integrator import MonitorLog, format_float, integrate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("pivotlab")


def _output_dir(args, cfg: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("pivotlab_out") / cfg.name


def _write_manifest(out: Path, command: str, cfg: RunConfig, files: list, timings: dict,
                    extra: dict | None = None) -> None:
    files = list(files) + ["manifest.json"]
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": cfg.raw,
        "resolved": cfg.study.describe(),
        "seeds": [s for s in cfg.study.seeds if s is not None],
        "files": files,
        "timings_s": timings,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _simulate_segments(state0, table, cfg: RunConfig):
    """Integrate through each snapshot time; returns ``([(t, state)], MonitorLog)``."""
    icfg = cfg.integration
    snaps, log = [], MonitorLog()
    state, t0 = state0, 0.0
    for ts in cfg.snapshots:
        if ts > t0:
            seg = replace(icfg, t_end=ts - t0)
            state, part = integrate(state, table, seg)
            first = 1 if log.t else 0
            for col in MonitorLog.COLUMNS:
                values = getattr(part, col)[first:]
                if col == "t":
                    values = [t0 + v for v in values]
                getattr(log, col).extend(values)
            t0 = ts
        elif not log.t:
            log.record(0.0, state, table.pivots)
        snaps.append((ts, state))
    return snaps, log


def cmd_simulate(args, cfg: RunConfig) -> int:
    study = cfg.study
    grid = study.grid_at(study.gp0, study.seeds[0])
    start = time.perf_counter()
    table = build_event_table(grid, study.kernel)
    t_table = time.perf_counter() - start
    state0 = project_to_cells(study.density, grid)
    snaps, log = _simulate_segments(state0, table, cfg)
    t_run = time.perf_counter() - start - t_table

    out = _output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "state.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "cell", "pivot", "width", "N"])
        for t, st in snaps:
            for i, (x, dx, n) in enumerate(zip(grid.pivots, grid.widths, st.N)):
                w.writerow([format_float(t), i, format_float(x), format_float(dx), format_float(n)])
    log.to_csv(out / "monitor.csv")
    _write_manifest(out, "simulate", cfg, ["state.csv", "monitor.csv"],
                    {"event_table": t_table, "integration": t_run},
                    {"grid_fingerprint": grid.fingerprint, "table": table.stats()})
    if not args.quiet:
        final = snaps[-1][1]
        print(f"{cfg.name}: I={grid.n_cells} t={snaps[-1][0]:g} M0={final.N.sum():.10g} "
              f"M1={(final.N * grid.pivots).sum():.10g} ghost_mass={final.ghost_mass:.3g}")
    return EXIT_OK


def _failed_rows(report) -> list:
    return [r for r in report.rows if r.status != "ok"]


def cmd_eoc(args, cfg: RunConfig) -> int:
    report = run_study(cfg.study)
    out = _output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "eoc.csv")
    report.to_json(out / "report.json")
    _write_manifest(out, "eoc", cfg, ["eoc.csv", "report.json"], {"study": report.metadata["wall_time_s"]},
                    {"rows": report.to_dict()["rows"]})
    if not args.quiet:
        print(f"{cfg.name}: {cfg.study.family.value} {cfg.study.kernel} {cfg.study.density}")
        print(report.format_table())
    failed = _failed_rows(report)
    if failed:
        print(f"error: level GP={failed[0].gp} {failed[0].status}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_consistency(args, cfg: RunConfig) -> int:
    report = run_consistency(cfg.study)
    out = _output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "consistency.csv")
    _write_manifest(out, "consistency", cfg, ["consistency.csv"],
                    {"study": report.metadata["wall_time_s"]})
    if not args.quiet:
        print(f"{cfg.name}: truncation error, {cfg.study.family.value} {cfg.study.kernel}")
        print(report.format_table())
    return EXIT_OK


def cmd_meshes(args, cfg: RunConfig) -> int:
    study = cfg.study
    dumps = []
    for gp in study.gp_list:
        for seed in study.seeds:
            grid = study.grid_at(gp, seed)
            name = f"grid_I{gp}.json" if seed is None else f"grid_I{gp}_seed{seed}.json"
            dumps.append((name, {"grid": grid.to_dict(), "diagnostics": grid.diagnostics(),
                                 "fingerprint": grid.fingerprint}))
    out = _output_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in dumps:
        with open(out / name, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    _write_manifest(out, "meshes", cfg, [n for n, _ in dumps], {})
    if not args.quiet:
        for name, payload in dumps:
            d = payload["diagnostics"]
            line = f"{name}: I={d['n_cells']} dx=[{d['dx_min']:.4g}, {d['dx_max']:.4g}]"
            if "ratio" in d:
                line += f" r={d['ratio']:.6f}"
            print(line)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "eoc": cmd_eoc,
    "consistency": cmd_consistency,
    "meshes": cmd_meshes,
}


HELP = {
    "simulate": "integrate on the coarsest mesh and write state and monitor CSVs",
    "eoc": "run a refinement study and write the error / EOC table",
    "consistency": "tabulate the local truncation error norm across refinements",
    "meshes": "dump every study mesh with its diagnostics",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pivotlab", description="Fixed pivot aggregation solver and mesh-refinement convergence lab.",
        epilog="Exit codes: 0 success, 2 configuration error, 3 numerical failure.")
    parser.add_argument("--version", action="version", version=f"pivotlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, metavar="PATH",
                       help="JSON config file or preset name (" + ", ".join(preset_names()[:2]) + ", ...)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
        p.add_argument("--seed-override", type=int, metavar="N", help="use this single random-mesh seed")
        p.add_argument("--quiet", action="store_true", help="suppress tables and warnings")
    sub.add_parser("presets", help="list shipped presets")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        cfg = load(args.config, args.seed_override)
    except (ConfigError, InvalidArgument, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, InvalidArgument, UnsupportedCombination) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
