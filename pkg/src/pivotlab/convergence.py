"""
Mesh-refinement studies: discrete L1 errors and experimental order of convergence.

A study runs the scheme on a nested sequence of grids with ``GP = gp0 * 2**l``
cells. In self-convergence mode the error at row ``l`` is the distance between
the solutions on levels ``l - 1`` and ``l``, measured on the coarser grid. In
reference mode every level is compared with a reference solution.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import InvalidArgument, PivotLabError, UndefinedRelativeError
from .fixed_pivot import StateVector, build_event_table
from .grid import (RANDOM_SPLIT_RANGE, Grid, MeshFamily, build_geometric, build_uniform, nesting_map,
                   refine_locally_uniform, refine_oscillatory, refine_random)
from .initial_condition import DensitySpec, project_to_cells
from .integrator import IntegrationConfig, format_float, integrate
from .kernel import KernelSpec
from .oracles import QuadratureSpec, reference_solution, truncation_error

logger = logging.getLogger(__name__)

SELF = "self"
REFERENCE = "reference"


def project_fine_to_coarse(fine: StateVector, fine_grid: Grid, coarse_grid: Grid) -> StateVector:
    """Sum fine cell totals inside each coarse cell (grids must be nested)."""
    if len(fine) != fine_grid.n_cells:
        raise InvalidArgument("fine state does not match the fine grid")
    idx = nesting_map(coarse_grid, fine_grid)
    if idx is None:
        raise InvalidArgument("grids are not nested")
    if idx[0] != 0 or idx[-1] != fine_grid.n_cells:
        raise InvalidArgument("grids do not cover the same domain")
    N = np.add.reduceat(fine.N, idx[:-1])
    return StateVector(N, fine.ghost_count, fine.ghost_mass)


def l1_error(a, b, relative: bool = False) -> float:
    """``sum |a_i - b_i|``, optionally divided by ``sum |a_i|``."""
    a = np.asarray(getattr(a, "N", a), dtype=np.float64)
    b = np.asarray(getattr(b, "N", b), dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgument(f"length mismatch: {a.size} vs {b.size}")
    err = float(np.abs(a - b).sum())
    if relative:
        denom = float(np.abs(a).sum())
        if denom == 0.0:
            raise UndefinedRelativeError("relative error of a zero reference is undefined")
        err /= denom
    return err


def _log2_ratio(e1: float, e2: float) -> float:
    if not (e1 > 0 and e2 > 0):
        raise InvalidArgument(f"EOC needs positive errors, got {e1!r}, {e2!r}")
    return math.log(e1 / e2) / math.log(2.0)


def eoc_self(err_h: float, err_h2: float) -> float:
    """Order from successive solution differences ``|N_h - N_h/2|`` and ``|N_h/2 - N_h/4|``."""
    return _log2_ratio(err_h, err_h2)


def eoc_reference(E_I: float, E_2I: float) -> float:
    """Order from errors against a reference on ``I`` and ``2I`` cells."""
    return _log2_ratio(E_I, E_2I)


# ---------------------------------------------------------------------------
# study configuration


_DEFAULT_BASE = {
    MeshFamily.LOCALLY_UNIFORM: MeshFamily.GEOMETRIC,
    MeshFamily.RANDOM: MeshFamily.GEOMETRIC,
    MeshFamily.OSCILLATORY: MeshFamily.UNIFORM,
}


@dataclass(frozen=True)
class StudyConfig:
    family: MeshFamily
    x_min: float
    x_max: float
    kernel: KernelSpec
    density: DensitySpec
    gp0: int = 60
    levels: int = 3
    base_cells: int = 30
    base_family: MeshFamily | None = None
    seeds: tuple = (0,)
    split_range: tuple = RANDOM_SPLIT_RANGE
    t_end: float = 0.5
    dt: float = 1e-3
    mode: str = SELF
    relative: bool | None = None
    reference: str = "exact"
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        object.__setattr__(self, "family", MeshFamily.parse(self.family))
        if self.base_family is None and self.family in _DEFAULT_BASE:
            object.__setattr__(self, "base_family", _DEFAULT_BASE[self.family])
        elif self.base_family is not None:
            object.__setattr__(self, "base_family", MeshFamily.parse(self.base_family))
        if self.mode not in (SELF, REFERENCE):
            raise InvalidArgument(f"study mode must be {SELF!r} or {REFERENCE!r}, got {self.mode!r}")
        if self.gp0 < 1 or self.levels < 0:
            raise InvalidArgument("gp0 must be positive and levels non-negative")
        if self.family in _DEFAULT_BASE:
            ratio = self.gp0 / self.base_cells
            if ratio < 1 or ratio != 2 ** round(math.log2(ratio)):
                raise InvalidArgument(
                    f"gp0={self.gp0} is not base_cells={self.base_cells} times a power of two")
        if self.relative is None:
            object.__setattr__(self, "relative", self.mode == REFERENCE)
        if self.family is not MeshFamily.RANDOM:
            object.__setattr__(self, "seeds", (None,))
        else:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            if not self.seeds:
                raise InvalidArgument("random meshes need at least one seed")

    @property
    def gp_list(self):
        return [self.gp0 << l for l in range(self.levels + 1)]

    def base_grid(self) -> Grid:
        builder = build_geometric if self.base_family is MeshFamily.GEOMETRIC else build_uniform
        return builder(self.x_min, self.x_max, self.base_cells)

    def grid_at(self, gp: int, seed=None) -> Grid:
        """Grid with ``gp`` cells; refined families split the base grid."""
        if self.family is MeshFamily.UNIFORM:
            return build_uniform(self.x_min, self.x_max, gp)
        if self.family is MeshFamily.GEOMETRIC:
            return build_geometric(self.x_min, self.x_max, gp)
        level = int(round(math.log2(gp / self.base_cells)))
        base = self.base_grid()
        if self.family is MeshFamily.LOCALLY_UNIFORM:
            return refine_locally_uniform(base, level)
        if self.family is MeshFamily.OSCILLATORY:
            return refine_oscillatory(base, level)
        return refine_random(base, level, seed, self.split_range)

    def integration(self) -> IntegrationConfig:
        return IntegrationConfig(t_end=self.t_end, dt=self.dt, monitor_interval=10 ** 9)

    def describe(self) -> dict:
        return {
            "family": self.family.value,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "kernel": str(self.kernel),
            "density": str(self.density),
            "gp": self.gp_list,
            "base_cells": self.base_cells,
            "base_family": self.base_family.value if self.base_family else None,
            "seeds": list(self.seeds),
            "split_range": list(self.split_range),
            "t_end": self.t_end,
            "dt": self.dt,
            "mode": self.mode,
            "relative": self.relative,
            "reference": self.reference if self.mode == REFERENCE else None,
        }

    def fingerprint(self) -> str:
        text = json.dumps(self.describe(), sort_keys=True) + __version__
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class StudyRow:
    gp: int
    error: float | None = None
    eoc: float | None = None
    status: str = "ok"


@dataclass
class StudyReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    value_name: str = "error"

    def errors(self):
        return [r.error for r in self.rows]

    def eocs(self):
        return [r.eoc for r in self.rows]

    @property
    def final_eoc(self):
        return self.rows[-1].eoc if self.rows else None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["GP", self.value_name, "EOC" if self.value_name == "error" else "ratio"]
            # a single-level consistency probe has no ratio to report
            width = 2 if self.value_name != "error" and len(self.rows) == 1 else 3
            w.writerow(head[:width])
            for r in self.rows:
                w.writerow([r.gp, _fmt(r.error), _fmt(r.eoc)][:width])

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "metadata": self.metadata}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def format_table(self) -> str:
        head = "ratio" if self.value_name != "error" else "EOC"
        lines = [f"{'GP':>6}  {self.value_name:>12}  {head:>7}"]
        for r in self.rows:
            err = "-" if r.error is None else f"{r.error:.4e}"
            eoc = "-" if r.eoc is None else f"{r.eoc:.3f}"
            lines.append(f"{r.gp:>6}  {err:>12}  {eoc:>7}")
        return "\n".join(lines)


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return format_float(value)


def worker_count() -> int:
    try:
        cap = int(os.environ.get("PIVOTLAB_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def _map(fn, items):
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def solve(grid: Grid, kernel: KernelSpec, density: DensitySpec, cfg: IntegrationConfig) -> StateVector:
    state0 = project_to_cells(density, grid)
    final, _ = integrate(state0, build_event_table(grid, kernel), cfg)
    return final


def _safe(fn, *args):
    try:
        return fn(*args), "ok"
    except PivotLabError as exc:
        logger.error("study level failed: %s", exc)
        return None, f"failed: {exc}"


def _seed_errors(cfg: StudyConfig, seed):
    """Per-row errors for one seed; ``None`` where the row has no error."""
    icfg = cfg.integration()
    gps = cfg.gp_list
    grids = [cfg.grid_at(gp, seed) for gp in gps]
    sols = [_safe(solve, g, cfg.kernel, cfg.density, icfg) for g in grids]
    errors, status = [None] * len(gps), ["ok"] * len(gps)
    for l, (sol, st) in enumerate(sols):
        status[l] = st

    if cfg.mode == SELF:
        for l in range(1, len(gps)):
            (fine, s1), (coarse, s0) = sols[l], sols[l - 1]
            if fine is None or coarse is None:
                status[l] = s1 if fine is None else s0
                continue
            errors[l] = l1_error(coarse, project_fine_to_coarse(fine, grids[l], grids[l - 1]),
                                 relative=cfg.relative)
        return errors, status

    if cfg.reference == "fine":
        finest = cfg.grid_at(gps[-1] << 2, seed)
        ref_fine, st = _safe(solve, finest, cfg.kernel, cfg.density,
                             IntegrationConfig(t_end=cfg.t_end, dt=cfg.dt / 4, monitor_interval=10 ** 9))
        refs = [None if ref_fine is None else project_fine_to_coarse(ref_fine, finest, g) for g in grids]
    else:
        refs = [reference_solution(cfg.kernel, cfg.density, g, cfg.t_end, mode="exact", quad=cfg.quad)
                for g in grids]
    for l, g in enumerate(grids):
        if sols[l][0] is None or refs[l] is None:
            status[l] = sols[l][1] if sols[l][0] is None else "failed: reference"
            continue
        errors[l] = l1_error(refs[l], sols[l][0], relative=cfg.relative)
    return errors, status


def run_study(cfg: StudyConfig) -> StudyReport:
    """Run every level (and seed), average errors over seeds, then compute EOCs."""
    if cfg.mode == SELF and cfg.levels < 2:
        raise InvalidArgument("self-convergence studies need at least 2 refinement levels "
                              "(three solutions)")
    start = time.perf_counter()
    per_seed = _map(lambda s: _seed_errors(cfg, s), cfg.seeds)
    gps = cfg.gp_list
    rows = []
    for l, gp in enumerate(gps):
        errs = [e[l] for e, _ in per_seed]
        bad = [st[l] for _, st in per_seed if st[l] != "ok"]
        row = StudyRow(gp, status=bad[0] if bad else "ok")
        if not bad and all(e is not None for e in errs):
            row.error = float(np.mean(errs))
        rows.append(row)

    first_eoc = 2 if cfg.mode == SELF else 1
    eoc = eoc_self if cfg.mode == SELF else eoc_reference
    for l in range(first_eoc, len(rows)):
        e1, e2 = rows[l - 1].error, rows[l].error
        if e1 is not None and e2 is not None and e1 > 0 and e2 > 0:
            rows[l].eoc = eoc(e1, e2)

    meta = {
        "config": cfg.describe(),
        "fingerprint": cfg.fingerprint(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
    }
    return StudyReport(rows, meta)


def run_consistency(cfg: StudyConfig) -> StudyReport:
    """Frozen-time truncation error norms across levels; the last column is the ratio
    ``|sigma|(previous level) / |sigma|(this level)``."""
    start = time.perf_counter()

    def norms(seed):
        return [float(np.abs(truncation_error(cfg.density, cfg.grid_at(gp, seed), cfg.kernel,
                                              cfg.quad)).sum()) for gp in cfg.gp_list]

    per_seed = _map(norms, cfg.seeds)
    rows = []
    for l, gp in enumerate(cfg.gp_list):
        rows.append(StudyRow(gp, float(np.mean([n[l] for n in per_seed]))))
    for l in range(1, len(rows)):
        rows[l].eoc = rows[l - 1].error / rows[l].error
    meta = {
        "config": cfg.describe(),
        "fingerprint": cfg.fingerprint(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
    }
    return StudyReport(rows, meta, value_name="sigma_l1")
