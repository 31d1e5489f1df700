"""Fixed-step classical Runge-Kutta time marching with moment monitoring."""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationFailure, InvalidArgument, NumericalFailure
from .fixed_pivot import EventTable, StateVector, rhs

logger = logging.getLogger(__name__)

NEGATIVITY_RTOL = 1e-10
# dt * (largest per-cell death rate) above this triggers a stability warning;
# the real-axis stability limit of classical RK4 is about 2.78
STIFFNESS_LIMIT = 1.0


class NegativityPolicy(str, enum.Enum):
    WARN = "warn"
    ABORT = "abort"


@dataclass(frozen=True)
class IntegrationConfig:
    t_end: float = 0.5
    dt: float = 1e-3
    monitor_interval: int = 10
    negativity_policy: NegativityPolicy = NegativityPolicy.WARN

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidArgument(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise InvalidArgument(f"t_end must be non-negative, got {self.t_end!r}")
        if int(self.monitor_interval) != self.monitor_interval or self.monitor_interval < 1:
            raise InvalidArgument("monitor_interval must be a positive integer")
        try:
            policy = NegativityPolicy(getattr(self.negativity_policy, "value", self.negativity_policy))
        except ValueError:
            raise InvalidArgument(f"unknown negativity policy {self.negativity_policy!r}") from None
        object.__setattr__(self, "negativity_policy", policy)
        object.__setattr__(self, "monitor_interval", int(self.monitor_interval))

    def step_times(self):
        """Step sizes: whole steps of ``dt`` and a truncated final step landing on ``t_end``."""
        if self.t_end == 0:
            return []
        n = max(1, math.ceil(self.t_end / self.dt - 1e-9))
        steps = [self.dt] * (n - 1)
        steps.append(self.t_end - (n - 1) * self.dt)
        return steps


@dataclass
class MonitorLog:
    t: list = field(default_factory=list)
    M0: list = field(default_factory=list)
    M1: list = field(default_factory=list)
    ghost_count: list = field(default_factory=list)
    ghost_mass: list = field(default_factory=list)
    min_N: list = field(default_factory=list)

    COLUMNS = ("t", "M0", "M1", "ghost_count", "ghost_mass", "min_N")

    def record(self, t: float, state: StateVector, pivots: np.ndarray) -> None:
        self.t.append(float(t))
        self.M0.append(float(state.N.sum()))
        self.M1.append(float(np.sum(state.N * pivots)))
        self.ghost_count.append(state.ghost_count)
        self.ghost_mass.append(state.ghost_mass)
        self.min_N.append(float(state.N.min()))

    def rows(self):
        return zip(*(getattr(self, c) for c in self.COLUMNS))

    def mass_ledger(self) -> np.ndarray:
        return np.asarray(self.M1) + np.asarray(self.ghost_mass)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for row in self.rows():
                w.writerow([format_float(v) for v in row])


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def rk4_step(fun, t: float, y, dt: float):
    """One classical four-stage Runge-Kutta step for ``y' = fun(t, y)``."""
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt!r}")
    k1 = fun(t, y)
    k2 = fun(t + dt / 2, y + (dt / 2) * k1)
    k3 = fun(t + dt / 2, y + (dt / 2) * k2)
    k4 = fun(t + dt, y + dt * k3)
    return y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def packed_rhs(table: EventTable):
    """Right-hand side on the packed ``[N..., ghost_count, ghost_mass]`` vector."""

    def fun(t, y):
        # overflow is reported below with step and cell, not as a numpy warning
        with np.errstate(over="ignore", invalid="ignore"):
            out = rhs(StateVector(y[:-2], y[-2], y[-1]), table).pack()
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0])
            raise NumericalFailure(f"non-finite derivative at t={t:g} in component {bad}", cell=bad)
        return out

    return fun


def stiffness(state: StateVector, table: EventTable) -> float:
    """Largest per-cell death rate ``max_i sum_j K(x_i, x_j) N_j``."""
    return float(np.max(table.death_matrix @ state.N)) if len(state) else 0.0


def integrate(state0: StateVector, table: EventTable, cfg: IntegrationConfig):
    """March ``state0`` to ``cfg.t_end``; returns ``(final_state, MonitorLog)``."""
    if len(state0) != table.n_cells:
        raise InvalidArgument(f"state has {len(state0)} cells, event table expects {table.n_cells}")
    pivots = table.pivots
    log = MonitorLog()
    log.record(0.0, state0, pivots)
    steps = cfg.step_times()
    if not steps:
        return state0.copy(), log

    stiff = cfg.dt * stiffness(state0, table)
    if stiff > STIFFNESS_LIMIT:
        logger.warning("dt * max death rate = %.3g exceeds %.3g; RK4 may be unstable", stiff,
                       STIFFNESS_LIMIT)

    fun = packed_rhs(table)
    y = state0.pack()
    t = 0.0
    warned = False
    for n, h in enumerate(steps, start=1):
        try:
            y = rk4_step(fun, t, y, h)
        except NumericalFailure as exc:
            raise NumericalFailure(f"step {n}: {exc}", step=n, cell=exc.cell) from exc
        t = (n * cfg.dt) if n < len(steps) else cfg.t_end
        N = y[:-2]
        if not np.all(np.isfinite(y)):
            cell = int(np.flatnonzero(~np.isfinite(y))[0])
            raise NumericalFailure(f"non-finite state after step {n} (t={t:g}) in cell {cell}",
                                   step=n, cell=cell)
        floor = -NEGATIVITY_RTOL * max(float(N.max()), 0.0)
        if N.min() < floor:
            cell = int(np.argmin(N))
            msg = f"negative number {N[cell]:.3e} in cell {cell} after step {n} (t={t:g})"
            if cfg.negativity_policy is NegativityPolicy.ABORT:
                raise IntegrationFailure(msg, step=n, cell=cell)
            if not warned:
                logger.warning(msg)
                warned = True
        if n % cfg.monitor_interval == 0 or n == len(steps):
            log.record(t, StateVector(N, y[-2], y[-1]), pivots)
    return StateVector.unpack(y), log
