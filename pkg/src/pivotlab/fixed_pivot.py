"""
Fixed pivot discretization of the truncated aggregation equation.

Every unordered pivot pair (j, k) with j >= k forms an aggregate of size
``v = x_j + x_k``. The aggregate is located by the half-open rule
``x_i <= v < x_{i+1}`` and split between the two neighbouring pivots with
fractions ``a = (x_{i+1} - v)/(x_{i+1} - x_i)`` and ``b = 1 - a``, which
preserves number and mass. Above the last cell an extra pivot
``x_{I+1} = x_I + dx_I`` receives the upper share; since it is not a cell,
that share is booked in a ghost ledger. Aggregates with ``v >= x_{I+1}`` go
to the ghost ledger whole.

The pair enumeration is done once per (grid, kernel) in an ``EventTable``;
``rhs`` then streams the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import InvalidArgument, StaleTableError
from .kernel import KernelSpec, eval_kernel

TABLE_FORMAT_VERSION = 1


@dataclass
class StateVector:
    """Per-cell particle numbers plus the ghost ledger for out-of-domain births."""

    N: np.ndarray
    ghost_count: float = 0.0
    ghost_mass: float = 0.0

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=np.float64)
        if self.N.ndim != 1:
            raise InvalidArgument("state must be one-dimensional")
        self.ghost_count = float(self.ghost_count)
        self.ghost_mass = float(self.ghost_mass)

    def __len__(self) -> int:
        return self.N.size

    def pack(self) -> np.ndarray:
        return np.concatenate([self.N, [self.ghost_count, self.ghost_mass]])

    @classmethod
    def unpack(cls, y: np.ndarray) -> StateVector:
        y = np.asarray(y, dtype=np.float64)
        return cls(y[:-2].copy(), y[-2], y[-1])

    def copy(self) -> StateVector:
        return StateVector(self.N.copy(), self.ghost_count, self.ghost_mass)

    @classmethod
    def zeros(cls, n: int) -> StateVector:
        return cls(np.zeros(n))


@dataclass(frozen=True, eq=False)
class EventTable:
    """Precomputed aggregation events for one (grid, kernel) pair.

    Pivot indices are 0-based. ``lower[e] == -1`` marks a ghost event; for
    other events ``lower[e]`` is the pivot receiving fraction ``a[e]`` and
    ``lower[e] + 1`` the pivot receiving ``b[e]``, where index ``n_cells``
    stands for the extra pivot beyond the last cell.
    """

    j: np.ndarray
    k: np.ndarray
    weight: np.ndarray
    v: np.ndarray
    lower: np.ndarray
    a: np.ndarray
    b: np.ndarray
    pivots: np.ndarray
    ghost_pivot: float
    death_matrix: np.ndarray = field(repr=False)
    grid_fingerprint: str = ""
    kernel_fingerprint: str = ""

    def __post_init__(self):
        inside = self.lower >= 0
        object.__setattr__(self, "_interior", np.flatnonzero(inside))
        object.__setattr__(self, "_ghost", np.flatnonzero(~inside))
        upper = self.lower + 1
        object.__setattr__(self, "_overflow", np.flatnonzero(inside & (upper == self.n_cells)))
        self._build_operators()

    def _build_operators(self):
        # rates r_e = N_j N_k (without weights) map to births through one sparse
        # matrix, and to the ghost ledger through two weight vectors
        I, e, o, g = self.n_cells, self._interior, self._overflow, self._ghost
        rows = np.concatenate([self.lower[e], self.lower[e] + 1])
        cols = np.concatenate([e, e])
        vals = np.concatenate([self.weight[e] * self.a[e], self.weight[e] * self.b[e]])
        keep = rows < I
        birth = sparse.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(I, self.n_events))
        count_w = np.zeros(self.n_events)
        mass_w = np.zeros(self.n_events)
        count_w[g] = self.weight[g]
        mass_w[g] = self.weight[g] * self.v[g]
        count_w[o] = self.weight[o] * self.b[o]
        mass_w[o] = self.weight[o] * self.b[o] * self.ghost_pivot
        object.__setattr__(self, "_birth_op", birth)
        object.__setattr__(self, "_ghost_count_w", count_w)
        object.__setattr__(self, "_ghost_mass_w", mass_w)

    @property
    def n_cells(self) -> int:
        return self.pivots.size

    @property
    def n_events(self) -> int:
        return self.j.size

    def stats(self) -> dict:
        return {
            "n_cells": self.n_cells,
            "pair_count": self.n_events,
            "interior_events": int(self._interior.size),
            "boundary_events": int(self._overflow.size),
            "ghost_events": int(self._ghost.size),
        }

    def records(self):
        """Yield one dict per event, in table order."""
        for e in range(self.n_events):
            rec = {"j": int(self.j[e]), "k": int(self.k[e]), "rate_weight": float(self.weight[e]),
                   "v": float(self.v[e])}
            if self.lower[e] < 0:
                rec["target"] = "ghost"
            else:
                rec.update(target="pair", i=int(self.lower[e]), a=float(self.a[e]), b=float(self.b[e]))
            yield rec

    def upper_pivot(self, e) -> np.ndarray:
        """Location of the upper target pivot for interior events ``e``."""
        xp = np.append(self.pivots, self.ghost_pivot)
        return xp[self.lower[e] + 1]

    def check(self, grid, kernel: KernelSpec) -> None:
        if grid.fingerprint != self.grid_fingerprint:
            raise StaleTableError("event table was built for a different grid")
        if kernel.fingerprint != self.kernel_fingerprint:
            raise StaleTableError("event table was built for a different kernel")

    def save(self, path) -> None:
        """Binary dump for cache reuse (``.npz`` with version and fingerprints)."""
        np.savez(
            path,
            version=np.array(TABLE_FORMAT_VERSION),
            grid_fingerprint=np.array(self.grid_fingerprint),
            kernel_fingerprint=np.array(self.kernel_fingerprint),
            j=self.j, k=self.k, weight=self.weight, v=self.v, lower=self.lower,
            a=self.a, b=self.b, pivots=self.pivots, ghost_pivot=np.array(self.ghost_pivot),
            death_matrix=self.death_matrix,
        )

    @classmethod
    def load(cls, path, grid, kernel: KernelSpec) -> EventTable:
        with np.load(path, allow_pickle=False) as data:
            if int(data["version"]) != TABLE_FORMAT_VERSION:
                raise StaleTableError(f"unsupported table format version {int(data['version'])}")
            table = cls(
                j=data["j"], k=data["k"], weight=data["weight"], v=data["v"],
                lower=data["lower"], a=data["a"], b=data["b"], pivots=data["pivots"],
                ghost_pivot=float(data["ghost_pivot"]), death_matrix=data["death_matrix"],
                grid_fingerprint=str(data["grid_fingerprint"]),
                kernel_fingerprint=str(data["kernel_fingerprint"]),
            )
        table.check(grid, kernel)
        return table


def build_event_table(grid, kernel: KernelSpec) -> EventTable:
    x = np.asarray(grid.pivots)
    I = x.size
    x_ext = np.append(x, grid.ghost_pivot)

    j, k = np.tril_indices(I)
    v = x[j] + x[k]
    weight = np.where(j == k, 0.5, 1.0) * eval_kernel(kernel, x[k], x[j])

    # last pivot <= v; v >= x_1 always holds because v >= 2 x_1
    lower = np.searchsorted(x_ext, v, side="right") - 1
    lower[lower >= I] = -1

    inside = lower >= 0
    li = lower[inside]
    x_lo, x_hi = x_ext[li], x_ext[li + 1]
    a = np.zeros_like(v)
    a[inside] = (x_hi - v[inside]) / (x_hi - x_lo)
    b = np.where(inside, 1.0 - a, 0.0)

    death = eval_kernel(kernel, x[:, None], x[None, :])
    return EventTable(
        j=j.astype(np.int64), k=k.astype(np.int64), weight=weight, v=v,
        lower=lower.astype(np.int64), a=a, b=b,
        pivots=x.copy(), ghost_pivot=float(x_ext[-1]),
        death_matrix=np.ascontiguousarray(death),
        grid_fingerprint=grid.fingerprint, kernel_fingerprint=kernel.fingerprint,
    )


def _check_length(N: np.ndarray, table: EventTable) -> None:
    if N.shape != (table.n_cells,):
        raise InvalidArgument(f"state has {N.size} cells, event table expects {table.n_cells}")


def _pair_products(N, table):
    return N[table.j] * N[table.k]


def birth_death(N, table: EventTable):
    """Discrete birth and death vectors (births into the ghost ledger excluded)."""
    N = np.asarray(N, dtype=np.float64)
    _check_length(N, table)
    birth = table._birth_op @ _pair_products(N, table)
    death = N * (table.death_matrix @ N)
    return birth, death


def rhs(state: StateVector, table: EventTable) -> StateVector:
    """Time derivative of the cell numbers and of the ghost ledger."""
    N = state.N
    _check_length(N, table)
    p = _pair_products(N, table)
    birth = table._birth_op @ p
    death = N * (table.death_matrix @ N)
    return StateVector(birth - death, table._ghost_count_w @ p, table._ghost_mass_w @ p)


def moments(state: StateVector, grid, p: int) -> float:
    """``sum_i N_i x_i**p`` over the cells (ghost ledger excluded)."""
    if p not in (0, 1, 2):
        raise InvalidArgument(f"moment order must be 0, 1 or 2, got {p!r}")
    return float(np.sum(state.N * grid.pivots ** p))


def total_mass_ledger(state: StateVector, grid) -> float:
    return moments(state, grid, 1) + state.ghost_mass


def total_number_ledger(state: StateVector) -> float:
    return float(state.N.sum()) + state.ghost_count
