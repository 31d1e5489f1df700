"""
Cell-centred grids on a truncated size domain.

Five mesh families are supported: uniform and geometric grids are built
directly, while locally uniform, oscillatory and random grids are produced by
repeatedly splitting every cell of a base grid. All refinement operators are
nested, so every coarse boundary is also a fine boundary.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument


class MeshFamily(str, enum.Enum):
    UNIFORM = "uniform"
    GEOMETRIC = "geometric"
    LOCALLY_UNIFORM = "locally_uniform"
    OSCILLATORY = "oscillatory"
    RANDOM = "random"

    @classmethod
    def parse(cls, value: str | MeshFamily) -> MeshFamily:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise InvalidArgument(f"unknown mesh family {value!r}") from None


# default interval for random split fractions; keeps children away from zero width
RANDOM_SPLIT_RANGE = (0.2, 0.8)


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable cell-centred partition ``x_{1/2} < ... < x_{I+1/2}``.

    Pivots, widths and the ghost pivot are always derived from the stored
    boundaries, never stored on their own.
    """

    boundaries: np.ndarray
    family: MeshFamily
    seed: int | None = None
    levels: int = 0
    _fingerprint: str = field(init=False, repr=False, compare=False, default="")

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise InvalidArgument("a grid needs at least two boundaries")
        if not np.all(np.isfinite(b)):
            raise InvalidArgument("grid boundaries must be finite")
        if b[0] < 0.0:
            raise InvalidArgument("grid must start at a non-negative size")
        if np.any(np.diff(b) <= 0.0):
            raise InvalidArgument("grid boundaries must be strictly increasing")
        b.setflags(write=False)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "family", MeshFamily.parse(self.family))
        digest = hashlib.sha256()
        digest.update(self.family.value.encode())
        digest.update(b.tobytes())
        object.__setattr__(self, "_fingerprint", digest.hexdigest()[:16])

    def __len__(self) -> int:
        return self.boundaries.size - 1

    @property
    def n_cells(self) -> int:
        return self.boundaries.size - 1

    @property
    def x_min(self) -> float:
        return float(self.boundaries[0])

    @property
    def x_max(self) -> float:
        return float(self.boundaries[-1])

    @cached_property
    def pivots(self) -> np.ndarray:
        b = self.boundaries
        x = (b[:-1] + b[1:]) / 2
        x.setflags(write=False)
        return x

    @cached_property
    def widths(self) -> np.ndarray:
        w = np.diff(self.boundaries)
        w.setflags(write=False)
        return w

    @property
    def ghost_pivot(self) -> float:
        """Extra point ``x_{I+1} = x_I + dx_I`` beyond the last cell."""
        return float(self.pivots[-1] + self.widths[-1])

    @property
    def quasi_uniformity(self) -> float:
        return float(self.widths.max() / self.widths.min())

    @property
    def fingerprint(self) -> str:
        return self._fingerprint

    def contains_boundaries_of(self, coarse: Grid, rtol: float = 1e-14) -> bool:
        """True if every boundary of ``coarse`` is (up to ``rtol``) a boundary here."""
        return nesting_map(coarse, self, rtol=rtol) is not None

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "boundaries": [float(v) for v in self.boundaries],
            "seed": self.seed,
            "levels": self.levels,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> Grid:
        return cls(
            boundaries=np.asarray(data["boundaries"], dtype=np.float64),
            family=data["family"],
            seed=data.get("seed"),
            levels=int(data.get("levels", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> Grid:
        return cls.from_dict(json.loads(text))

    def diagnostics(self) -> dict:
        w = self.widths
        out = {
            "family": self.family.value,
            "n_cells": self.n_cells,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "dx_min": float(w.min()),
            "dx_max": float(w.max()),
            "quasi_uniformity": self.quasi_uniformity,
            "ghost_pivot": self.ghost_pivot,
        }
        if self.family is MeshFamily.GEOMETRIC:
            out["ratio"] = float(self.boundaries[1] / self.boundaries[0])
        return out


def nesting_map(coarse: Grid, fine: Grid, rtol: float = 1e-14) -> np.ndarray | None:
    """Index of each coarse boundary inside ``fine.boundaries``, or None if not nested."""
    cb, fb = coarse.boundaries, fine.boundaries
    idx = np.searchsorted(fb, cb)
    idx_lo = np.clip(idx - 1, 0, fb.size - 1)
    idx_hi = np.clip(idx, 0, fb.size - 1)
    pick = np.where(np.abs(fb[idx_lo] - cb) <= np.abs(fb[idx_hi] - cb), idx_lo, idx_hi)
    scale = np.maximum(np.abs(cb), np.finfo(float).tiny)
    if np.any(np.abs(fb[pick] - cb) > rtol * scale):
        return None
    if np.any(np.diff(pick) <= 0):
        return None
    return pick


def _check_count(I) -> int:
    if int(I) != I or I < 1:
        raise InvalidArgument(f"number of cells must be a positive integer, got {I!r}")
    return int(I)


def build_uniform(x_min: float, x_max: float, I: int) -> Grid:
    I = _check_count(I)
    if not (x_max > x_min >= 0.0):
        raise InvalidArgument(f"need x_max > x_min >= 0, got [{x_min}, {x_max}]")
    h = (x_max - x_min) / I
    b = x_min + h * np.arange(I + 1, dtype=np.float64)
    b[-1] = x_max
    return Grid(b, MeshFamily.UNIFORM)


def build_geometric(x_min: float, x_max: float, I: int) -> Grid:
    """Boundaries ``x_min * r**i`` with ``r = (x_max/x_min)**(1/I)``."""
    I = _check_count(I)
    if not x_min > 0.0:
        raise InvalidArgument("geometric grids need x_min > 0")
    if not x_max > x_min:
        raise InvalidArgument(f"need x_max > x_min, got [{x_min}, {x_max}]")
    # exp of a uniform log-grid: coarse and fine boundaries coincide up to rounding
    log_b = np.linspace(np.log(x_min), np.log(x_max), I + 1)
    b = np.exp(log_b)
    b[0] = x_min
    b[-1] = x_max
    return Grid(b, MeshFamily.GEOMETRIC)


def geometric_ratio(x_min: float, x_max: float, I: int) -> float:
    return float((x_max / x_min) ** (1.0 / I))


def _split(b: np.ndarray, fractions) -> np.ndarray:
    left, right = b[:-1], b[1:]
    inner = left + fractions * (right - left)
    out = np.empty(2 * (b.size - 1) + 1)
    out[0::2] = b
    out[1::2] = inner
    return out


def _check_levels(levels) -> int:
    if int(levels) != levels or levels < 0:
        raise InvalidArgument(f"levels must be a non-negative integer, got {levels!r}")
    return int(levels)


def refine_locally_uniform(base: Grid, levels: int) -> Grid:
    """Bisect every cell ``levels`` times (``2**levels`` equal children per base cell)."""
    levels = _check_levels(levels)
    b = base.boundaries
    for _ in range(levels):
        b = _split(b, 0.5)
    return Grid(b, MeshFamily.LOCALLY_UNIFORM, levels=base.levels + levels)


def refine_oscillatory(base: Grid, levels: int) -> Grid:
    """Split every cell 1:2 (left child one third of the parent) at each level."""
    levels = _check_levels(levels)
    b = base.boundaries
    for _ in range(levels):
        b = _split(b, 1.0 / 3.0)
    return Grid(b, MeshFamily.OSCILLATORY, levels=base.levels + levels)


def refine_random(base: Grid, levels: int, seed: int, split_range=RANDOM_SPLIT_RANGE) -> Grid:
    """Split every cell at a uniformly drawn fraction of its width.

    Levels consume the random stream in order, so the grid for ``levels`` is
    always a refinement of the grid for ``levels - 1`` with the same seed.
    """
    levels = _check_levels(levels)
    lo, hi = split_range
    if not (0.0 < lo <= hi < 1.0):
        raise InvalidArgument(f"split range must lie inside (0, 1), got {split_range!r}")
    rng = np.random.default_rng(seed)
    b = base.boundaries
    for _ in range(levels):
        b = _split(b, rng.uniform(lo, hi, size=b.size - 1))
    return Grid(b, MeshFamily.RANDOM, seed=seed, levels=base.levels + levels)
