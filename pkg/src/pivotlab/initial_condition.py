"""Initial number densities and their projection onto cell totals."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .quadrature import cell_integrals

DEFAULT_ORDER = 8


class DensityKind(str, enum.Enum):
    NORMAL = "normal"
    EXPONENTIAL = "exponential"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class DensitySpec:
    """Number density ``n_in(x)``.

    ``normal`` takes ``mu`` and ``sigma2`` (the variance), ``exponential`` takes
    ``alpha`` and ``tabulated`` takes sample arrays ``x`` and ``n`` that are
    interpolated piecewise linearly (zero outside the table).
    """

    kind: DensityKind
    mu: float = 0.0
    sigma2: float = 1.0
    alpha: float = 1.0
    x: np.ndarray | None = field(default=None, repr=False)
    n: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        try:
            kind = DensityKind(str(getattr(self.kind, "value", self.kind)).lower())
        except ValueError:
            raise InvalidArgument(f"unknown density kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if kind is DensityKind.NORMAL and not self.sigma2 > 0:
            raise InvalidArgument("normal density needs sigma2 > 0")
        if kind is DensityKind.EXPONENTIAL and not self.alpha > 0:
            raise InvalidArgument("exponential density needs alpha > 0")
        if kind is DensityKind.TABULATED:
            if self.x is None or self.n is None:
                raise InvalidArgument("tabulated density needs x and n samples")
            x = np.asarray(self.x, dtype=np.float64)
            n = np.asarray(self.n, dtype=np.float64)
            if x.shape != n.shape or x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
                raise InvalidArgument("tabulated samples must be 1-D, equal length, increasing x")
            if np.any(n < 0):
                raise InvalidArgument("tabulated density must be nonnegative")
            object.__setattr__(self, "x", x)
            object.__setattr__(self, "n", n)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def __call__(self, x):
        return eval_density(self, x)

    def __str__(self) -> str:
        if self.kind is DensityKind.NORMAL:
            return f"normal:{self.mu:g},{self.sigma2:g}"
        if self.kind is DensityKind.EXPONENTIAL:
            return f"exponential:{self.alpha:g}"
        return f"tabulated[{self.x.size}]"


def eval_density(spec: DensitySpec, x):
    x = np.asarray(x, dtype=np.float64)
    if spec.kind is DensityKind.NORMAL:
        s = spec.sigma
        return np.exp(-((x - spec.mu) ** 2) / (2.0 * spec.sigma2)) / (s * math.sqrt(2.0 * math.pi))
    if spec.kind is DensityKind.EXPONENTIAL:
        return np.exp(-spec.alpha * x)
    return np.interp(x, spec.x, spec.n, left=0.0, right=0.0)


def project_to_cells(spec: DensitySpec, grid, order: int = DEFAULT_ORDER, panels_per_cell: int = 1):
    """Cell totals ``N_i = integral of n_in over cell i``; ghost ledger starts empty."""
    from .fixed_pivot import StateVector

    totals = cell_integrals(spec, grid.boundaries, order=order, panels_per_cell=panels_per_cell)
    return StateVector(totals)


def parse_density(text: str) -> DensitySpec:
    """Parse ``"normal:mu,sigma2"`` or ``"exponential:alpha"``."""
    if not isinstance(text, str) or ":" not in text:
        raise InvalidArgument(f"density must look like 'kind:params', got {text!r}")
    kind, _, params = text.strip().partition(":")
    kind = kind.strip().lower()
    try:
        values = [float(p) for p in params.split(",") if p.strip()]
    except ValueError:
        raise InvalidArgument(f"bad density parameters in {text!r}") from None
    if kind == DensityKind.NORMAL.value:
        if len(values) != 2:
            raise InvalidArgument("normal density needs 'normal:mu,sigma2'")
        return DensitySpec(DensityKind.NORMAL, mu=values[0], sigma2=values[1])
    if kind == DensityKind.EXPONENTIAL.value:
        if len(values) != 1:
            raise InvalidArgument("exponential density needs 'exponential:alpha'")
        return DensitySpec(DensityKind.EXPONENTIAL, alpha=values[0])
    raise InvalidArgument(f"unknown density kind {kind!r}")
