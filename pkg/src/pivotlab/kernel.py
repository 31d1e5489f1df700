"""Aggregation rate functions K(x, y)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


class KernelKind(str, enum.Enum):
    CONSTANT = "constant"
    SUM = "sum"
    PRODUCT = "product"


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric aggregation kernel with rate coefficient ``k0``.

    ``K(x, 0) = 0`` is the usual convention, but pivots are always strictly
    positive so the kernel is only ever evaluated on positive sizes.
    """

    kind: KernelKind
    k0: float = 1.0

    def __post_init__(self):
        try:
            kind = KernelKind(str(getattr(self.kind, "value", self.kind)).lower())
        except ValueError:
            raise InvalidArgument(f"unknown kernel kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        k0 = float(self.k0)
        if not (np.isfinite(k0) and k0 > 0.0):
            raise InvalidArgument(f"kernel coefficient must be positive, got {self.k0!r}")
        object.__setattr__(self, "k0", k0)

    def __call__(self, x, y):
        return eval_kernel(self, x, y)

    @property
    def fingerprint(self) -> str:
        return f"{self.kind.value}:{self.k0!r}"

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.k0:g}"


def eval_kernel(spec: KernelSpec, x, y):
    """Evaluate K(x, y); broadcasts over numpy arrays."""
    if spec.kind is KernelKind.CONSTANT:
        shape = np.broadcast(x, y).shape
        return np.full(shape, spec.k0) if shape else spec.k0
    if spec.kind is KernelKind.SUM:
        return spec.k0 * (x + y)
    return spec.k0 * (x * y)


def sup_bound(spec: KernelSpec, grid) -> float:
    """Maximum of K over ``[0, x_max]**2``."""
    x_max = grid.x_max
    if spec.kind is KernelKind.CONSTANT:
        return spec.k0
    if spec.kind is KernelKind.SUM:
        return 2.0 * spec.k0 * x_max
    return spec.k0 * x_max * x_max


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``"constant:k0"``, ``"sum:k0"`` or ``"product:k0"`` (``k0`` defaults to 1)."""
    if not isinstance(text, str) or not text.strip():
        raise InvalidArgument(f"kernel must be a non-empty string, got {text!r}")
    kind, _, coeff = text.strip().partition(":")
    try:
        k0 = float(coeff) if coeff else 1.0
    except ValueError:
        raise InvalidArgument(f"bad kernel coefficient in {text!r}") from None
    return KernelSpec(kind.strip().lower(), k0)
