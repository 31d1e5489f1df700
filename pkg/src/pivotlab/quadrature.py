"""Composite Gauss-Legendre rules on cell partitions."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panel_edges(boundaries: np.ndarray, panels_per_cell: int = 1) -> np.ndarray:
    """Subdivide every cell into ``panels_per_cell`` equal panels."""
    b = np.asarray(boundaries, dtype=np.float64)
    if panels_per_cell == 1:
        return b.copy()
    t = np.arange(panels_per_cell) / panels_per_cell
    inner = b[:-1, None] + t[None, :] * np.diff(b)[:, None]
    return np.append(inner.ravel(), b[-1])


def panel_nodes(edges: np.ndarray, order: int):
    """Quadrature nodes and weights for every panel, shape ``(n_panels, order)``."""
    xi, wi = gauss_legendre(order)
    left, width = edges[:-1, None], np.diff(edges)[:, None]
    x = left + 0.5 * (xi[None, :] + 1.0) * width
    w = 0.5 * wi[None, :] * width
    return x, w


def cell_integrals(f, boundaries, order: int = 8, panels_per_cell: int = 1) -> np.ndarray:
    """Integral of ``f`` over every cell of ``boundaries``.

    Summation inside a cell runs over panels and nodes in a fixed order, so the
    result does not depend on how cells are batched.
    """
    b = np.asarray(boundaries, dtype=np.float64)
    edges = panel_edges(b, panels_per_cell)
    x, w = panel_nodes(edges, order)
    per_panel = np.sum(w * f(x), axis=1)
    return per_panel.reshape(b.size - 1, panels_per_cell).sum(axis=1)


def integrate_interval(f, a: float, b: float, order: int = 8, panels: int = 1) -> float:
    edges = np.linspace(a, b, panels + 1)
    x, w = panel_nodes(edges, order)
    return float(np.sum(w * f(x)))


def adaptive_integral(f, a: float, b: float, order: int = 8, atol: float = 1e-12,
                      max_panels: int = 1 << 14):
    """Composite Gauss with panel doubling until two passes agree to ``atol``.

    Returns ``(value, panels)``; raises ``ArithmeticError`` if ``max_panels`` is hit.
    """
    panels = 1
    prev = integrate_interval(f, a, b, order, panels)
    while panels < max_panels:
        panels *= 2
        cur = integrate_interval(f, a, b, order, panels)
        if abs(cur - prev) <= atol:
            return cur, panels
        prev = cur
    raise ArithmeticError(f"quadrature on [{a}, {b}] did not converge with {panels} panels")
