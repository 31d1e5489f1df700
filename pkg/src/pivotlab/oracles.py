"""
Independent reference computations used to check the scheme.

Nothing here uses the event table: the direct right-hand side enumerates pairs
with its own binning, the continuous birth and death integrals are evaluated by
composite Gauss quadrature, and reference solutions come either from closed
forms (exponential initial data) or from a nested fine-grid solve.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, i1e, logsumexp

from .errors import InvalidArgument, UnsupportedCombination
from .fixed_pivot import StateVector, birth_death, build_event_table
from .grid import MeshFamily, build_geometric, build_uniform, refine_locally_uniform
from .initial_condition import DensityKind, DensitySpec, project_to_cells
from .kernel import KernelKind, KernelSpec, eval_kernel
from .quadrature import adaptive_integral, cell_integrals, gauss_legendre, panel_edges, panel_nodes


@dataclass(frozen=True)
class QuadratureSpec:
    gauss_order: int = 8
    panels_per_cell: int = 4

    def __post_init__(self):
        if self.gauss_order < 2:
            raise InvalidArgument("gauss_order must be at least 2")
        if self.panels_per_cell < 1:
            raise InvalidArgument("panels_per_cell must be at least 1")


# ---------------------------------------------------------------------------
# direct right-hand side


def rhs_direct(state: StateVector, grid, kernel: KernelSpec) -> StateVector:
    """Plain double loop over all pairs ``k <= j`` with inline binning."""
    x = [float(v) for v in grid.pivots]
    I = len(x)
    N = [float(v) for v in state.N]
    if len(N) != I:
        raise InvalidArgument(f"state has {len(N)} cells, grid has {I}")
    x_ext = x + [grid.ghost_pivot]
    K = kernel

    dN = [0.0] * I
    ghost_count = 0.0
    ghost_mass = 0.0
    for j in range(I):
        for k in range(j + 1):
            v = x[j] + x[k]
            rate = (0.5 if j == k else 1.0) * float(eval_kernel(K, x[k], x[j])) * N[j] * N[k]
            i = bisect_right(x_ext, v) - 1
            if i >= I:
                ghost_count += rate
                ghost_mass += rate * v
                continue
            lam_plus = (v - x_ext[i + 1]) / (x_ext[i] - x_ext[i + 1])
            lam_minus = (v - x_ext[i]) / (x_ext[i + 1] - x_ext[i])
            dN[i] += lam_plus * rate
            if i + 1 < I:
                dN[i + 1] += lam_minus * rate
            else:
                ghost_count += lam_minus * rate
                ghost_mass += lam_minus * rate * x_ext[i + 1]
    for i in range(I):
        loss = 0.0
        for j in range(I):
            loss += float(eval_kernel(K, x[i], x[j])) * N[j]
        dN[i] -= N[i] * loss
    return StateVector(np.array(dN), ghost_count, ghost_mass)


# ---------------------------------------------------------------------------
# modification error of the birth redistribution


def _neighbours(grid, i):
    x = grid.pivots
    I = x.size
    if not 0 <= i < I:
        raise InvalidArgument(f"cell index {i} outside 0..{I - 1}")
    x_next = grid.ghost_pivot if i == I - 1 else float(x[i + 1])
    x_prev = float(x[i - 1]) if i > 0 else None
    return float(x[i]), x_prev, x_next


def modification_error(f, grid, i: int, atol: float = 1e-12) -> float:
    """Cell integral of ``f`` minus its two hat-weighted redistributions (0-based ``i``).

    The first cell has no lower redistribution; the last cell uses the extra
    pivot ``x_{I+1}`` as its upper neighbour.
    """
    xi, x_prev, x_next = _neighbours(grid, i)
    lo, hi = float(grid.boundaries[i]), float(grid.boundaries[i + 1])

    total, _ = adaptive_integral(f, lo, hi, atol=atol / 4)
    plus, _ = adaptive_integral(lambda s: (s - x_next) / (xi - x_next) * f(s), xi, x_next,
                                atol=atol / 4)
    minus = 0.0
    if x_prev is not None:
        minus, _ = adaptive_integral(lambda s: (s - x_prev) / (xi - x_prev) * f(s), x_prev, xi,
                                     atol=atol / 4)
    return total - plus - minus


def modification_error_leading(f, fprime, grid, i: int) -> float:
    """Leading-order expansion of :func:`modification_error` about the pivot."""
    w = grid.widths
    I = w.size
    xi = float(grid.pivots[i])
    if i == 0:
        return f(xi) / 4 * (3 * w[0] - w[1])
    if i == I - 1:
        return f(xi) / 4 * (w[i] - w[i - 1])
    avg = (w[i - 1] + w[i + 1]) / 2
    return f(xi) / 2 * (w[i] - avg) - fprime(xi) / 12 * ((w[i + 1] - w[i - 1]) * (w[i] + avg))


# ---------------------------------------------------------------------------
# spatial truncation error


def continuous_birth_death(density, grid, kernel: KernelSpec, quad: QuadratureSpec = QuadratureSpec(),
                           chunk: int = 512):
    """Cell integrals of the continuous birth and death terms for a frozen density.

    Both aggregation partners are restricted to the computational domain
    ``[x_{1/2}, x_{I+1/2}]``. The inner convolution integral is split at every
    panel edge below the outer point, plus one partial panel.
    """
    b = np.asarray(grid.boundaries)
    lo = float(b[0])
    I = b.size - 1
    G, P = quad.gauss_order, quad.panels_per_cell
    edges = panel_edges(b, P)
    X, WX = panel_nodes(edges, G)
    X, WX = X.ravel(), WX.ravel()
    cell_of = np.repeat(np.arange(I), P * G)

    Y, WY = panel_nodes(edges, G)
    right = np.repeat(edges[1:], G)
    Y, WY = Y.ravel(), WY.ravel()
    nY = density(Y)
    xi, wi = gauss_legendre(G)

    birth_pt = np.empty_like(X)
    death_pt = np.empty_like(X)
    for s in range(0, X.size, chunk):
        x = X[s:s + chunk]
        u = x - lo
        # full panels lie below u; only those left of the chunk's largest u matter
        m_all = np.searchsorted(edges, u, side="right") - 1
        last = int(np.searchsorted(right, u.max(), side="right"))
        y, wy, ny, ry = Y[:last], WY[:last], nY[:last], right[:last]
        full = ry[None, :] <= u[:, None]
        z = x[:, None] - y[None, :]
        vals = np.where(full, eval_kernel(kernel, z, y[None, :]) * density(np.where(full, z, lo))
                        * ny[None, :] * wy[None, :], 0.0)
        inner = vals.sum(axis=1)

        m = np.clip(m_all, 0, edges.size - 1)
        p_lo = edges[m]
        h = np.maximum(u - p_lo, 0.0)
        yp = p_lo[:, None] + 0.5 * (xi[None, :] + 1.0) * h[:, None]
        wp = 0.5 * wi[None, :] * h[:, None]
        zp = x[:, None] - yp
        inner += np.sum(eval_kernel(kernel, zp, yp) * density(zp) * density(yp) * wp, axis=1)
        birth_pt[s:s + chunk] = 0.5 * inner

        kd = eval_kernel(kernel, x[:, None], Y[None, :])
        death_pt[s:s + chunk] = density(x) * np.sum(kd * nY[None, :] * WY[None, :], axis=1)

    B = np.bincount(cell_of, weights=WX * birth_pt, minlength=I)
    D = np.bincount(cell_of, weights=WX * death_pt, minlength=I)
    return B, D


def truncation_error(density, grid, kernel: KernelSpec, quad: QuadratureSpec = QuadratureSpec(),
                     check: bool = False, rtol: float = 1e-10) -> np.ndarray:
    """Per-cell residual ``(B - D) - (B_hat - D_hat)`` for a frozen density.

    With ``check=True`` the continuous terms are recomputed with twice the
    panels and an ``ArithmeticError`` naming both panel counts is raised if they
    moved by more than ``rtol`` relative.
    """
    B, D = continuous_birth_death(density, grid, kernel, quad)
    if check:
        finer = QuadratureSpec(quad.gauss_order, 2 * quad.panels_per_cell)
        B2, D2 = continuous_birth_death(density, grid, kernel, finer)
        scale = max(np.abs(B).sum() + np.abs(D).sum(), np.finfo(float).tiny)
        change = np.abs(B2 - B).sum() + np.abs(D2 - D).sum()
        if change > rtol * scale:
            raise ArithmeticError(
                f"quadrature not converged: {quad.panels_per_cell} vs "
                f"{finer.panels_per_cell} panels per cell differ by {change / scale:.2e}")
    N = project_to_cells(density, grid, order=quad.gauss_order, panels_per_cell=quad.panels_per_cell)
    Bh, Dh = birth_death(N.N, build_event_table(grid, kernel))
    return (B - D) - (Bh - Dh)


# ---------------------------------------------------------------------------
# moments and closed-form solutions on the untruncated half-line


def analytic_moments(kernel: KernelSpec, M0_0: float, M1_0: float, t: float):
    """Zeroth and first moments of the untruncated equation at time ``t``.

    The product-kernel formula is only meaningful before gelation.
    """
    k0 = kernel.k0
    if kernel.kind is KernelKind.CONSTANT:
        M0 = M0_0 / (1.0 + 0.5 * k0 * M0_0 * t)
    elif kernel.kind is KernelKind.SUM:
        M0 = M0_0 * math.exp(-k0 * M1_0 * t)
    else:
        M0 = M0_0 - 0.5 * k0 * M1_0 ** 2 * t
    return M0, M1_0


def exact_density(kernel: KernelSpec, ic: DensitySpec, t: float):
    """Closed-form solution for ``n_in(x) = exp(-alpha x)`` as a vectorized callable."""
    if ic.kind is not DensityKind.EXPONENTIAL:
        raise UnsupportedCombination(f"no closed form for {ic.kind.value} initial data")
    v0 = 1.0 / ic.alpha      # mean size
    N0 = 1.0 / ic.alpha      # total number
    amp = N0 / v0
    k0 = kernel.k0
    if t == 0:
        return ic

    if kernel.kind is KernelKind.CONSTANT:
        tau = 0.5 * k0 * N0 * t

        def n(x):
            x = np.asarray(x, dtype=np.float64)
            return amp / (1 + tau) ** 2 * np.exp(-x / (v0 * (1 + tau)))

        return n

    if kernel.kind is KernelKind.SUM:
        tau = -math.expm1(-k0 * N0 * v0 * t)
        sq = math.sqrt(tau)

        def n(x):
            x = np.asarray(x, dtype=np.float64)
            z = 2.0 * x * sq / v0
            # I1(z) exp(-(1+tau) x/v0) = i1e(z) exp(-(1 - sqrt(tau))**2 x/v0)
            return N0 * (1 - tau) / (x * sq) * i1e(z) * np.exp(-((1 - sq) ** 2) * x / v0)

        return n

    M1 = N0 * v0
    kt = k0 * t

    def n(x):
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        zmax = kt * amp * float(flat.max()) ** 3 if flat.size else 0.0
        K = int(3 * (zmax / 4) ** (1 / 3)) + 40
        kk = np.arange(1, K + 1, dtype=np.float64)
        logc = (kk - 1) * math.log(kt) + kk * math.log(amp) - gammaln(kk + 1) - gammaln(2 * kk)
        out = np.empty_like(flat)
        for s in range(0, flat.size, 4096):
            xs = flat[s:s + 4096]
            terms = logc[None, :] + (3 * kk[None, :] - 3) * np.log(xs)[:, None]
            out[s:s + 4096] = np.exp(logsumexp(terms, axis=1) - xs * (1.0 / v0 + kt * M1))
        return out.reshape(x.shape)

    return n


def _fine_grid_for(grid, levels: int = 2):
    f = grid.family
    if f is MeshFamily.UNIFORM:
        return build_uniform(grid.x_min, grid.x_max, grid.n_cells << levels)
    if f is MeshFamily.GEOMETRIC:
        return build_geometric(grid.x_min, grid.x_max, grid.n_cells << levels)
    return refine_locally_uniform(grid, levels)


def reference_solution(kernel: KernelSpec, ic: DensitySpec, grid, t: float, mode: str = "fine",
                       fine_grid=None, dt: float = 1e-3 / 4, quad: QuadratureSpec = QuadratureSpec()):
    """Cell totals of a reference solution on ``grid`` at time ``t``.

    ``mode="fine"`` solves on a nested grid with four times the cells (or the
    supplied ``fine_grid``) and sums the fine totals onto ``grid``.
    ``mode="exact"`` integrates the closed-form density over each cell.
    """
    if kernel.kind not in (KernelKind.SUM, KernelKind.PRODUCT) or ic.kind is not DensityKind.EXPONENTIAL:
        raise UnsupportedCombination(
            f"reference solutions need a sum or product kernel with exponential data, "
            f"got {kernel.kind.value}/{ic.kind.value}")
    if t == 0:
        return project_to_cells(ic, grid)
    if mode == "exact":
        n = exact_density(kernel, ic, t)
        return StateVector(cell_integrals(n, grid.boundaries, quad.gauss_order, quad.panels_per_cell))
    if mode != "fine":
        raise InvalidArgument(f"unknown reference mode {mode!r}")

    from .convergence import project_fine_to_coarse
    from .integrator import IntegrationConfig, integrate

    fine = fine_grid if fine_grid is not None else _fine_grid_for(grid)
    state0 = project_to_cells(ic, fine)
    cfg = IntegrationConfig(t_end=t, dt=dt, monitor_interval=10 ** 9)
    final, _ = integrate(state0, build_event_table(fine, kernel), cfg)
    return project_fine_to_coarse(final, fine, grid)
