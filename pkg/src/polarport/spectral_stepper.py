"""One backward Crank-Nicolson collocation step on a mapped Chebyshev grid.

Interior rows encode (I/dt - L/2) v_new = (I/dt + L/2) v_old for the angular
operator L = g2 d2 + g1 d1 + g0.  The first and last rows are replaced by
first-derivative rows whose right-hand sides carry the gradient-constraint
ratios times the OLD-time endpoint values, i.e. the lagged Neumann form of
the mandatory-trade boundary conditions.  The dense system is refactorized
every step because the interval moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .chebyshev import MappedGrid
from .exceptions import SolverFailure
from .model import BUY, SELL, ModelParams, coefficients, gradient_ratio

# boundary row recipes: ("ratio", q) pins v'(end) = q * v_old(end),
# ("dirichlet", g) pins v(end) = g
BoundarySpec = tuple[str, float]


@dataclass
class StepSystem:
    """Factorized left-hand side plus everything needed to build right sides."""

    grid: MappedGrid
    dt: float
    g0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    top: BoundarySpec
    bottom: BoundarySpec
    lu: tuple
    lhs_norm: float

    def apply_operator(self, v: np.ndarray) -> np.ndarray:
        """L v at the nodes, computed from the coefficient arrays."""
        d1 = self.grid.reference.d1
        s = self.grid.scale
        dv = d1 @ v
        return self.g2 * (s * s) * (d1 @ dv) + self.g1 * s * dv + self.g0 * v

    def lhs_apply(self, v: np.ndarray) -> np.ndarray:
        """Left-hand-side matrix applied to v, reusing the operator pieces."""
        out = v / self.dt - 0.5 * self.apply_operator(v)
        d1 = self.grid.reference.d1
        s = self.grid.scale
        for idx, (kind, _) in ((0, self.top), (-1, self.bottom)):
            if kind == "ratio":
                out[idx] = s * (d1[idx] @ v)
            else:
                out[idx] = v[idx]
        return out

    def rhs(self, v_old: np.ndarray) -> np.ndarray:
        out = v_old / self.dt + 0.5 * self.apply_operator(v_old)
        for idx, (kind, val) in ((0, self.top), (-1, self.bottom)):
            out[idx] = val * v_old[idx] if kind == "ratio" else val
        return out


def build_step_system(grid: MappedGrid, dt: float, g0, g1, g2,
                      top: BoundarySpec, bottom: BoundarySpec) -> StepSystem:
    """Assemble and factorize the dense left-hand side."""
    if not dt > 0.0:
        raise SolverFailure("dt must be positive", dt=dt)
    n = grid.n
    s = grid.scale
    d1 = grid.reference.d1
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    # build the transpose in C order: its .T view is Fortran-ordered, which
    # LAPACK factorizes in place without a layout copy
    lhs_t = grid.reference.d2_t * ((-0.5 * s * s) * g2)[None, :]
    lhs_t += grid.reference.d1_t * ((-0.5 * s) * g1)[None, :]
    idx = np.arange(n + 1)
    lhs_t[idx, idx] += 1.0 / dt - 0.5 * g0
    for row, (kind, _) in ((0, top), (-1, bottom)):
        if kind == "ratio":
            lhs_t[:, row] = s * d1[row, :]
        elif kind == "dirichlet":
            lhs_t[:, row] = 0.0
            lhs_t[row, row] = 1.0
        else:
            raise ValueError(f"unknown boundary row kind {kind!r}")
    lhs_norm = float(np.abs(lhs_t).sum(axis=0).max())
    try:
        lu = lu_factor(lhs_t.T, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure("singular collocation matrix",
                            n=n, dt=dt, interval=(grid.a1, grid.a2)) from exc
    return StepSystem(grid=grid, dt=dt, g0=g0, g1=g1, g2=g2,
                      top=top, bottom=bottom, lu=lu, lhs_norm=lhs_norm)


def assemble(grid: MappedGrid, p: ModelParams, dt: float) -> StepSystem:
    """Production system: lagged sell row at theta[0], lagged buy row at theta[n]."""
    g0, g1, g2 = coefficients(grid.theta, p)
    top = ("ratio", gradient_ratio(grid.theta[0], SELL, p))
    bottom = ("ratio", gradient_ratio(grid.theta[-1], BUY, p))
    return build_step_system(grid, dt, g0, g1, g2, top, bottom)


def step(sys: StepSystem, v_old: np.ndarray,
         residual_out: Optional[list] = None) -> np.ndarray:
    """Advance one backward step: solve for the new-time nodal values.

    The residual of the solved system is always checked; one pass of
    iterative refinement is applied if it misses the tolerance, and a
    persistent miss raises with full context.
    """
    v_old = np.asarray(v_old, dtype=float)
    if v_old.shape != (sys.grid.n + 1,):
        raise ValueError(f"expected {sys.grid.n + 1} nodal values, got {v_old.shape}")
    if not np.all(np.isfinite(v_old)):
        raise ValueError("non-finite nodal values")
    b = sys.rhs(v_old)
    v_hat = lu_solve(sys.lu, b, check_finite=False)
    rhs_scale = 1.0 + float(np.abs(b).max())
    eps = np.finfo(float).eps

    def residual(v):
        return b - sys.lhs_apply(v.copy())

    def tolerance(v):
        # the first term is the contract; the second is the backward-stability
        # floor of a dense LU, which dominates only at very large n
        return 1e-10 * rhs_scale + 64.0 * eps * sys.lhs_norm * (1.0 + float(np.abs(v).max()))

    r = residual(v_hat)
    if float(np.abs(r).max()) > tolerance(v_hat):
        v_hat = v_hat + lu_solve(sys.lu, r, check_finite=False)
        r = residual(v_hat)
        if float(np.abs(r).max()) > tolerance(v_hat):
            raise SolverFailure(
                "collocation solve residual out of tolerance",
                residual=float(np.abs(r).max()), tol=tolerance(v_hat),
                n=sys.grid.n, dt=sys.dt, interval=(sys.grid.a1, sys.grid.a2))
    if not np.all(np.isfinite(v_hat)):
        raise SolverFailure("non-finite step output",
                            n=sys.grid.n, dt=sys.dt,
                            interval=(sys.grid.a1, sys.grid.a2))
    if residual_out is not None:
        residual_out.append(float(np.abs(r).max()))
    return v_hat
