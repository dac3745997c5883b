"""Central-difference baseline: the same backward adaptive algorithm with the
PDE step discretized by second-order stencils on a uniform grid.

Interior rows use the 3-point second derivative and the centered first
derivative; the endpoint rows impose the lagged Neumann conditions through
one-sided second-order differences, so the system is banded with two
off-diagonals on each side.  Uniform nodes do not land on the frontiers, so
frontier positions are tracked at sub-grid resolution by linear
interpolation of the nodal obstacle values, and slice re-projection goes
through a cubic spline (a lower-order interpolant would pollute the
second-order stencil error after many regrids).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .exceptions import FrontierDetectionError, SolverFailure
from .model import BUY, SELL, ModelParams, coefficients, extend, gradient_ratio

BoundarySpec = tuple[str, float]


@dataclass(frozen=True)
class UniformGrid:
    """n subintervals of [a1, a2]; nodes ascending."""

    a1: float
    a2: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 4:
            raise SolverFailure("need at least 4 subintervals", n=self.n)
        if not self.a1 < self.a2:
            raise SolverFailure("need a1 < a2", interval=(self.a1, self.a2))
        object.__setattr__(self, "h", (self.a2 - self.a1) / self.n)
        object.__setattr__(self, "nodes",
                           np.linspace(self.a1, self.a2, self.n + 1))


def fd_step_custom(grid: UniformGrid, v_old: np.ndarray, dt: float,
                   g0, g1, g2, bottom: BoundarySpec, top: BoundarySpec) -> np.ndarray:
    """One Crank-Nicolson step with injectable endpoint rows (for testing)."""
    if not dt > 0.0:
        raise SolverFailure("dt must be positive", dt=dt)
    v_old = np.asarray(v_old, dtype=float)
    n = grid.n
    h = grid.h
    if v_old.shape != (n + 1,):
        raise ValueError(f"expected {n + 1} nodal values, got {v_old.shape}")
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)

    lo = g2 / h**2 - g1 / (2.0 * h)      # coefficient of v[i-1] in L
    di = -2.0 * g2 / h**2 + g0           # coefficient of v[i]
    up = g2 / h**2 + g1 / (2.0 * h)      # coefficient of v[i+1]

    # banded storage for solve_banded((2, 2), ...): ab[u + i - j, j] = A[i, j]
    ab = np.zeros((5, n + 1))
    ab[1, 2:] = -0.5 * up[1:-1]          # A[i, i+1]
    ab[2, 1:-1] = 1.0 / dt - 0.5 * di[1:-1]
    ab[3, :-2] = -0.5 * lo[1:-1]         # A[i, i-1]

    rhs = np.empty(n + 1)
    rhs[1:-1] = (v_old[1:-1] / dt
                 + 0.5 * (lo[1:-1] * v_old[:-2] + di[1:-1] * v_old[1:-1]
                          + up[1:-1] * v_old[2:]))

    kind, val = bottom
    if kind == "ratio":
        ab[2, 0] = -3.0 / (2.0 * h)
        ab[1, 1] = 4.0 / (2.0 * h)
        ab[0, 2] = -1.0 / (2.0 * h)
        rhs[0] = val * v_old[0]
    elif kind == "dirichlet":
        ab[2, 0] = 1.0
        ab[1, 1] = 0.0
        ab[0, 2] = 0.0
        rhs[0] = val
    else:
        raise ValueError(f"unknown boundary row kind {kind!r}")

    kind, val = top
    if kind == "ratio":
        ab[2, n] = 3.0 / (2.0 * h)
        ab[3, n - 1] = -4.0 / (2.0 * h)
        ab[4, n - 2] = 1.0 / (2.0 * h)
        rhs[n] = val * v_old[n]
    elif kind == "dirichlet":
        ab[2, n] = 1.0
        ab[3, n - 1] = 0.0
        ab[4, n - 2] = 0.0
        rhs[n] = val
    else:
        raise ValueError(f"unknown boundary row kind {kind!r}")

    try:
        v_hat = solve_banded((2, 2), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure("singular banded system", n=n, dt=dt,
                            interval=(grid.a1, grid.a2)) from exc
    if not np.all(np.isfinite(v_hat)):
        raise SolverFailure("non-finite step output", n=n, dt=dt,
                            interval=(grid.a1, grid.a2))
    return v_hat


def fd_step(grid: UniformGrid, v_old: np.ndarray, p: ModelParams,
            dt: float) -> np.ndarray:
    """Production step: lagged buy row at a1, lagged sell row at a2."""
    g0, g1, g2 = coefficients(grid.nodes, p)
    bottom = ("ratio", gradient_ratio(grid.a1, BUY, p))
    top = ("ratio", gradient_ratio(grid.a2, SELL, p))
    return fd_step_custom(grid, v_old, dt, g0, g1, g2, bottom, top)


def nodal_gradient(grid: UniformGrid, v: np.ndarray) -> np.ndarray:
    """Second-order nodal derivative: centered inside, one-sided at the ends."""
    return np.gradient(np.asarray(v, dtype=float), grid.h, edge_order=2)


def fd_obstacles(grid: UniformGrid, v_hat: np.ndarray, v_old: np.ndarray,
                 p: ModelParams, consistent_time: bool = False):
    dv = nodal_gradient(grid, v_hat)
    sell_side = v_hat if consistent_time else np.asarray(v_old, dtype=float)
    p1 = dv - np.asarray(v_hat) * gradient_ratio(grid.nodes, BUY, p)
    p2 = dv - sell_side * gradient_ratio(grid.nodes, SELL, p)
    return p1, p2


def fd_locate_frontiers(grid: UniformGrid, v_hat: np.ndarray,
                        v_old: np.ndarray, p: ModelParams,
                        consistent_time: bool = False,
                        anchors=None) -> tuple[float, float]:
    """Sub-grid frontier positions from nodal obstacle values.

    Same extreme-sign-change semantics as the spectral locator (upward scan
    for the selling frontier starting just below its previous position,
    downward scan out of the no-transaction region for the buying one); the
    brackets are resolved by linear interpolation of the nodal values.
    """
    from .frontier import scan_buy_crossing, scan_sell_crossing

    p1, p2 = fd_obstacles(grid, v_hat, v_old, p, consistent_time)
    nodes = grid.nodes

    anchor = anchors[1] if anchors else None
    try:
        k = scan_sell_crossing(nodes, p2, anchor)
    except FrontierDetectionError:
        if consistent_time:
            raise
        # lagged P2 is degenerate during the first steps after the horizon;
        # fall back to the all-new-time variant, identical up to O(dt)
        _, p2 = fd_obstacles(grid, v_hat, v_old, p, consistent_time=True)
        k = scan_sell_crossing(nodes, p2, anchor)
    sr = nodes[k - 1] + grid.h * p2[k - 1] / (p2[k - 1] - p2[k])

    i = scan_buy_crossing(nodes, p1, sr)
    if i is None:
        br = grid.a1
    else:
        br = nodes[i] + grid.h * p1[i] / (p1[i] - p1[i + 1])
    return float(br), float(sr)


def _spline(grid: UniformGrid, v: np.ndarray) -> CubicSpline:
    return CubicSpline(grid.nodes, np.asarray(v, dtype=float))


def fd_project(new_grid: UniformGrid, prev_grid: UniformGrid,
               v_hat: np.ndarray, br: float, sr: float,
               p: ModelParams) -> np.ndarray:
    """Re-projection onto the next slice grid, spline inside [br, sr]."""
    slack = 1e-12 * (prev_grid.a2 - prev_grid.a1)
    if br < prev_grid.a1 - slack or sr > prev_grid.a2 + slack:
        raise SolverFailure("frontiers escape the previous slice interval",
                            br=br, sr=sr,
                            interval=(prev_grid.a1, prev_grid.a2))
    spline = _spline(prev_grid, v_hat)
    anchor_b = float(spline(max(br, prev_grid.a1)))
    anchor_s = float(spline(sr))
    theta = new_grid.nodes
    below = theta < br
    above = theta > sr
    mid = ~(below | above)
    v_new = np.empty_like(theta)
    if np.any(mid):
        v_new[mid] = spline(theta[mid])
    if np.any(below):
        v_new[below] = extend(theta[below], br, anchor_b, BUY, p)
    if np.any(above):
        v_new[above] = extend(theta[above], sr, anchor_s, SELL, p)
    return v_new


def fd_evaluate_profile(grid: UniformGrid, v: np.ndarray, br: float,
                        sr: float, p: ModelParams, theta):
    """(V, V_theta) of an FD slice at arbitrary angles."""
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    lower = max(br, grid.a1)
    upper = min(sr, grid.a2)
    below = theta_arr < lower
    above = theta_arr > upper
    mid = ~(below | above)
    V = np.empty_like(theta_arr)
    dV = np.empty_like(theta_arr)
    spline = _spline(grid, v)
    if np.any(mid):
        V[mid] = spline(theta_arr[mid])
        dV[mid] = spline(theta_arr[mid], 1)
    if np.any(below):
        anchor = float(spline(lower))
        V[below] = extend(theta_arr[below], lower, anchor, BUY, p)
        dV[below] = gradient_ratio(theta_arr[below], BUY, p) * V[below]
    if np.any(above):
        anchor = float(spline(upper))
        V[above] = extend(theta_arr[above], upper, anchor, SELL, p)
        dV[above] = gradient_ratio(theta_arr[above], SELL, p) * V[above]
    if np.ndim(theta) == 0:
        return float(V[0]), float(dV[0])
    return V, dV
