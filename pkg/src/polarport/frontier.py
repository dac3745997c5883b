"""Obstacle polynomials, frontier extraction, and slice projection.

After each backward step the two obstacle functions are scanned: P1 compares
the new-time profile against the buy constraint, P2 against the sell
constraint (P2 keeps the old-time value on its constraint side, exactly as
the scheme prescribes; a consistent_time switch evaluates both sides at the
new time for sensitivity studies).  The located frontiers then drive the
next interval, and the solution is re-projected onto it: collocation values
inside the no-transaction region, closed-form extensions outside, anchored
at the interpolated frontier values so the projection is continuous by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import chebyshev
from .chebyshev import MappedGrid, ReferenceGrid
from .exceptions import FrontierDetectionError, SolverFailure
from .model import BUY, SELL, ModelParams, extend, gradient_ratio
from .adaptive_mesh import MeshPolicy

_BISECT_WIDTH = 1e-10


@dataclass(frozen=True)
class TimeSlice:
    """Solution snapshot at one time level.

    br may sit slightly below zero near the onset time: the raw located
    value is kept, never clamped.
    """

    t: float
    grid: object
    v: np.ndarray
    br: float
    sr: float


@dataclass
class SolutionPath:
    """Backward sweep output: slices ordered from t = T down to t = 0."""

    params: ModelParams
    policy: MeshPolicy
    dt: float
    slices: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.slices])


class ProbeSet:
    """Chebyshev-spaced probe points shared by every slice of a solve.

    Both probes and nodes live on the same affine image of [-1, 1], so the
    barycentric evaluation kernel is interval-independent and can be built
    once per reference grid.
    """

    def __init__(self, reference: ReferenceGrid, factor: int = 8):
        m = factor * (reference.n + 1)
        # ascending in the mapped variable
        self.ref_points = np.cos(np.pi * np.arange(m) / (m - 1))[::-1].copy()
        self.kernel = chebyshev.bary_kernel(
            reference.nodes, reference.bary_weights, self.ref_points)

    def mapped(self, grid: MappedGrid) -> np.ndarray:
        half = 0.5 * (grid.a2 - grid.a1)
        mid = 0.5 * (grid.a2 + grid.a1)
        return half * self.ref_points + mid


def obstacle_values(grid: MappedGrid, v_hat: np.ndarray, v_old: np.ndarray,
                    theta, p: ModelParams, consistent_time: bool = False):
    """P1 and P2 at arbitrary angles inside the slice interval."""
    value = chebyshev.interpolate(grid, v_hat, theta)
    deriv = chebyshev.derivative_at(grid, v_hat, theta)
    sell_side = value if consistent_time else chebyshev.interpolate(grid, v_old, theta)
    p1 = deriv - value * gradient_ratio(theta, BUY, p)
    p2 = deriv - sell_side * gradient_ratio(theta, SELL, p)
    return p1, p2


def _bisect(f, lo: float, hi: float) -> float:
    f_lo = f(lo)
    while hi - lo > _BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        if (f(mid) < 0.0) == (f_lo < 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_sell_crossing(theta: np.ndarray, p2: np.ndarray,
                       anchor: Optional[float]) -> int:
    """Index k of the first strict downcross of P2 at or above the anchor.

    Returns k with p2[k-1] >= 0 > p2[k].  Scanning starts a few cells below
    the anchor (the previous selling frontier; it can only move up between
    steps), which skips the marginal zones near the interval ends where P2
    hovers around zero and its sign carries no information.
    """
    start = 1
    if anchor is not None:
        start = max(1, int(np.searchsorted(theta, anchor)) - 8)
    nonneg = np.nonzero(p2[start - 1:] >= 0.0)[0]
    if nonneg.size == 0:
        raise FrontierDetectionError(
            "sell frontier lost: P2 negative everywhere above the anchor",
            anchor=anchor, p2_max=float(p2.max()))
    j = start - 1 + int(nonneg[0])
    neg = np.nonzero(p2[j + 1:] < 0.0)[0]
    if neg.size == 0:
        raise FrontierDetectionError(
            "sell frontier not bracketed: P2 never goes negative",
            anchor=anchor, p2_min=float(p2.min()))
    return j + 1 + int(neg[0])


def scan_buy_crossing(theta: np.ndarray, p1: np.ndarray,
                      upper: float) -> Optional[int]:
    """Index i of the last downcross of P1 below ``upper``.

    Returns i with p1[i] >= 0 > p1[i+1], found by walking down from just
    below the selling frontier (P1 is strictly negative throughout the
    no-transaction region, so the first nonnegative probe on the way down
    marks the top of the buying zone).  None means P1 < 0 all the way to
    the interval bottom: the buying frontier sits at (or below) it.
    """
    top = int(np.searchsorted(theta, upper))
    nonneg = np.nonzero(p1[:top] >= 0.0)[0]
    if nonneg.size == 0:
        return None
    j = int(nonneg[-1])
    if j + 1 >= len(theta) or p1[j + 1] >= 0.0:
        raise FrontierDetectionError(
            "buy frontier not bracketed: P1 nonnegative at the scan top",
            upper=upper)
    return j


def locate_frontiers(grid: MappedGrid, v_hat: np.ndarray, v_old: np.ndarray,
                     p: ModelParams, consistent_time: bool = False,
                     probes: Optional[ProbeSet] = None,
                     anchors: Optional[tuple[float, float]] = None
                     ) -> tuple[float, float]:
    """Extract (br, sr) from the obstacle sign structure.

    sr is the first strict downcross of P2 scanned upward (max-of-clean-
    prefix semantics); br is the last downcross of P1 below sr, scanned
    downward out of the no-transaction region where P1 is strictly negative
    (min-of-clean-tail semantics).  Probe brackets are refined by bisection.
    anchors, when given, are the previous slice's frontiers; the selling
    scan starts just below its anchor, which is what makes the location
    robust while the constraint is only marginally active elsewhere.
    """
    if probes is None:
        probes = ProbeSet(grid.reference)
    theta = probes.mapped(grid)
    vals = probes.kernel @ v_hat
    derivs = probes.kernel @ chebyshev.nodal_derivative(grid, v_hat)
    ratio_sell = gradient_ratio(theta, SELL, p)
    p1 = derivs - vals * gradient_ratio(theta, BUY, p)

    dv_nodal = chebyshev.nodal_derivative(grid, v_hat)
    weights = grid.reference.bary_weights

    def f1(x):
        row = chebyshev.bary_row(grid.theta, weights, x)
        return row @ dv_nodal - (row @ v_hat) * gradient_ratio(x, BUY, p)

    def make_f2(use_new_value):
        side_values = v_hat if use_new_value else v_old

        def f2(x):
            row = chebyshev.bary_row(grid.theta, weights, x)
            return row @ dv_nodal - (row @ side_values) * gradient_ratio(x, SELL, p)
        return f2

    anchor = anchors[1] if anchors else None
    variants = [consistent_time] if consistent_time else [False, True]
    last_err = None
    for use_new_value in variants:
        # the lagged form of P2 loses its sign structure during the first
        # few steps after the horizon (the constraint signal there is
        # O(t_T - t) while the old-vs-new value shift stays O(dt)); the
        # all-new-time form, identical up to O(dt), takes over then
        p2 = derivs - (vals if use_new_value else probes.kernel @ v_old) * ratio_sell
        try:
            k = scan_sell_crossing(theta, p2, anchor)
        except FrontierDetectionError as err:
            last_err = err
            continue
        sr = _bisect(make_f2(use_new_value), float(theta[k - 1]), float(theta[k]))
        break
    else:
        raise last_err

    i = scan_buy_crossing(theta, p1, sr)
    if i is None:
        br = grid.a1
    else:
        br = _bisect(f1, float(theta[i]), float(theta[i + 1]))
    return br, sr


def project(new_grid: MappedGrid, prev_grid: MappedGrid, v_hat: np.ndarray,
            br: float, sr: float, p: ModelParams) -> np.ndarray:
    """Nodal values on the next slice grid.

    Collocation values inside [br, sr], buy extension anchored at
    (br, v_hat(br)) below, sell extension anchored at (sr, v_hat(sr)) above.
    Both frontiers must lie inside the previous interval (backward-step
    containment); a violation is a resolution failure, not something to
    clamp away.
    """
    slack = 1e-12 * (prev_grid.a2 - prev_grid.a1)
    if br < prev_grid.a1 - slack or sr > prev_grid.a2 + slack:
        raise SolverFailure("frontiers escape the previous slice interval",
                            br=br, sr=sr,
                            interval=(prev_grid.a1, prev_grid.a2))
    anchor_b = chebyshev.interpolate(prev_grid, v_hat, max(br, prev_grid.a1))
    anchor_s = chebyshev.interpolate(prev_grid, v_hat, sr)
    theta = new_grid.theta
    below = theta < br
    above = theta > sr
    mid = ~(below | above)
    v_new = np.empty_like(theta)
    if np.any(mid):
        v_new[mid] = chebyshev.interpolate(prev_grid, v_hat, theta[mid])
    if np.any(below):
        v_new[below] = extend(theta[below], br, anchor_b, BUY, p)
    if np.any(above):
        v_new[above] = extend(theta[above], sr, anchor_s, SELL, p)
    return v_new


def evaluate_profile(grid: MappedGrid, v: np.ndarray, br: float, sr: float,
                     p: ModelParams, theta):
    """(V, V_theta) of a slice at arbitrary angles in the solvency wedge.

    Inside [br, sr] the collocation polynomial is evaluated; outside, the
    closed-form extensions anchored at the frontier values.  When br fell
    below the stored interval (negative-oscillation slices) the buy anchor
    degrades gracefully to the interval end.
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    lower = max(br, grid.a1)
    upper = min(sr, grid.a2)
    below = theta_arr < lower
    above = theta_arr > upper
    mid = ~(below | above)
    V = np.empty_like(theta_arr)
    dV = np.empty_like(theta_arr)
    dv_nodal = chebyshev.nodal_derivative(grid, v)
    if np.any(mid):
        V[mid] = chebyshev.interpolate(grid, v, theta_arr[mid])
        dV[mid] = chebyshev.interpolate(grid, dv_nodal, theta_arr[mid])
    if np.any(below):
        anchor = chebyshev.interpolate(grid, v, lower)
        V[below] = extend(theta_arr[below], lower, anchor, BUY, p)
        dV[below] = gradient_ratio(theta_arr[below], BUY, p) * V[below]
    if np.any(above):
        anchor = chebyshev.interpolate(grid, v, upper)
        V[above] = extend(theta_arr[above], upper, anchor, SELL, p)
        dV[above] = gradient_ratio(theta_arr[above], SELL, p) * V[above]
    if np.ndim(theta) == 0:
        return float(V[0]), float(dV[0])
    return V, dV
