"""Chebyshev-Lobatto collocation primitives.

Nodes cos(pi*j/n) stored in descending order (index 0 is +1), dense
differentiation matrices with the negative-sum diagonal, and barycentric
evaluation of the collocation polynomial on affinely mapped intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, ExtrapolationError


@dataclass(frozen=True)
class ReferenceGrid:
    """Degree-n Chebyshev grid on [-1, 1] with differentiation matrices.

    d1_t and d2_t hold contiguous transposes: step-system assembly builds
    the transposed matrix so LAPACK can factorize without a layout copy.
    """

    n: int
    nodes: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d1_t: np.ndarray
    d2_t: np.ndarray
    bary_weights: np.ndarray


def build_reference(n: int) -> ReferenceGrid:
    """Construct the reference grid.  d2 is the matrix square of d1.

    d1 uses the standard entries c_i/c_j * (-1)^(i+j) / (x_i - x_j) with the
    diagonal set so each row sums to zero, which keeps differentiation of
    constants exact.
    """
    if n < 2:
        raise ConfigurationError(f"polynomial degree must be at least 2, got {n}")
    j = np.arange(n + 1)
    nodes = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** j
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    d1 = np.outer(c, 1.0 / c) / diff
    np.fill_diagonal(d1, 0.0)
    np.fill_diagonal(d1, -d1.sum(axis=1))
    d2 = d1 @ d1
    # closed-form Chebyshev-Lobatto barycentric weights: alternating signs,
    # halved at the endpoints
    w = (-1.0) ** j
    w[0] *= 0.5
    w[-1] *= 0.5
    return ReferenceGrid(n=n, nodes=nodes, d1=d1, d2=d2,
                         d1_t=np.ascontiguousarray(d1.T),
                         d2_t=np.ascontiguousarray(d2.T),
                         bary_weights=w)


@dataclass(frozen=True)
class MappedGrid:
    """Reference grid mapped affinely onto [a1, a2] (angles, radians)."""

    reference: ReferenceGrid
    a1: float
    a2: float
    theta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.a1 < self.a2:
            raise ConfigurationError(f"need a1 < a2, got [{self.a1}, {self.a2}]")
        half = 0.5 * (self.a2 - self.a1)
        mid = 0.5 * (self.a2 + self.a1)
        object.__setattr__(self, "theta", half * self.reference.nodes + mid)

    @property
    def n(self) -> int:
        return self.reference.n

    @property
    def scale(self) -> float:
        """Chain-rule factor d(reference)/d(theta)."""
        return 2.0 / (self.a2 - self.a1)


def map_to_interval(reference: ReferenceGrid, a1: float, a2: float) -> MappedGrid:
    return MappedGrid(reference=reference, a1=a1, a2=a2)


def bary_kernel(nodes: np.ndarray, weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluation matrix M with (M @ values)[i] = interpolant(x[i]).

    Rows where x hits a node exactly degenerate to unit vectors.  The same
    weights work for any affine image of the nodes because the common scale
    cancels in the barycentric ratio.
    """
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - nodes[None, :]
    hit_rows, hit_cols = np.nonzero(diff == 0.0)
    diff[hit_rows, hit_cols] = 1.0
    kern = weights / diff
    kern /= kern.sum(axis=1)[:, None]
    if hit_rows.size:
        kern[hit_rows, :] = 0.0
        kern[hit_rows, hit_cols] = 1.0
    return kern


def bary_row(nodes: np.ndarray, weights: np.ndarray, x: float) -> np.ndarray:
    """Single evaluation-kernel row; row @ values = interpolant(x)."""
    diff = x - nodes
    hit = np.nonzero(diff == 0.0)[0]
    if hit.size:
        row = np.zeros_like(nodes)
        row[hit[0]] = 1.0
        return row
    row = weights / diff
    row /= row.sum()
    return row


def _check_domain(grid: MappedGrid, x: np.ndarray):
    slack = 1e-12 * (grid.a2 - grid.a1)
    if np.any(x < grid.a1 - slack) or np.any(x > grid.a2 + slack):
        raise ExtrapolationError(
            f"evaluation outside [{grid.a1}, {grid.a2}]; use the closed-form "
            "extensions beyond the grid interval"
        )


def interpolate(grid: MappedGrid, values: np.ndarray, x):
    """Barycentric evaluation of the collocation polynomial at x in [a1, a2]."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(grid, x_arr)
    kern = bary_kernel(grid.theta, grid.reference.bary_weights, x_arr)
    out = kern @ np.asarray(values, dtype=float)
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def nodal_derivative(grid: MappedGrid, values: np.ndarray) -> np.ndarray:
    """Derivative of the interpolant at the nodes (chain factor applied)."""
    return grid.scale * (grid.reference.d1 @ np.asarray(values, dtype=float))


def derivative_at(grid: MappedGrid, values: np.ndarray, x):
    """Derivative of the interpolant at x.

    The nodal derivative is itself a polynomial of degree n-1, so
    re-interpolating it on the same grid is exact.
    """
    return interpolate(grid, nodal_derivative(grid, values), x)
