"""Backward sweep orchestration.

Terminal data sit on the zero-buying-frontier interval (the payoff kink at
theta = 0 lands exactly on the endpoint node, so no Gibbs pollution enters
the interior).  Each step then: advances one Crank-Nicolson step on the
current interval, locates the frontiers from the obstacle sign structure,
rebuilds the interval around them, and re-projects the solution.  The raw
located buying frontier is kept even when it dips below zero; the interval
construction switches to the two-sided formula only while it is positive.
"""

from __future__ import annotations

import math
import time
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from . import fd_baseline, frontier, spectral_stepper
from .adaptive_mesh import MeshPolicy, interval
from .chebyshev import MappedGrid, map_to_interval
from .exceptions import SolverFailure
from .fd_baseline import UniformGrid
from .frontier import ProbeSet, SolutionPath, TimeSlice
from .model import ModelParams, critical_quantities, terminal_value, to_cartesian

SPECTRAL = "chebyshev"
FD = "fd"

# empirical oscillation guard dt < C / n_theta, see README; the paper's
# companion bound prints with an inconsistent direction and is not enforced
STABILITY_C = 26.0


def profile_at(slice_: TimeSlice, theta, p: ModelParams):
    """(V, V_theta) of a slice at arbitrary angles, whatever the backend."""
    if isinstance(slice_.grid, MappedGrid):
        return frontier.evaluate_profile(slice_.grid, slice_.v, slice_.br,
                                         slice_.sr, p, theta)
    return fd_baseline.fd_evaluate_profile(slice_.grid, slice_.v, slice_.br,
                                           slice_.sr, p, theta)


class _SpectralBackend:
    name = SPECTRAL

    def __init__(self, policy: MeshPolicy, p: ModelParams, dt: float,
                 consistent_time: bool):
        self.policy = policy
        self.p = p
        self.dt = dt
        self.consistent_time = consistent_time
        self.probes = ProbeSet(policy.reference)
        self.residuals: list[float] = []

    def build_grid(self, a1: float, a2: float) -> MappedGrid:
        return map_to_interval(self.policy.reference, a1, a2)

    @staticmethod
    def nodes(grid: MappedGrid) -> np.ndarray:
        return grid.theta

    def step(self, grid: MappedGrid, v_old: np.ndarray) -> np.ndarray:
        sys = spectral_stepper.assemble(grid, self.p, self.dt)
        return spectral_stepper.step(sys, v_old, residual_out=self.residuals)

    def locate(self, grid, v_hat, v_old, anchors):
        return frontier.locate_frontiers(grid, v_hat, v_old, self.p,
                                         consistent_time=self.consistent_time,
                                         probes=self.probes, anchors=anchors)

    def project(self, new_grid, prev_grid, v_hat, br, sr):
        return frontier.project(new_grid, prev_grid, v_hat, br, sr, self.p)


class _FDBackend:
    name = FD

    def __init__(self, policy: MeshPolicy, p: ModelParams, dt: float,
                 consistent_time: bool):
        self.policy = policy
        self.p = p
        self.dt = dt
        self.consistent_time = consistent_time
        self.residuals: list[float] = []

    def build_grid(self, a1: float, a2: float) -> UniformGrid:
        return UniformGrid(a1=a1, a2=a2, n=self.policy.n_theta)

    @staticmethod
    def nodes(grid: UniformGrid) -> np.ndarray:
        return grid.nodes

    def step(self, grid: UniformGrid, v_old: np.ndarray) -> np.ndarray:
        return fd_baseline.fd_step(grid, v_old, self.p, self.dt)

    def locate(self, grid, v_hat, v_old, anchors):
        return fd_baseline.fd_locate_frontiers(grid, v_hat, v_old, self.p,
                                               consistent_time=self.consistent_time,
                                               anchors=anchors)

    def project(self, new_grid, prev_grid, v_hat, br, sr):
        return fd_baseline.fd_project(new_grid, prev_grid, v_hat, br, sr, self.p)


_BACKENDS = {SPECTRAL: _SpectralBackend, FD: _FDBackend}


def solve(p: ModelParams, policy: MeshPolicy, n_t: int,
          backend: str = SPECTRAL, consistent_time: bool = False) -> SolutionPath:
    """Run the full backward algorithm and return the slice sequence.

    The per-step interval-containment check retries once with the offending
    side inflated by 10% before giving up; failures propagate annotated with
    (l, t, interval, backend).  BLAS is pinned to one thread for the
    duration: the dense factorizations here are small enough that spinning
    worker threads cost far more than they contribute, and single-threaded
    solves parallelize cleanly across sweep workers.
    """
    with threadpool_limits(limits=1, user_api="blas"):
        return _solve(p, policy, n_t, backend, consistent_time)


def _solve(p: ModelParams, policy: MeshPolicy, n_t: int,
           backend: str, consistent_time: bool) -> SolutionPath:
    if n_t < 1:
        raise SolverFailure("need at least one time step", n_t=n_t)
    if backend not in _BACKENDS:
        raise SolverFailure(f"unknown backend {backend!r}")
    dom = policy.domain
    dt = p.T / n_t
    if backend == SPECTRAL and dt * policy.n_theta > STABILITY_C:
        warnings.warn(
            f"dt={dt:.3g} with n_theta={policy.n_theta} is outside the "
            f"empirical oscillation-free region dt < {STABILITY_C}/n_theta; "
            "frontier detection may fail",
            RuntimeWarning, stacklevel=2)
    eng = _BACKENDS[backend](policy, p, dt, consistent_time)

    t_grid = np.linspace(0.0, p.T, n_t + 1)
    a1, a2 = interval(policy, 0.0, dom.sr_terminal)
    grid = eng.build_grid(a1, a2)
    v = terminal_value(eng.nodes(grid), p)
    path = SolutionPath(params=p, policy=policy, dt=dt)
    path.slices.append(TimeSlice(t=p.T, grid=grid, v=v, br=0.0,
                                 sr=dom.sr_terminal))
    margin_frac = 0.5 * (1.0 - policy.reference.nodes[policy.j_k])
    retries = 0
    started = time.perf_counter()
    for l in range(n_t, 0, -1):
        t_new = float(t_grid[l - 1])
        cur = path.slices[-1]
        grid, v_old = cur.grid, cur.v
        br0_regime = cur.br <= 0.0
        try:
            for attempt in (0, 1):
                v_hat = eng.step(grid, v_old)
                br_new, sr_new = eng.locate(grid, v_hat, v_old, (cur.br, cur.sr))
                span = _span(grid)
                edge = 0.25 * margin_frac * span
                bad_top = (_a2(grid) - sr_new) < edge
                bad_bot = (not br0_regime) and (br_new - _a1(grid)) < edge
                if not (bad_top or bad_bot):
                    break
                if attempt == 1:
                    raise SolverFailure(
                        "frontier pinned at the slice interval edge after "
                        "retry; resolution too coarse for the frontier speed",
                        br=br_new, sr=sr_new,
                        interval=(_a1(grid), _a2(grid)))
                retries += 1
                grid = eng.build_grid(
                    max(_a1(grid) - (0.1 * span if bad_bot else 0.0),
                        dom.beta1 + 1e-3 * (dom.beta2 - dom.beta1)),
                    min(_a2(grid) + (0.1 * span if bad_top else 0.0),
                        dom.beta2 - 1e-3 * (dom.beta2 - dom.beta1)))
                v_old, _ = profile_at(cur, eng.nodes(grid), p)
            br_next = 0.0 if br_new <= 0.0 else br_new
            na1, na2 = interval(policy, br_next, sr_new)
            new_grid = eng.build_grid(na1, na2)
            v_new = eng.project(new_grid, grid, v_hat, br_new, sr_new)
        except (SolverFailure, ValueError) as exc:
            if isinstance(exc, SolverFailure):
                exc.context.update(l=l, t=t_new, backend=backend)
                raise
            raise SolverFailure(str(exc), l=l, t=t_new, backend=backend) from exc
        path.slices.append(TimeSlice(t=t_new, grid=new_grid, v=v_new,
                                     br=br_new, sr=sr_new))
    runtime_ms = 1e3 * (time.perf_counter() - started)
    path.diagnostics.update(
        backend=backend,
        runtime_ms=runtime_ms,
        retries=retries,
        residual_max=max(eng.residuals) if eng.residuals else 0.0,
    )
    return path


def _a1(grid) -> float:
    return grid.a1


def _a2(grid) -> float:
    return grid.a2


def _span(grid) -> float:
    return grid.a2 - grid.a1


def frontier_series(path: SolutionPath):
    """(t, br, sr) arrays in ascending time order."""
    t = path.times[::-1].copy()
    br = np.array([s.br for s in path.slices])[::-1].copy()
    sr = np.array([s.sr for s in path.slices])[::-1].copy()
    return t, br, sr


def v0_series(path: SolutionPath):
    """(t, v(0, t)) in ascending time order, extracted at theta = pi/2."""
    half_pi = 0.5 * math.pi
    p = path.params
    vals = np.empty(len(path.slices))
    for i, s in enumerate(path.slices):
        V, dV = profile_at(s, half_pi, p)
        _, v = to_cartesian(half_pi, V, dV, p)
        vals[i] = v
    return path.times[::-1].copy(), vals[::-1].copy()


def first_positive_frontier_time(path: SolutionPath):
    """Onset of a positive buying frontier, plus the oscillation amplitude.

    Returns (t_detect, amplitude): t_detect is the latest grid time with a
    strictly positive located frontier (None when the frontier never leaves
    zero, which is legal when the onset time falls below zero).  The
    amplitude combines the deepest negative excursion anywhere with the
    largest positive value at grid times strictly above the closed-form
    onset time, where the exact frontier is still zero.
    """
    t, br, _ = frontier_series(path)
    pos = np.nonzero(br > 0.0)[0]
    t_detect = float(t[pos[-1]]) if pos.size else None
    dom = critical_quantities(path.params)
    l0 = int(np.searchsorted(t, dom.t_hat0, side="left"))
    late = br[l0 + 1:]
    neg_part = max(0.0, -float(br.min()))
    pos_part = max(0.0, float(late.max())) if late.size else 0.0
    return t_detect, max(neg_part, pos_part)


def crossing_time_half_pi(path: SolutionPath):
    """Time at which the buying frontier crosses pi/2, and the nearest-slice error.

    The crossing time interpolates linearly between the bracketing slices;
    the error term is |br - pi/2| at the grid time closest to the
    closed-form crossing time.  Returns (None, error) if the frontier never
    reaches pi/2.
    """
    t, br, _ = frontier_series(path)
    target = 0.5 * math.pi
    dom = critical_quantities(path.params)
    err = math.nan
    if dom.t_hat1 is not None:
        l1 = int(np.argmin(np.abs(t - dom.t_hat1)))
        err = abs(float(br[l1]) - target)
    above = np.nonzero(br >= target)[0]
    if above.size == 0 or above[-1] == len(t) - 1:
        return None, err
    i = int(above[-1])
    t_cross = t[i] + (target - br[i]) * (t[i + 1] - t[i]) / (br[i + 1] - br[i])
    return float(t_cross), err


def stationary_frontiers(path: SolutionPath) -> tuple[float, float]:
    """(br, sr) at t = 0."""
    s = path.slices[-1]
    return s.br, s.sr


def reconstruct_value(path: SolutionPath, b, theta, t_index: int = -1):
    """Optimal value phi(b, theta, t) = b**gamma * V(theta, t) at a slice."""
    s = path.slices[t_index]
    V, _ = profile_at(s, theta, path.params)
    return np.asarray(b, dtype=float)**path.params.gamma * V
