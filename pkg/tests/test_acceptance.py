"""Acceptance suite: every gate criterion at its pinned tolerance.

Heavy solves are shared across criteria through module-scoped fixtures; a
fresh run takes roughly twenty minutes on two cores.  The self-convergence
reference (spectral, degree 2048, 10240 steps) is loaded from
data/reference_v0_T4.csv when present and computed and persisted there
otherwise, which adds about an hour.  Every test prints one PASS line with
the measured quantities; run with -s to see them.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from polarport import chebyshev as ch
from polarport import frontier as fr
from polarport import harness, solver
from polarport.model import critical_quantities

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
REFERENCE_CSV = DATA_DIR / "reference_v0_T4.csv"

CFG = {"sigma": 0.25, "r": 0.03, "alpha": 0.10, "gamma": 0.5,
       "lambda": 0.08, "mu": 0.02, "T": 4.0, "delta": 0.1,
       "n_theta": 512, "n_t": 10240, "method": "chebyshev",
       "consistent_time": False}

BR_STATIONARY = 1.8622
SR_STATIONARY = 2.1561


def _passline(num, text):
    print(f"\nACCEPTANCE {num}: PASS - {text}")


@pytest.fixture(scope="module")
def reference():
    if REFERENCE_CSV.exists():
        return harness.read_series(REFERENCE_CSV)
    t, v = harness.compute_reference(CFG)
    harness.write_series(REFERENCE_CSV, t, v)
    return t, v


@pytest.fixture(scope="module")
def spectral_paths():
    """Spectral solves at the reference step size, shared by criteria 2-4, 7."""
    return {n: harness.run_solve(CFG, n_theta=n)
            for n in (128, 256, 512, 1024)}


@pytest.fixture(scope="module")
def fd_spatial_paths():
    return {n: harness.run_solve(CFG, method="fd", n_theta=n)
            for n in (375, 750, 1500, 3000)}


@pytest.fixture(scope="module")
def cheb_temporal_paths():
    return {n_t: harness.run_solve(CFG, n_theta=512, n_t=n_t)
            for n_t in (100, 200, 400, 800, 1600, 3200)}


@pytest.fixture(scope="module")
def fd_temporal_paths():
    return {n_t: harness.run_solve(CFG, method="fd", n_theta=4960, n_t=n_t)
            for n_t in (100, 200, 400, 800, 1600, 3200)}


@pytest.fixture(scope="module")
def stationary_path():
    cfg = dict(CFG, T=30.0, n_theta=256, n_t=30000)
    return harness.run_solve(cfg)


@pytest.fixture(scope="module")
def cross_method_pair():
    spec = harness.run_solve(CFG, n_theta=512, n_t=4000)
    fd = harness.run_solve(CFG, method="fd", n_theta=4000, n_t=4000)
    return spec, fd


def test_criterion_1_stationary_frontiers(stationary_path):
    br0, sr0 = solver.stationary_frontiers(stationary_path)
    assert abs(br0 - BR_STATIONARY) <= 5e-3
    assert abs(sr0 - SR_STATIONARY) <= 5e-3
    _passline(1, f"T=30 frontiers br(0)={br0:.5f} (|d|={abs(br0-BR_STATIONARY):.1e}), "
                 f"sr(0)={sr0:.5f} (|d|={abs(sr0-SR_STATIONARY):.1e}), tol 5e-3")


def test_criterion_2_onset(spectral_paths):
    dom = critical_quantities(spectral_paths[512].params)
    t_detect, _ = solver.first_positive_frontier_time(spectral_paths[512])
    assert abs(t_detect - dom.t_hat0) <= 5e-3
    amps = [solver.first_positive_frontier_time(spectral_paths[n])[1]
            for n in (256, 512, 1024)]
    assert amps[0] > amps[1] > amps[2]
    _passline(2, f"onset {t_detect:.5f} vs {dom.t_hat0:.5f} "
                 f"(|d|={abs(t_detect-dom.t_hat0):.1e}, tol 5e-3); "
                 f"oscillation {amps[0]:.2e} > {amps[1]:.2e} > {amps[2]:.2e}")


def test_criterion_3_crossing(spectral_paths):
    path = spectral_paths[512]
    dom = critical_quantities(path.params)
    t_cross, _ = solver.crossing_time_half_pi(path)
    tol = max(2 * path.dt, 5e-3)
    assert abs(t_cross - dom.t_hat1) <= tol
    errs = [solver.crossing_time_half_pi(spectral_paths[n])[1]
            for n in (256, 512, 1024)]
    assert errs[0] >= errs[1] >= errs[2]
    _passline(3, f"crossing {t_cross:.5f} vs {dom.t_hat1:.5f} "
                 f"(|d|={abs(t_cross-dom.t_hat1):.1e}, tol {tol:.1e}); "
                 f"errors {errs[0]:.2e} >= {errs[1]:.2e} >= {errs[2]:.2e}")


def _records(paths, method, reference):
    return [harness._record(path, method, "rmse",
                            harness.rmse_v0(path, reference))
            for path in paths.values()]


def test_criterion_4_convergence_slopes(reference, spectral_paths,
                                        fd_spatial_paths,
                                        cheb_temporal_paths,
                                        fd_temporal_paths):
    spec_space = _records(spectral_paths, "chebyshev", reference)
    slope_ss = harness.convergence_slope(spec_space, "n_theta")
    assert -2.3 <= slope_ss <= -1.4
    # resolution must pay: coarser sweeps sit strictly above finer ones
    errs = [r.metric_value for r in spec_space]
    assert errs[1] > errs[2]

    fd_space = _records(fd_spatial_paths, "fd", reference)
    slope_fs = harness.convergence_slope(fd_space, "n_theta")
    assert -2.2 <= slope_fs <= -1.4

    fd_time = harness.drop_saturated(_records(fd_temporal_paths, "fd",
                                              reference))
    slope_ft = harness.convergence_slope(fd_time, "n_t")
    assert -2.7 <= slope_ft <= -1.9

    cheb_time = harness.drop_saturated(_records(cheb_temporal_paths,
                                                "chebyshev", reference))
    slope_ct = harness.convergence_slope(cheb_time, "n_t")
    assert -1.9 <= slope_ct <= -1.0
    _passline(4, f"slopes: spectral space {slope_ss:.2f} in [-2.3,-1.4], "
                 f"fd space {slope_fs:.2f} in [-2.2,-1.4], "
                 f"fd time {slope_ft:.2f} in [-2.7,-1.9], "
                 f"spectral time {slope_ct:.2f} in [-1.9,-1.0]")


def test_criterion_5_cross_method_oracle(cross_method_pair):
    spec, fd = cross_method_pair
    _, v_spec = solver.v0_series(spec)
    _, v_fd = solver.v0_series(fd)
    gap = float(np.abs(v_spec - v_fd).max())
    assert gap <= 1e-3
    _passline(5, f"max_l |v_cheb(0,t_l) - v_fd(0,t_l)| = {gap:.2e} <= 1e-3")


def test_criterion_6_property_suites(spectral_paths):
    """Compact re-assertion of the invariants the unit suites pin down.

    The dedicated modules (chebyshev, adaptive_mesh, stepper, model,
    frontier, fd) hold the full versions and run in well under a minute.
    """
    path = spectral_paths[256]
    p = path.params
    dom = critical_quantities(p)
    # differentiation exactness
    ref = path.policy.reference
    assert np.abs(ref.d1 @ ref.nodes**3 - 3 * ref.nodes**2).max() <= 1e-10
    # frontier ordering with the oscillation allowance, and positivity
    _, osc = solver.first_positive_frontier_time(path)
    for s in path.slices:
        assert dom.beta1 < s.br + osc + 1e-12
        assert s.br <= s.sr < dom.beta2
        assert s.v.min() > 0.0
        assert abs(s.grid.theta[path.policy.j_k] - s.sr) <= 1e-12
    # monotone frontiers outside the marginal window next to the horizon
    t, br, sr = solver.frontier_series(path)
    outside = t[:-1] < dom.t_hat0 - 0.05
    assert np.all(np.diff(br)[outside] <= 5e-3)
    assert np.all(np.diff(sr)[outside] <= 5e-3)
    # double-obstacle admissibility on a mid-path slice: inside the
    # no-transaction region the profile's log-slope stays between the two
    # constraint ratios (P1 below, P2 above, up to tolerance)
    s = path.slices[len(path.slices) // 2]
    tol = 1e-6 * float(np.abs(s.v).max())
    theta = np.linspace(s.br + 1e-3, s.sr - 1e-3, 201)
    p1, p2 = fr.obstacle_values(s.grid, s.v, s.v, theta, p)
    assert np.all(p1 <= tol)
    assert np.all(p2 >= -tol)
    _passline(6, f"property suite spot checks on the n=256 path "
                 f"(oscillation allowance {osc:.2e})")


def _cost_to_tolerance(records, tol):
    qualifying = [r.runtime_ms for r in records if r.metric_value <= tol]
    return min(qualifying) if qualifying else math.inf


def test_criterion_7_performance_crossover(reference, spectral_paths,
                                           fd_spatial_paths):
    records = []
    for n, path in spectral_paths.items():
        if n >= 141:
            records.append(harness._record(path, "chebyshev", "rmse",
                                           harness.rmse_v0(path, reference)))
    for n in (141, 256, 512, 1024):
        for n_t in (200, 1280):
            path = harness.run_solve(CFG, n_theta=n, n_t=n_t)
            records.append(harness._record(path, "chebyshev", "rmse",
                                           harness.rmse_v0(path, reference)))
    for n, path in fd_spatial_paths.items():
        records.append(harness._record(path, "fd", "rmse",
                                       harness.rmse_v0(path, reference)))
    for n in (300, 1000, 3000, 6000):
        for n_t in (200, 1280):
            path = harness.run_solve(CFG, method="fd", n_theta=n, n_t=n_t)
            records.append(harness._record(path, "fd", "rmse",
                                           harness.rmse_v0(path, reference)))
    cheb = [r for r in records if r.method == "chebyshev"]
    fd = [r for r in records if r.method == "fd"]
    env = harness.perf_envelope(cheb) + harness.perf_envelope(fd)
    decades = [math.floor(math.log10(r.metric_value)) for r in env]
    tol_loose = 10.0**(max(decades) + 1)
    tol_tight = 10.0**(min(decades) + 1)
    fd_loose = _cost_to_tolerance(fd, tol_loose)
    cheb_loose = _cost_to_tolerance(cheb, tol_loose)
    fd_tight = _cost_to_tolerance(fd, tol_tight)
    cheb_tight = _cost_to_tolerance(cheb, tol_tight)
    assert fd_loose < cheb_loose
    assert cheb_tight < fd_tight
    _passline(7, f"loosest decade (<= {tol_loose:.0e}): fd {fd_loose:.0f} ms "
                 f"< cheb {cheb_loose:.0f} ms; tightest (<= {tol_tight:.0e}): "
                 f"cheb {cheb_tight:.0f} ms < fd {fd_tight:.0f} ms")
