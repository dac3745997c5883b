"""Experiment harness: configs, error metrics, sweeps, CSV emission.

Reproduces the experiment suite: value accuracy at z = 0 (RMSE against a
self-convergence reference), frontier-onset and pi/2-crossing studies,
stationary frontiers at long horizon, convergence-slope regressions over
spatial and temporal resolution, and the runtime/error performance cloud
with its lower convex envelope.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import solver
from .adaptive_mesh import MeshPolicy, build_policy
from .exceptions import SolverFailure
from .frontier import SolutionPath
from .model import ModelParams, critical_quantities

FMT = "%.17g"

REFERENCE_N_THETA = 2048
REFERENCE_N_T = 10240


@dataclass(frozen=True)
class ExperimentRecord:
    """One (configuration, metric, runtime) tuple."""

    method: str
    n_theta: int
    n_t: int
    metric_name: str
    metric_value: float
    runtime_ms: float

    def __post_init__(self):
        if not math.isfinite(self.metric_value):
            raise ValueError("metric_value must be finite")
        if self.runtime_ms < 0.0:
            raise ValueError("runtime_ms must be nonnegative")


# ---------------------------------------------------------------- config ---

DEFAULTS = {
    "delta": 0.1,
    "method": "chebyshev",
    "consistent_time": False,
}

_REQUIRED = ("sigma", "r", "alpha", "gamma", "lambda", "mu", "T",
             "n_theta", "n_t")


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    missing = [k for k in _REQUIRED if k not in cfg]
    if missing:
        raise ValueError(f"config {path} missing keys: {missing}")
    out = dict(DEFAULTS)
    out.update(cfg)
    return out


def make_params(cfg: dict) -> ModelParams:
    return ModelParams(r=cfg["r"], alpha=cfg["alpha"], sigma=cfg["sigma"],
                       gamma=cfg["gamma"], lam=cfg["lambda"], mu=cfg["mu"],
                       T=cfg["T"])


def make_policy(p: ModelParams, cfg: dict, n_theta: Optional[int] = None) -> MeshPolicy:
    dom = critical_quantities(p)
    return build_policy(p, dom, cfg["delta"],
                        n_theta if n_theta is not None else cfg["n_theta"],
                        sr_stationary=cfg.get("sr_stationary"))


def run_solve(cfg: dict, method: Optional[str] = None,
              n_theta: Optional[int] = None,
              n_t: Optional[int] = None) -> SolutionPath:
    """Solve once from a config, with optional per-run overrides."""
    p = make_params(cfg)
    policy = make_policy(p, cfg, n_theta)
    return solver.solve(p, policy, n_t if n_t is not None else cfg["n_t"],
                        backend=method if method is not None else cfg["method"],
                        consistent_time=cfg["consistent_time"])


# --------------------------------------------------------------- metrics ---

def rmse_v0(path: SolutionPath, reference: tuple[np.ndarray, np.ndarray]) -> float:
    """Root mean square deviation of v(0, t_l) from a reference series.

    The reference may live on the same time mesh or a finer one (then it is
    interpolated linearly); a coarser reference is an input error.
    """
    t_ref, v_ref = (np.asarray(a, dtype=float) for a in reference)
    t_run, v_run = solver.v0_series(path)
    if t_ref[0] > t_run[0] + 1e-12 or t_ref[-1] < t_run[-1] - 1e-12:
        raise ValueError("reference series does not cover the run's time range")
    if len(t_ref) < len(t_run):
        raise ValueError("reference mesh coarser than the run's time mesh")
    if len(t_ref) == len(t_run) and np.allclose(t_ref, t_run, atol=1e-12):
        ref_on_run = v_ref
    else:
        ref_on_run = np.interp(t_run, t_ref, v_ref)
    return float(np.sqrt(np.mean((v_run - ref_on_run)**2)))


def convergence_slope(records: Sequence[ExperimentRecord], axis: str) -> float:
    """Least-squares slope of log10(metric) against log10(n_theta or n_t)."""
    if axis not in ("n_theta", "n_t"):
        raise ValueError("axis must be 'n_theta' or 'n_t'")
    if len(records) < 3:
        raise ValueError("need at least 3 records for a slope")
    xs = np.array([getattr(r, axis) for r in records], dtype=float)
    ys = np.array([r.metric_value for r in records], dtype=float)
    if np.any(ys <= 0.0):
        raise ValueError("metrics must be positive for a log-log fit")
    if np.unique(xs).size < 2:
        raise ValueError("degenerate sweep: all resolutions equal")
    return float(np.polyfit(np.log10(xs), np.log10(ys), 1)[0])


def drop_saturated(records: Sequence[ExperimentRecord],
                   rel_gain: float = 0.10) -> list[ExperimentRecord]:
    """Trim the resolution ladder where refinement has stopped paying.

    Records are ordered by n_t ascending; the prefix is kept as long as each
    refinement still improves the metric by at least rel_gain relative.
    """
    recs = sorted(records, key=lambda r: r.n_t)
    keep = [recs[0]]
    for r in recs[1:]:
        prev = keep[-1].metric_value
        if prev <= 0.0 or (prev - r.metric_value) / prev < rel_gain:
            break
        keep.append(r)
    return keep


def perf_envelope(records: Sequence[ExperimentRecord]) -> list[ExperimentRecord]:
    """Lower convex envelope of the (runtime, error) cloud in log-log space.

    Dominated records (another record at least as fast and strictly more
    accurate) are removed first, then the convex lower hull of the Pareto
    set is taken.  Result sorted by runtime.
    """
    if not records:
        return []
    recs = sorted(records, key=lambda r: (r.runtime_ms, r.metric_value))
    pareto: list[ExperimentRecord] = []
    best = math.inf
    for r in recs:
        if r.metric_value < best:
            pareto.append(r)
            best = r.metric_value
    if len(pareto) <= 2:
        return pareto
    pts = [(math.log10(r.runtime_ms), math.log10(r.metric_value)) for r in pareto]
    hull: list[int] = []
    for i, (x, y) in enumerate(pts):
        while len(hull) >= 2:
            x1, y1 = pts[hull[-2]]
            x2, y2 = pts[hull[-1]]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return [pareto[i] for i in hull]


# ------------------------------------------------------------------- CSV ---

def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([FMT % x if isinstance(x, float) else x for x in row])


def write_records(path, records: Sequence[ExperimentRecord],
                  slopes: Optional[dict] = None):
    """converge.csv: one row per record, slope annotation per sweep group."""
    slopes = slopes or {}
    rows = []
    for r in records:
        rows.append([r.method, r.n_theta, r.n_t, float(r.metric_value),
                     float(r.runtime_ms), slopes.get(r.method, "")])
    _write_csv(path, ["method", "n_theta", "n_t", "rmse", "runtime_ms",
                      "slope_annotation"], rows)


def read_records(path) -> list[ExperimentRecord]:
    out = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            out.append(ExperimentRecord(
                method=row["method"], n_theta=int(row["n_theta"]),
                n_t=int(row["n_t"]), metric_name="rmse",
                metric_value=float(row["rmse"]),
                runtime_ms=float(row["runtime_ms"])))
    return out


def write_series(path, t: np.ndarray, v: np.ndarray, names=("t", "v0")):
    _write_csv(path, names, zip(map(float, t), map(float, v)))


def read_series(path, names=("t", "v0")):
    ts, vs = [], []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            ts.append(float(row[names[0]]))
            vs.append(float(row[names[1]]))
    return np.array(ts), np.array(vs)


def write_frontiers(path, solution: SolutionPath):
    t, br, sr = solver.frontier_series(solution)
    with np.errstate(divide="ignore"):
        br_z = np.cos(br) / np.sin(br)
        sr_z = np.cos(sr) / np.sin(sr)
    _write_csv(path, ["t", "br_theta", "sr_theta", "br_z", "sr_z"],
               zip(*(map(float, a) for a in (t, br, sr, br_z, sr_z))))


def write_values(path, solution: SolutionPath):
    def rows():
        for s in reversed(solution.slices):
            theta = s.grid.theta if hasattr(s.grid, "theta") else s.grid.nodes
            for th, val in zip(theta, s.v):
                yield float(s.t), float(th), float(val)
    _write_csv(path, ["t", "theta", "v"], rows())


# ------------------------------------------------------------- reference ---

def compute_reference(cfg: dict) -> tuple[np.ndarray, np.ndarray]:
    """Finest-resolution self-convergence reference for v(0, t)."""
    path = run_solve(cfg, method="chebyshev",
                     n_theta=cfg.get("reference_n_theta", REFERENCE_N_THETA),
                     n_t=cfg.get("reference_n_t", REFERENCE_N_T))
    return solver.v0_series(path)


def ensure_reference(cfg: dict, out_dir, reference_path=None):
    """Load the reference series, computing and persisting it if needed."""
    if reference_path is not None:
        return read_series(reference_path)
    cached = Path(out_dir) / "reference.csv"
    if cached.exists():
        return read_series(cached)
    t, v = compute_reference(cfg)
    write_series(cached, t, v)
    return t, v


# ------------------------------------------------------------ experiments --

def _sweep(jobs, workers: int):
    """Run solve jobs across a thread pool; aggregation order is by index."""
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _record(path: SolutionPath, method: str, name: str, value: float) -> ExperimentRecord:
    return ExperimentRecord(method=method, n_theta=path.policy.n_theta,
                            n_t=round(path.params.T / path.dt),
                            metric_name=name, metric_value=value,
                            runtime_ms=path.diagnostics["runtime_ms"])


def experiment_solve(cfg: dict, out_dir) -> dict:
    """Single solve; emits value.csv and frontiers.csv."""
    path = run_solve(cfg)
    out = Path(out_dir)
    write_values(out / "value.csv", path)
    write_frontiers(out / "frontiers.csv", path)
    br0, sr0 = solver.stationary_frontiers(path)
    return {"br0": br0, "sr0": sr0,
            "runtime_ms": path.diagnostics["runtime_ms"]}


def experiment_stationary(cfg: dict, out_dir) -> dict:
    """Long-horizon frontiers at t = 0."""
    path = run_solve(cfg)
    br0, sr0 = solver.stationary_frontiers(path)
    _write_csv(Path(out_dir) / "stationary.csv",
               ["method", "n_theta", "n_t", "br0", "sr0"],
               [[cfg["method"], cfg["n_theta"], cfg["n_t"],
                 float(br0), float(sr0)]])
    write_frontiers(Path(out_dir) / "frontiers.csv", path)
    return {"br0": br0, "sr0": sr0}


def experiment_onset(cfg: dict, out_dir, workers: int = 1) -> dict:
    """Onset of a positive buying frontier across a spatial sweep."""
    sweep = cfg.get("sweep_n_theta", [cfg["n_theta"]])
    paths = _sweep([lambda n=n: run_solve(cfg, n_theta=n) for n in sweep], workers)
    rows = []
    for n, path in zip(sweep, paths):
        t_detect, ae = solver.first_positive_frontier_time(path)
        rows.append([cfg["method"], n, cfg["n_t"],
                     float("nan") if t_detect is None else float(t_detect),
                     float(ae)])
    _write_csv(Path(out_dir) / "onset.csv",
               ["method", "n_theta", "n_t", "t_detect", "oscillation_ae"], rows)
    return {"rows": rows, "t_hat0": critical_quantities(make_params(cfg)).t_hat0}


def experiment_crossing(cfg: dict, out_dir, workers: int = 1) -> dict:
    """Location of the pi/2 crossing of the buying frontier."""
    sweep = cfg.get("sweep_n_theta", [cfg["n_theta"]])
    paths = _sweep([lambda n=n: run_solve(cfg, n_theta=n) for n in sweep], workers)
    rows = []
    for n, path in zip(sweep, paths):
        t_cross, ae = solver.crossing_time_half_pi(path)
        rows.append([cfg["method"], n, cfg["n_t"],
                     float("nan") if t_cross is None else float(t_cross),
                     float(ae)])
    _write_csv(Path(out_dir) / "crossing.csv",
               ["method", "n_theta", "n_t", "t_cross", "abs_error"], rows)
    return {"rows": rows, "t_hat1": critical_quantities(make_params(cfg)).t_hat1}


def experiment_converge(cfg: dict, out_dir, axis: str,
                        reference_path=None, workers: int = 1) -> dict:
    """Spatial or temporal RMSE convergence with slope regression."""
    reference = ensure_reference(cfg, out_dir, reference_path)
    methods = cfg.get("methods", [cfg["method"]])
    records: list[ExperimentRecord] = []
    slopes: dict[str, float] = {}
    for method in methods:
        if axis == "space":
            key = "sweep_n_theta_fd" if method == "fd" else "sweep_n_theta"
            sweep = cfg.get(key, cfg.get("sweep_n_theta", [cfg["n_theta"]]))
            jobs = [lambda n=n, m=method: run_solve(cfg, method=m, n_theta=n)
                    for n in sweep]
        elif axis == "time":
            key = "sweep_n_t_fd" if method == "fd" else "sweep_n_t"
            sweep = cfg.get(key, cfg.get("sweep_n_t", [cfg["n_t"]]))
            base_n = cfg.get("fd_n_theta", cfg["n_theta"]) if method == "fd" \
                else cfg["n_theta"]
            jobs = [lambda n=n, m=method, b=base_n:
                    run_solve(cfg, method=m, n_theta=b, n_t=n) for n in sweep]
        else:
            raise ValueError("axis must be 'space' or 'time'")
        paths = _sweep(jobs, workers)
        group = [_record(path, method, "rmse", rmse_v0(path, reference))
                 for path in paths]
        records.extend(group)
        fit = drop_saturated(group) if axis == "time" else group
        if len(fit) >= 3:
            slopes[method] = convergence_slope(
                fit, "n_theta" if axis == "space" else "n_t")
    write_records(Path(out_dir) / "converge.csv", records, slopes)
    return {"records": records, "slopes": slopes}


def experiment_perf(cfg: dict, out_dir, reference_path=None) -> dict:
    """Runtime/error cloud for both methods; always serial so timings hold."""
    reference = ensure_reference(cfg, out_dir, reference_path)
    grids = {
        "chebyshev": (cfg.get("perf_n_theta_cheb", [141, 256, 512, 1024]),
                      cfg.get("perf_n_t", [200, 1280, 10240])),
        "fd": (cfg.get("perf_n_theta_fd", [300, 1000, 3000, 6000]),
               cfg.get("perf_n_t", [200, 1280, 10240])),
    }
    records: list[ExperimentRecord] = []
    failures = []
    for method, (n_thetas, n_ts) in grids.items():
        for n_theta in n_thetas:
            for n_t in n_ts:
                try:
                    path = run_solve(cfg, method=method, n_theta=n_theta,
                                     n_t=n_t)
                    records.append(_record(path, method, "rmse",
                                           rmse_v0(path, reference)))
                except SolverFailure as exc:
                    failures.append((method, n_theta, n_t, str(exc)))
    envelopes = {m: perf_envelope([r for r in records if r.method == m])
                 for m in grids}
    on_env = {id(r) for env in envelopes.values() for r in env}
    rows = [[r.method, r.n_theta, r.n_t, float(r.metric_value),
             float(r.runtime_ms), int(id(r) in on_env)] for r in records]
    _write_csv(Path(out_dir) / "perf.csv",
               ["method", "n_theta", "n_t", "rmse", "runtime_ms",
                "on_envelope"], rows)
    return {"records": records, "envelopes": envelopes, "failures": failures}
