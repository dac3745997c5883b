"""Command-line front end.

Each experiment of the study is one subcommand driven by a JSON config:

    polarport solve      --config configs/solve_T4.json --out out/
    polarport stationary --config configs/stationary.json --out out/
    polarport onset      --config configs/onset.json --out out/
    polarport crossing   --config configs/crossing.json --out out/
    polarport converge   --config configs/converge_space.json --axis space --out out/
    polarport perf       --config configs/perf.json --out out/ --reference data/reference_v0_T4.csv
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarport",
        description="Optimal investment with proportional transaction costs: "
                    "adaptive Chebyshev collocation and a central-difference "
                    "baseline.")
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--reference",
                        help="reference v(0,t) CSV for error metrics")
    parser.add_argument("--workers", type=int, default=1,
                        help="solves run in parallel for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", help="single solve; emits value.csv, frontiers.csv")
    sub.add_parser("stationary", help="long-horizon frontier limits")
    sub.add_parser("onset", help="first instant of a positive buying frontier")
    sub.add_parser("crossing", help="pi/2 crossing of the buying frontier")
    conv = sub.add_parser("converge", help="RMSE convergence sweep")
    conv.add_argument("--axis", choices=("space", "time"), required=True)
    sub.add_parser("perf", help="runtime/error performance envelope")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = harness.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "solve":
        res = harness.experiment_solve(cfg, out)
        print(f"solved: frontiers at t=0: br={res['br0']:.6f} "
              f"sr={res['sr0']:.6f} ({res['runtime_ms']:.0f} ms)")
    elif args.command == "stationary":
        res = harness.experiment_stationary(cfg, out)
        print(f"stationary frontiers: br(0)={res['br0']:.6f} "
              f"sr(0)={res['sr0']:.6f}")
    elif args.command == "onset":
        res = harness.experiment_onset(cfg, out, workers=args.workers)
        print(f"closed-form onset time: {res['t_hat0']:.6f}")
        for method, n, n_t, t_detect, ae in res["rows"]:
            print(f"  {method} n_theta={n}: detected {t_detect:.6f} "
                  f"oscillation {ae:.3e}")
    elif args.command == "crossing":
        res = harness.experiment_crossing(cfg, out, workers=args.workers)
        print(f"closed-form crossing time: {res['t_hat1']}")
        for method, n, n_t, t_cross, ae in res["rows"]:
            print(f"  {method} n_theta={n}: crossed {t_cross:.6f} "
                  f"|br-pi/2| at nearest slice {ae:.3e}")
    elif args.command == "converge":
        res = harness.experiment_converge(cfg, out, args.axis,
                                          reference_path=args.reference,
                                          workers=args.workers)
        for method, slope in res["slopes"].items():
            print(f"{method} {args.axis} slope: {slope:.3f}")
    elif args.command == "perf":
        res = harness.experiment_perf(cfg, out, reference_path=args.reference)
        for method, env in res["envelopes"].items():
            pts = ", ".join(f"({r.runtime_ms:.0f} ms, {r.metric_value:.2e})"
                            for r in env)
            print(f"{method} envelope: {pts}")
        if res["failures"]:
            print(f"{len(res['failures'])} combinations failed "
                  "(under-resolved frontier detection):", file=sys.stderr)
            for method, n_theta, n_t, msg in res["failures"]:
                print(f"  {method} n_theta={n_theta} n_t={n_t}: {msg}",
                      file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
