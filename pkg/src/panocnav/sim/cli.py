"""Command-line entry point: ``panocnav {simulate,compare,solve-once}``.

Exit status is 0 only if the run's acceptance predicates hold:

* ``simulate``: every run reaches the target within the scenario's
  position tolerance, every solve converged and, for scenarios marked
  ``must_avoid``, the obstacle penalty is exactly zero at every applied
  state;
* ``compare``: as ``simulate`` for the PANOC loop, plus PANOC needs no
  more iterations on average than projected gradient;
* ``solve-once``: the single solve converged.

Schema and I/O errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import yaml

from ..panoc import solve
from ..shooting import ShootingObjective, cost_terms
from .closed_loop import run_baseline_comparison, run_closed_loop
from .logio import LogIOError, write_log
from .scenario import ScenarioError, load_scenario, shipped_scenarios

__all__ = ["main", "build_parser"]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file or shipped scenario name "
                        f"({', '.join(shipped_scenarios())})")
    common.add_argument("--tol", type=float, help="residual tolerance (inf-norm)")
    common.add_argument("--max-iter", type=int, help="iteration cap per solve")
    common.add_argument("--mu", type=int, help="L-BFGS memory")

    parser = argparse.ArgumentParser(prog="panocnav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the closed loop")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--cold-start", action="store_true", help="disable warm starting")
    p.add_argument("--x0", type=float, nargs="+",
                   help="single initial state (default: every start in the file)")

    p = sub.add_parser("compare", parents=[common],
                       help="PANOC vs projected gradient along the closed loop")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--x0", type=float, nargs="+", help="initial state (default: first start)")
    p.add_argument("--steps", type=int, help="limit the number of closed-loop steps")

    p = sub.add_parser("solve-once", parents=[common], help="solve one horizon problem")
    p.add_argument("--x0", type=float, nargs="+", help="initial state (default: first start)")
    p.add_argument("--cold-start", action="store_true",
                   help="accepted for symmetry; a single solve always starts from u_ref")
    return parser


def _x0(args, scenario):
    if args.x0 is None:
        return None
    x0 = np.array(args.x0, dtype=float)
    if x0.size != scenario.n_x:
        raise ScenarioError([f"--x0 has {x0.size} entries, expected {scenario.n_x}"])
    return x0


def _run_ok(log, scenario):
    reached = log.reached_target(scenario.position_tol)
    clear = log.clear_of_obstacles() or not scenario.must_avoid
    return reached and clear and log.all_converged()


def _simulate(args, scenario, config):
    starts = [_x0(args, scenario)] if args.x0 is not None else list(scenario.initial_states)
    ok = True
    for i, x0 in enumerate(starts):
        log = run_closed_loop(scenario, x0, warm_start=not args.cold_start, config=config)
        out = args.out if len(starts) == 1 else args.out / f"start_{i}"
        write_log(log, out)
        run_ok = _run_ok(log, scenario)
        s = log.summary()
        print(f"start {i}: steps={s['steps']} position_error={s['position_error']:.3e} "
              f"max_penalty={s['max_penalty']:.3e} iterations(mean/max)="
              f"{s['iterations_mean']:.1f}/{s['iterations_max']} "
              f"{'ok' if run_ok else 'FAILED'} -> {out}")
        ok = ok and run_ok
    return ok


def _compare(args, scenario, config):
    table = run_baseline_comparison(scenario, _x0(args, scenario), config=config, steps=args.steps)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "comparison.csv"
    fields = ["step", "panoc_iters", "panoc_ms", "panoc_status", "pg_iters", "pg_ms", "pg_status"]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            w.writerows(table.rows)
        summary = table.summary()
        (args.out / "comparison_summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=False))
    except OSError as exc:
        raise LogIOError(path, exc) from exc
    for k, v in summary.items():
        print(f"{k}: {v}")
    converged = all(r["panoc_status"] == "converged" for r in table.rows)
    return converged and table.iteration_ratio <= 1.0


def _solve_once(args, scenario, config):
    problem = scenario.build_problem(_x0(args, scenario))
    objective = ShootingObjective(problem)
    report = solve(objective, np.tile(scenario.u_ref, scenario.N), config=config)
    terms = cost_terms(problem, report.u_star)
    print(f"status: {report.status}")
    print(f"iterations: {report.iterations}")
    print(f"residual_inf: {report.residual_inf:.3e}")
    print(f"solve_ms: {report.timing * 1e3:.2f}")
    for k, v in terms.items():
        print(f"cost.{k}: {v:.10g}")
    print("u0: " + " ".join(f"{v:.6g}" for v in report.u_star[:scenario.n_u]))
    return report.converged


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        config = scenario.solver_config(tol=args.tol, max_iter=args.max_iter, memory=args.mu)
        handler = {"simulate": _simulate, "compare": _compare,
                   "solve-once": _solve_once}[args.command]
        ok = handler(args, scenario, config)
    except ScenarioError as exc:
        for msg in exc.errors:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    except (LogIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
