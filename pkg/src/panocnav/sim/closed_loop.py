"""Receding-horizon simulation of a scenario with the nominal model as plant."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..obstacles import penalty
from ..panoc import SolverConfig, projected_gradient, solve
from ..shooting import ShootingObjective, rollout
from .scenario import Scenario

__all__ = [
    "PlantDivergedError",
    "TrajectoryLog",
    "ComparisonTable",
    "warm_start_shift",
    "run_closed_loop",
    "run_baseline_comparison",
]


class PlantDivergedError(ArithmeticError):
    def __init__(self, step):
        super().__init__(f"plant state became non-finite at step {step}")
        self.step = step


def warm_start_shift(u_prev, n_u):
    """Drop ``u_0``, shift the rest forward and repeat the last input."""
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.size % n_u:
        raise ValueError("input sequence length is not a multiple of n_u")
    if u_prev.size == 0:
        return u_prev.copy()
    return np.concatenate([u_prev[n_u:], u_prev[-n_u:]])


@dataclass
class TrajectoryLog:
    """Closed-loop record, one row per applied input.

    ``penalty`` is the obstacle penalty of the applied state with respect
    to the nominal (not enlarged) obstacles; ``predicted[k]`` is the
    open-loop state trajectory of the solution used at step ``k``.
    """

    scenario: str
    x_ref: np.ndarray
    states: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    solve_time: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    status: list = field(default_factory=list)
    predicted: list = field(default_factory=list)
    final_state: np.ndarray | None = None
    final_penalty: float = 0.0

    def __len__(self):
        return len(self.states)

    def position_error(self, position_slice=(0, 1)):
        x = self.final_state if self.final_state is not None else self.x_ref
        sl = list(position_slice)
        return float(np.linalg.norm(x[sl] - self.x_ref[sl]))

    def reached_target(self, tol=1e-2, position_slice=(0, 1)):
        return self.final_state is not None and self.position_error(position_slice) <= tol

    def clear_of_obstacles(self):
        """True iff the penalty is exactly zero at every applied state."""
        return all(p == 0.0 for p in self.penalty) and self.final_penalty == 0.0

    def all_converged(self):
        return all(s == "converged" for s in self.status)

    def summary(self):
        it = np.asarray(self.iterations)
        ts = np.asarray(self.solve_time)
        return {
            "scenario": self.scenario,
            "steps": len(self),
            "final_state": [float(v) for v in (self.final_state if self.final_state is not None else [])],
            "position_error": self.position_error(),
            "max_penalty": float(max(self.penalty + [self.final_penalty])),
            "all_converged": self.all_converged(),
            "iterations_mean": float(it.mean()) if it.size else 0.0,
            "iterations_median": float(np.median(it)) if it.size else 0.0,
            "iterations_max": int(it.max()) if it.size else 0,
            "solve_ms_mean": float(ts.mean() * 1e3) if ts.size else 0.0,
            "residual_max": float(max(self.residual)) if self.residual else 0.0,
        }


def _converged(x, scenario):
    err = x - scenario.x_ref
    heading_ok = True
    if scenario.n_x > 2:
        heading_ok = bool(np.all(np.abs(err[2:]) <= scenario.heading_tol))
    return float(np.linalg.norm(err[:2])) <= scenario.position_tol and heading_ok


def _loop(scenario, x0, warm_start, config, on_step=None):
    base = scenario.build_problem(x0)
    nominal = scenario.build_obstacles(enlarged=False)
    nominal_active = [obs for obs, _ in nominal]
    plant = base.dynamics
    n_u = plant.n_u
    objective = ShootingObjective(base)
    rng = np.random.default_rng(scenario.seed)
    cold = np.tile(scenario.u_ref, scenario.N)
    # compile the jitted kernels outside the timed solves
    objective.cost(cold)
    objective.cost_and_gradient(cold)

    log = TrajectoryLog(scenario.name, np.array(scenario.x_ref))
    x = np.array(base.x0, dtype=float)
    guess = cold.copy()
    sl = list(base.position_slice)

    def obstacle_penalty(state):
        if not nominal_active:
            return 0.0
        return float(penalty(nominal_active, state[sl]))

    for k in range(scenario.sim_steps):
        if _converged(x, scenario):
            break
        problem = base.with_initial_state(x)
        objective.problem = problem
        t0 = time.perf_counter()
        report = solve(objective, guess, config=config)
        elapsed = time.perf_counter() - t0
        if on_step is not None:
            on_step(k, objective, guess, report)
        u_apply = report.u_star[:n_u].copy()
        log.states.append(x.copy())
        log.inputs.append(u_apply)
        log.penalty.append(obstacle_penalty(x))
        log.iterations.append(report.iterations)
        log.solve_time.append(elapsed)
        log.residual.append(report.residual_inf)
        log.status.append(report.status)
        log.predicted.append(rollout(problem, report.u_star, objective.ws).copy())

        x = np.asarray(plant.step(x, u_apply), dtype=float)
        if scenario.perturbation:
            x = x + scenario.perturbation * rng.standard_normal(x.size)
        if not np.all(np.isfinite(x)):
            raise PlantDivergedError(k)
        guess = warm_start_shift(report.u_star, n_u) if warm_start else cold.copy()

    log.final_state = x
    log.final_penalty = obstacle_penalty(x)
    return log


def run_closed_loop(scenario: Scenario, x0=None, *, warm_start=True,
                    config: SolverConfig | None = None, on_step=None) -> TrajectoryLog:
    """Simulate the MPC loop from ``x0`` (default: the first initial state).

    Each step solves the horizon problem from the current state, applies the
    first input of the returned solution to the nominal discrete model and
    warm starts the next solve with the shifted solution. The solution is
    the projected-gradient point of the last iterate, so a failed solve
    still yields a feasible input; its status is logged and the run goes on.
    Stops after ``sim_steps`` or once the state is within the convergence
    radius of the reference.

    ``on_step(k, objective, guess, report)``, if given, is called after
    every solve with the objective, the initial guess and the full
    :class:`~panocnav.panoc.SolveReport`.
    """
    config = config or scenario.solver_config()
    x0 = scenario.initial_states[0] if x0 is None else np.asarray(x0, dtype=float)
    return _loop(scenario, x0, warm_start, config, on_step)


@dataclass
class ComparisonTable:
    """Per-step iteration counts and solve times of PANOC and projected
    gradient on identical problems and warm starts."""

    rows: list

    def mean_iterations(self, solver):
        return float(np.mean([r[f"{solver}_iters"] for r in self.rows]))

    def mean_time(self, solver):
        return float(np.mean([r[f"{solver}_ms"] for r in self.rows]))

    @property
    def iteration_ratio(self):
        """Mean PANOC iterations over mean projected-gradient iterations."""
        return self.mean_iterations("panoc") / self.mean_iterations("pg")

    @property
    def time_ratio(self):
        return self.mean_time("panoc") / self.mean_time("pg")

    def summary(self):
        return {
            "steps": len(self.rows),
            "panoc_mean_iterations": self.mean_iterations("panoc"),
            "pg_mean_iterations": self.mean_iterations("pg"),
            "iteration_ratio": self.iteration_ratio,
            "panoc_mean_ms": self.mean_time("panoc"),
            "pg_mean_ms": self.mean_time("pg"),
            "time_ratio": self.time_ratio,
            "pg_hit_max_iter": sum(r["pg_status"] == "max-iterations" for r in self.rows),
        }


def run_baseline_comparison(scenario: Scenario, x0=None, *,
                            config: SolverConfig | None = None,
                            steps=None) -> ComparisonTable:
    """Run the PANOC closed loop and, at every step, also solve the same
    problem from the same warm start with projected gradient.

    Both use the same tolerance and iteration cap; a baseline that hits the
    cap is recorded as such.
    """
    config = config or scenario.solver_config()
    if steps is not None:
        scenario = scenario.replace(sim_steps=int(steps))
    x0 = scenario.initial_states[0] if x0 is None else np.asarray(x0, dtype=float)
    rows = []

    def compare(k, objective, guess, report):
        t0 = time.perf_counter()
        base = projected_gradient(objective, guess, config=config)
        rows.append({
            "step": k,
            "panoc_iters": report.iterations,
            "panoc_ms": report.timing * 1e3,
            "panoc_status": report.status,
            "pg_iters": base.iterations,
            "pg_ms": (time.perf_counter() - t0) * 1e3,
            "pg_status": base.status,
        })

    _loop(scenario, x0, True, config, on_step=compare)
    return ComparisonTable(rows)
