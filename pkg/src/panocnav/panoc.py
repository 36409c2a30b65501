"""PANOC for ``minimize l(u) subject to u in U`` with ``U`` a box.

Each iteration takes a projected gradient step ``u_bar = proj(u - gamma
grad l(u))`` (with Lipschitz backtracking), forms the fixed-point residual
``r = (u - u_bar) / gamma``, computes an L-BFGS direction ``d`` on the
residual and accepts::

    u+ = u - (1 - tau) gamma r + tau d

for the largest ``tau`` in ``{1, 1/2, 1/4, ...}`` such that the
forward-backward envelope decreases by at least ``sigma |r|^2``. Only
function values, gradients and projections are needed.

Initialization: the Lipschitz constant is estimated by a finite difference
of gradients, then ``gamma = 0.95 / L`` and ``sigma = gamma (1 - gamma L) /
4``. Whenever backtracking halves ``gamma`` it also doubles ``L`` and halves
``sigma``, and the L-BFGS memory is flushed, since residuals computed with
different step sizes describe different operators.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lbfgs import LbfgsBuffer, lbfgs_direction

__all__ = [
    "BoxProjector",
    "FunctionObjective",
    "SolverConfig",
    "SolverState",
    "SolveReport",
    "BacktrackingError",
    "project",
    "fbe",
    "residual",
    "lipschitz_estimate",
    "backtrack_gamma",
    "solve",
    "projected_gradient",
]

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
LINE_SEARCH_EXHAUSTED = "line-search-exhausted"


class BacktrackingError(ArithmeticError):
    """Lipschitz backtracking did not terminate (non-smooth or non-finite cost)."""


class BoxProjector:
    """Projection onto ``{u : lb <= u <= ub}``; bounds may be infinite."""

    def __init__(self, lb, ub):
        lb = np.asarray(lb, dtype=float)
        ub = np.asarray(ub, dtype=float)
        if lb.shape != ub.shape:
            raise ValueError("lower and upper bounds differ in shape")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        self.lb, self.ub = lb, ub

    @classmethod
    def unbounded(cls, n):
        return cls(np.full(n, -np.inf), np.full(n, np.inf))

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != self.lb.shape:
            raise ValueError(f"vector has shape {v.shape}, box has {self.lb.shape}")
        return np.minimum(np.maximum(v, self.lb), self.ub)

    def dist_sq(self, v):
        d = v - self.project(v)
        return float(d @ d)


def project(box: BoxProjector, v):
    return box.project(v)


class FunctionObjective:
    """Wrap plain callables ``f(u)`` and ``grad(u)`` as a solver objective."""

    def __init__(self, f, grad, box=None):
        self.f, self.grad, self.box = f, grad, box

    def cost(self, u):
        return float(self.f(u))

    def cost_and_gradient(self, u):
        return float(self.f(u)), np.asarray(self.grad(u), dtype=float)


def _fbe_from_step(cost_u, grad_u, u, u_bar, gamma):
    # min over v in U of the quadratic model, attained at v = u_bar
    du = u_bar - u
    return cost_u + float(grad_u @ du) + float(du @ du) / (2.0 * gamma)


def fbe(gamma, u, cost_u, grad_u, box: BoxProjector):
    """Forward-backward envelope::

        phi(u) = l(u) - gamma/2 |grad l(u)|^2 + 1/(2 gamma) dist_U(u - gamma grad l(u))^2

    evaluated in the algebraically equal form ``l(u) + grad'(u_bar - u) +
    |u_bar - u|^2 / (2 gamma)``, which avoids cancellation when the
    gradient is large.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    grad_u = np.asarray(grad_u, dtype=float)
    u_bar = box.project(u - gamma * grad_u)
    return _fbe_from_step(float(cost_u), grad_u, u, u_bar, gamma)


def residual(gamma, u, grad_u, box: BoxProjector):
    """Fixed-point residual ``(u - proj(u - gamma grad)) / gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    u = np.asarray(u, dtype=float)
    return (u - box.project(u - gamma * np.asarray(grad_u, dtype=float))) / gamma


def lipschitz_estimate(objective, u0, delta=None, grad0=None):
    """``|grad l(u0 + delta) - grad l(u0)| / |delta|``, floored at 1e-12.

    Default perturbation: ``delta_i = max(1e-6, 1e-6 |u0_i|)``.
    """
    u0 = np.asarray(u0, dtype=float)
    if delta is None:
        delta = np.maximum(1e-6, 1e-6 * np.abs(u0))
    delta = np.broadcast_to(np.asarray(delta, dtype=float), u0.shape)
    norm = np.linalg.norm(delta)
    if not norm > 0:
        raise ValueError("perturbation must be nonzero")
    if grad0 is None:
        _, grad0 = objective.cost_and_gradient(u0)
    _, grad1 = objective.cost_and_gradient(u0 + delta)
    return max(float(np.linalg.norm(grad1 - grad0)) / norm, 1e-12)


@dataclass
class SolverConfig:
    """Solver parameters. ``gamma``, ``sigma`` and ``lipschitz`` override
    the automatic initialization when given."""

    tol: float = 1e-6
    max_iter: int = 500
    memory: int = 10
    gamma: Optional[float] = None
    sigma: Optional[float] = None
    lipschitz: Optional[float] = None
    lipschitz_delta: Optional[float] = None
    max_ls_halvings: int = 10
    max_backtracks: int = 64
    backtrack_slack: float = 1e-12


@dataclass
class SolverState:
    u: np.ndarray
    cost: float
    grad: np.ndarray
    gamma: float
    L: float
    sigma: float
    u_bar: Optional[np.ndarray] = None
    cost_bar: Optional[float] = None
    r: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    fbe: Optional[float] = None
    bar_gamma: Optional[float] = None
    iter: int = 0
    tau_log: list = field(default_factory=list)


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``u_star`` is the projected-gradient point at exit, hence always
    feasible. Per-iteration histories are aligned with the iteration
    index; ``ls_log`` holds ``(gamma, sigma, fbe_before, fbe_after,
    |r|^2, tau)`` for every accepted step.
    """

    u_star: np.ndarray
    residual_inf: float
    iterations: int
    status: str
    fbe_history: list
    timing: float
    gamma_history: list = field(default_factory=list)
    sigma_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    ls_log: list = field(default_factory=list)
    gamma: float = float("nan")
    L: float = float("nan")
    evaluations: int = 0

    @property
    def converged(self):
        return self.status == CONVERGED


def backtrack_gamma(state: SolverState, objective, box: BoxProjector,
                    max_doublings=64, slack=1e-12):
    """Lipschitz backtracking; updates ``state`` in place.

    Computes ``u_bar`` and repeats ``L <- 2L, sigma <- sigma/2, gamma <-
    gamma/2`` while ``l(u_bar) > l(u) + grad'(u_bar - u) + L/2 |u_bar -
    u|^2`` (plus a roundoff slack of ``slack * |l(u)|``). Returns the
    number of doublings.
    """
    u, g = state.u, state.grad
    doublings = 0
    while True:
        if state.bar_gamma == state.gamma and state.cost_bar is not None:
            # cached by the line search for this very u and gamma
            u_bar, cost_bar = state.u_bar, state.cost_bar
        else:
            u_bar = box.project(u - state.gamma * g)
            cost_bar = objective.cost(u_bar)
        du = u_bar - u
        bound = state.cost + float(g @ du) + 0.5 * state.L * float(du @ du)
        if cost_bar <= bound + slack * abs(state.cost):
            break
        if doublings >= max_doublings:
            raise BacktrackingError(f"Lipschitz backtracking exceeded {max_doublings} doublings")
        state.L *= 2.0
        state.sigma *= 0.5
        state.gamma *= 0.5
        state.bar_gamma = None
        doublings += 1
    state.u_bar, state.cost_bar, state.bar_gamma = u_bar, cost_bar, state.gamma
    return doublings


def _initial_state(objective, u0, config):
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("initial guess must be finite")
    cost_u, grad_u = objective.cost_and_gradient(u)
    if config.gamma is not None:
        gamma = config.gamma
        L = config.lipschitz if config.lipschitz is not None else 0.95 / gamma
    else:
        L = config.lipschitz
        if L is None:
            L = lipschitz_estimate(objective, u, config.lipschitz_delta, grad_u)
        gamma = 0.95 / L
    sigma = config.sigma if config.sigma is not None else gamma * (1.0 - gamma * L) / 4.0
    return SolverState(u=u, cost=cost_u, grad=grad_u, gamma=gamma, L=L, sigma=sigma)


def _resolve_box(objective, box, n):
    if box is None:
        box = getattr(objective, "box", None)
    return box if box is not None else BoxProjector.unbounded(n)


def solve(objective, u0, box: BoxProjector | None = None,
          config: SolverConfig | None = None, callback: Callable | None = None) -> SolveReport:
    """Run PANOC from ``u0``.

    ``objective`` provides ``cost(u)`` and ``cost_and_gradient(u)``; its
    ``box`` attribute is used when ``box`` is not given. ``callback(state,
    buffer)`` is called after every accepted step.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    counter = _CountingObjective(objective)
    state = _initial_state(counter, u0, config)
    box = _resolve_box(objective, box, state.u.size)
    buffer = LbfgsBuffer(config.memory)
    fbe_hist, gamma_hist, sigma_hist, res_hist, ls_log = [], [], [], [], []
    status = MAX_ITERATIONS
    r_inf = float("inf")

    for it in range(config.max_iter + 1):
        state.iter = it
        if backtrack_gamma(state, counter, box, config.max_backtracks, config.backtrack_slack):
            buffer.reset()
        u, u_bar, gamma = state.u, state.u_bar, state.gamma
        state.r = r = (u - u_bar) / gamma
        r_inf = float(np.max(np.abs(r))) if r.size else 0.0
        state.fbe = _fbe_from_step(state.cost, state.grad, u, u_bar, gamma)
        fbe_hist.append(state.fbe)
        gamma_hist.append(gamma)
        sigma_hist.append(state.sigma)
        res_hist.append(r_inf)
        if r_inf <= config.tol:
            status = CONVERGED
            break
        if it == config.max_iter:
            break

        state.d = lbfgs_direction(buffer, r, gamma)
        # with empty memory the quasi-Newton point is u_bar itself, exactly
        u_qn = u + state.d if len(buffer) else u_bar
        r_sq = float(r @ r)
        target = state.fbe - state.sigma * r_sq
        taus = [0.5 ** i for i in range(config.max_ls_halvings + 1)] + [0.0]
        if u_qn is u_bar:
            taus = [1.0]
        accepted = None
        for tau in taus:
            cand = u_bar + tau * (u_qn - u_bar) if tau and u_qn is not u_bar else u_bar
            try:
                c_cand, g_cand = counter.cost_and_gradient(cand)
            except ArithmeticError:
                continue
            if not np.isfinite(c_cand):
                continue
            # a wild candidate may overflow here; it is then simply rejected
            with np.errstate(over="ignore", invalid="ignore"):
                ubar_cand = box.project(cand - gamma * g_cand)
                fbe_cand = _fbe_from_step(c_cand, g_cand, cand, ubar_cand, gamma)
            if not fbe_cand <= target:
                continue
            cbar_cand = None
            if cand is not u_bar:
                # the envelope is only trustworthy where the descent lemma holds
                cbar_cand = counter.cost(ubar_cand)
                du = ubar_cand - cand
                bound = c_cand + float(g_cand @ du) + 0.5 * state.L * float(du @ du)
                if not cbar_cand <= bound + config.backtrack_slack * abs(c_cand):
                    continue
            accepted = (tau, cand, c_cand, g_cand, ubar_cand, fbe_cand, cbar_cand)
            break
        if accepted is None:
            status = LINE_SEARCH_EXHAUSTED
            break
        tau, cand, c_cand, g_cand, ubar_cand, fbe_cand, cbar_cand = accepted
        state.tau_log.append(tau)
        ls_log.append((gamma, state.sigma, state.fbe, fbe_cand, r_sq, tau))
        buffer.push(cand - u, (cand - ubar_cand) / gamma - r)
        state.u, state.cost, state.grad = cand, c_cand, g_cand
        state.u_bar, state.cost_bar = ubar_cand, cbar_cand
        state.bar_gamma = gamma if cbar_cand is not None else None
        if callback is not None:
            callback(state, buffer)

    return SolveReport(
        u_star=state.u_bar.copy(), residual_inf=r_inf, iterations=state.iter,
        status=status, fbe_history=fbe_hist, timing=time.perf_counter() - t0,
        gamma_history=gamma_hist, sigma_history=sigma_hist,
        residual_history=res_hist, ls_log=ls_log, gamma=state.gamma, L=state.L,
        evaluations=counter.calls,
    )


def projected_gradient(objective, u0, box: BoxProjector | None = None,
                       config: SolverConfig | None = None) -> SolveReport:
    """Plain projected gradient ``u+ = u_bar`` with the same initialization,
    backtracking and stopping rule as :func:`solve`."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    counter = _CountingObjective(objective)
    state = _initial_state(counter, u0, config)
    box = _resolve_box(objective, box, state.u.size)
    fbe_hist, gamma_hist, sigma_hist, res_hist = [], [], [], []
    status = MAX_ITERATIONS
    r_inf = float("inf")
    for it in range(config.max_iter + 1):
        state.iter = it
        backtrack_gamma(state, counter, box, config.max_backtracks, config.backtrack_slack)
        state.r = (state.u - state.u_bar) / state.gamma
        r_inf = float(np.max(np.abs(state.r))) if state.r.size else 0.0
        state.fbe = _fbe_from_step(state.cost, state.grad, state.u, state.u_bar, state.gamma)
        fbe_hist.append(state.fbe)
        gamma_hist.append(state.gamma)
        sigma_hist.append(state.sigma)
        res_hist.append(r_inf)
        if r_inf <= config.tol:
            status = CONVERGED
            break
        if it == config.max_iter:
            break
        state.u, state.bar_gamma = state.u_bar, None
        state.cost, state.grad = counter.cost_and_gradient(state.u)
    return SolveReport(
        u_star=state.u_bar.copy(), residual_inf=r_inf, iterations=state.iter,
        status=status, fbe_history=fbe_hist, timing=time.perf_counter() - t0,
        gamma_history=gamma_hist, sigma_history=sigma_hist,
        residual_history=res_hist, gamma=state.gamma, L=state.L,
        evaluations=counter.calls,
    )


class _CountingObjective:
    def __init__(self, objective):
        self.objective = objective
        self.calls = 0

    def cost(self, u):
        self.calls += 1
        return self.objective.cost(u)

    def cost_and_gradient(self, u):
        self.calls += 1
        return self.objective.cost_and_gradient(u)
