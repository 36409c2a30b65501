"""Single-shooting cost and its adjoint gradient.

The state sequence is eliminated through the rollout
``x_{k+1} = f(x_k, u_k)`` so the relaxed NMPC cost becomes a smooth
function of the stacked inputs ``u = (u_0, ..., u_{N-1})``. Its gradient
comes from one backward sweep over the stored trajectory::

    p_N      = grad lt_N(x_N)
    p_k      = f_x(x_k, u_k)' p_{k+1} + grad_x lt_k(x_k, u_k)
    dl/du_k  = f_u(x_k, u_k)' p_{k+1} + grad_u lt_k(x_k, u_k)

where ``lt_k`` is the stage cost plus obstacle and state-constraint
penalties. The input-gradient line multiplies the dynamics Jacobian by the
costate ``p_{k+1}``; the widely reproduced pseudo-code that omits this
factor is dimensionally inconsistent, and finite differences confirm the
form used here.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numba.core.dispatcher import Dispatcher

from .obstacles import penalty, penalty_gradient
from .problem import ControlProblem, DynamicsModel

__all__ = [
    "DivergedRolloutError",
    "RolloutWorkspace",
    "ShootingObjective",
    "discretize_rk4",
    "discretize_euler",
    "rollout",
    "cost",
    "cost_terms",
    "cost_and_gradient",
]


class DivergedRolloutError(ArithmeticError):
    """Raised when a rollout produces a non-finite state."""

    def __init__(self, stage):
        super().__init__(f"non-finite state at stage {stage}")
        self.stage = stage


# -- discretization ----------------------------------------------------------

_kernel_cache = {}


def _rk4_kernels(f, f_vjp, dt):
    h2 = 0.5 * dt
    h6 = dt / 6.0
    h3 = dt / 3.0

    def step(x, u):
        k1 = f(x, u)
        k2 = f(x + h2 * k1, u)
        k3 = f(x + h2 * k2, u)
        k4 = f(x + dt * k3, u)
        return x + h6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def adjoint_step(x, u, p):
        k1 = f(x, u)
        x1 = x + h2 * k1
        k2 = f(x1, u)
        x2 = x + h2 * k2
        k3 = f(x2, u)
        x3 = x + dt * k3
        # reverse through x+ = x + dt/6 (k1 + 2 k2 + 2 k3 + k4)
        gx4, gu4 = f_vjp(x3, u, h6 * p)
        gx3, gu3 = f_vjp(x2, u, h3 * p + dt * gx4)
        gx2, gu2 = f_vjp(x1, u, h3 * p + h2 * gx3)
        gx1, gu1 = f_vjp(x, u, h6 * p + h2 * gx2)
        return p + gx1 + gx2 + gx3 + gx4, gu1 + gu2 + gu3 + gu4

    return step, adjoint_step


def _euler_kernels(f, f_vjp, dt):
    def step(x, u):
        return x + dt * f(x, u)

    def adjoint_step(x, u, p):
        gx, gu = f_vjp(x, u, p)
        return p + dt * gx, dt * gu

    return step, adjoint_step


def _discretize(model, dt, method, factory):
    if not model.continuous:
        raise ValueError("model is already discrete")
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    dt = float(dt)
    key = (model.step, model.adjoint_step, dt, method)
    kernels = _kernel_cache.get(key)
    if kernels is None:
        step, adjoint_step = factory(model.step, model.adjoint_step, dt)
        if isinstance(model.step, Dispatcher) and isinstance(model.adjoint_step, Dispatcher):
            step, adjoint_step = njit(step), njit(adjoint_step)
        kernels = _kernel_cache[key] = (step, adjoint_step)
    name = f"{method}({model.name}, dt={dt!r})"
    return DynamicsModel(model.n_x, model.n_u, kernels[0], kernels[1], False, name)


def discretize_rk4(model: DynamicsModel, dt: float) -> DynamicsModel:
    """Classical four-stage Runge-Kutta step of a continuous model.

    The adjoint is the exact transpose of the discrete map, obtained by
    differentiating backwards through the four stages. If the model's
    kernels are numba-compiled, the discrete kernels are compiled too.
    """
    return _discretize(model, dt, "rk4", _rk4_kernels)


def discretize_euler(model: DynamicsModel, dt: float) -> DynamicsModel:
    """Explicit Euler step ``x + dt f_c(x, u)`` with exact adjoint."""
    return _discretize(model, dt, "euler", _euler_kernels)


# -- rollout and cost --------------------------------------------------------

class RolloutWorkspace:
    """Preallocated trajectory and costate storage for one problem shape.

    Contents are overwritten on every call; nothing is read back.
    """

    def __init__(self, problem: ControlProblem):
        n_x, n_u = problem.dynamics.n_x, problem.dynamics.n_u
        self.shape = (problem.N, n_x, n_u)
        self.states = np.empty((problem.N + 1, n_x))
        self.costates = np.empty((problem.N + 1, n_x))
        self.grad = np.empty((problem.N, n_u))

    def check(self, problem):
        if self.shape != (problem.N, problem.dynamics.n_x, problem.dynamics.n_u):
            raise ValueError("workspace was allocated for a different problem shape")


def _inputs(problem, u):
    u = np.asarray(u, dtype=float)
    if u.size != problem.n:
        raise ValueError(f"input sequence has length {u.size}, expected {problem.n}")
    return np.ascontiguousarray(u.reshape(problem.N, problem.dynamics.n_u))


def rollout(problem: ControlProblem, u, ws: RolloutWorkspace | None = None):
    """Simulate ``x_{k+1} = f(x_k, u_k)`` from ``problem.x0``.

    Returns the ``(N+1, n_x)`` state trajectory (a view into the workspace
    when one is given).
    """
    if ws is None:
        ws = RolloutWorkspace(problem)
    ws.check(problem)
    U = _inputs(problem, u)
    X = ws.states
    X[0] = problem.x0
    step = problem.dynamics.step
    for k in range(problem.N):
        X[k + 1] = step(X[k], U[k])
    finite = np.isfinite(X).all(axis=1)
    if not finite.all():
        raise DivergedRolloutError(int(np.argmin(finite)))
    return X


def _active_masks(problem):
    stages = np.arange(problem.N + 1)
    return [(obs, (stages >= a) & (stages <= b)) for obs, (a, b) in problem.obstacles]


def _terms(problem, X, U):
    """Per-part totals: tracking, obstacle penalty, state-constraint penalty."""
    c = problem.cost
    tracking = float(np.sum(c.stage(X[:-1], U)) + c.terminal(X[-1]))
    obstacle = 0.0
    if problem.obstacles:
        Z = X[:, problem.position_slice]
        obstacle = float(np.sum(penalty(_active_masks(problem), Z)))
    state = 0.0
    for pen in problem.state_penalties:
        if pen.terminal:
            v = np.maximum(np.asarray(pen.g(X[-1], None), dtype=float), 0.0)
            state += pen.beta * float(v @ v)
        else:
            for k in range(problem.N):
                v = np.maximum(np.asarray(pen.g(X[k], U[k]), dtype=float), 0.0)
                state += pen.beta * float(v @ v)
    return tracking, obstacle, state


def cost_terms(problem: ControlProblem, u, ws: RolloutWorkspace | None = None):
    """Return the cost split into ``tracking``, ``obstacle`` and ``state`` parts."""
    X = rollout(problem, u, ws)
    tracking, obstacle, state = _terms(problem, X, _inputs(problem, u))
    return {"tracking": tracking, "obstacle": obstacle, "state": state}


def cost(problem: ControlProblem, u, ws: RolloutWorkspace | None = None) -> float:
    """Relaxed single-shooting cost ``l(u)``."""
    X = rollout(problem, u, ws)
    tracking, obstacle, state = _terms(problem, X, _inputs(problem, u))
    return tracking + obstacle + state


def cost_and_gradient(problem: ControlProblem, u, ws: RolloutWorkspace | None = None):
    """Cost ``l(u)`` and its exact gradient by a reverse sweep.

    The cost value is bit-identical to :func:`cost`.
    """
    if ws is None:
        ws = RolloutWorkspace(problem)
    X = rollout(problem, u, ws)
    U = _inputs(problem, u)
    tracking, obstacle, state = _terms(problem, X, U)
    value = tracking + obstacle + state

    c = problem.cost
    N = problem.N
    # direct partial derivatives of the stage/terminal costs
    gX = np.empty_like(X)
    gX[:N] = (X[:N] - c.x_ref) @ (c.Q + c.Q.T)
    gX[N] = (X[N] - c.x_ref) @ (c.Q_N + c.Q_N.T)
    gU = (U - c.u_ref) @ (c.R + c.R.T)
    if problem.obstacles:
        Z = X[:, problem.position_slice]
        gX[:, problem.position_slice] += penalty_gradient(_active_masks(problem), Z)
    for pen in problem.state_penalties:
        if pen.terminal:
            v = np.maximum(np.asarray(pen.g(X[N], None), dtype=float), 0.0)
            gx, _ = pen.g_vjp(X[N], None, 2.0 * pen.beta * v)
            gX[N] += gx
        else:
            for k in range(N):
                v = np.maximum(np.asarray(pen.g(X[k], U[k]), dtype=float), 0.0)
                gx, gu = pen.g_vjp(X[k], U[k], 2.0 * pen.beta * v)
                gX[k] += gx
                gU[k] += gu

    P = ws.costates
    G = ws.grad
    adjoint = problem.dynamics.adjoint_step
    P[N] = gX[N]
    for k in range(N - 1, -1, -1):
        ax, au = adjoint(X[k], U[k], P[k + 1])
        G[k] = au + gU[k]
        P[k] = ax + gX[k]
    return value, G.ravel().copy()


class ShootingObjective:
    """Binds a problem and a private workspace into the solver's objective
    interface (``cost``, ``cost_and_gradient`` and ``box``)."""

    def __init__(self, problem: ControlProblem):
        from .panoc import BoxProjector

        self.problem = problem
        self.ws = RolloutWorkspace(problem)
        N = problem.N
        self.box = BoxProjector(np.tile(problem.box.u_min, N), np.tile(problem.box.u_max, N))

    @property
    def n(self):
        return self.problem.n

    def cost(self, u):
        return cost(self.problem, u, self.ws)

    def cost_and_gradient(self, u):
        return cost_and_gradient(self.problem, u, self.ws)
