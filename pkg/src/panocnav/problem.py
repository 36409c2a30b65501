"""NMPC problem data: dynamics, quadratic costs, input box, soft state
constraints and the container that ties them together.

All objects here are treated as immutable once built; arrays are stored
read-only so a problem can be shared between concurrent solves.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .obstacles import Obstacle

__all__ = [
    "DynamicsModel",
    "QuadraticStageCost",
    "InputBox",
    "StateInequalityPenalty",
    "ControlProblem",
    "make_trailer_model",
    "make_integrator_model",
    "validate",
]


def _frozen(a, ndim=None):
    arr = np.array(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DynamicsModel:
    """Dynamics given by a step map and its Jacobian-transpose product.

    For a continuous-time model (``continuous=True``) ``step`` is the
    right-hand side ``f_c(x, u)``; after discretization it is the map
    ``x -> x_next``. ``adjoint_step(x, u, p)`` returns the pair
    ``(J_x^T p, J_u^T p)`` for the Jacobians of ``step`` at ``(x, u)``.
    """

    n_x: int
    n_u: int
    step: Callable
    adjoint_step: Callable
    continuous: bool = False
    name: str = ""


@dataclass(frozen=True)
class QuadraticStageCost:
    """``(x-x_ref)' Q (x-x_ref) + (u-u_ref)' R (u-u_ref)`` per stage and
    ``(x-x_ref)' Q_N (x-x_ref)`` at the end of the horizon."""

    Q: np.ndarray
    R: np.ndarray
    Q_N: np.ndarray
    x_ref: np.ndarray
    u_ref: np.ndarray

    def __post_init__(self):
        for name, nd in (("Q", 2), ("R", 2), ("Q_N", 2), ("x_ref", 1), ("u_ref", 1)):
            object.__setattr__(self, name, _frozen(getattr(self, name), nd))

    @classmethod
    def diagonal(cls, q, r, q_n, x_ref, u_ref):
        return cls(np.diag(q), np.diag(r), np.diag(q_n), x_ref, u_ref)

    def stage(self, x, u):
        """Stage cost, vectorized over leading dimensions of ``x`` and ``u``."""
        dx = np.asarray(x) - self.x_ref
        du = np.asarray(u) - self.u_ref
        return (np.einsum("...i,ij,...j->...", dx, self.Q, dx)
                + np.einsum("...i,ij,...j->...", du, self.R, du))

    def terminal(self, x):
        dx = np.asarray(x) - self.x_ref
        return np.einsum("...i,ij,...j->...", dx, self.Q_N, dx)


@dataclass(frozen=True)
class InputBox:
    """Stage-invariant box ``u_min <= u <= u_max`` (entries may be infinite).

    Crossed bounds are not rejected here; :func:`validate` reports them.
    """

    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u_min", _frozen(self.u_min, 1))
        object.__setattr__(self, "u_max", _frozen(self.u_max, 1))

    @classmethod
    def symmetric(cls, bound, n_u):
        return cls(-bound * np.ones(n_u), bound * np.ones(n_u))


@dataclass(frozen=True)
class StateInequalityPenalty:
    """Soft version of ``g(x, u) <= 0``: adds ``beta * sum([g]_+^2)``.

    ``g_vjp(x, u, w)`` must return ``(J_x^T w, J_u^T w)``. A terminal
    penalty (``terminal=True``) is applied to ``x_N`` only and is called
    with ``u=None``; its ``g_vjp`` may return ``None`` for the input part.
    """

    g: Callable
    g_vjp: Callable
    beta: float
    terminal: bool = False


@dataclass(frozen=True)
class ControlProblem:
    """A single-shooting NMPC instance.

    ``obstacles`` holds ``(Obstacle, (first, last))`` pairs, where the
    window lists the stages (inclusive, ``0..N``) at which the obstacle is
    enforced. Plain :class:`Obstacle` entries are accepted and get the full
    window. ``position_slice`` picks the obstacle coordinates out of the
    state vector.
    """

    N: int
    dynamics: DynamicsModel
    cost: QuadraticStageCost
    box: InputBox
    x0: np.ndarray
    obstacles: tuple = ()
    state_penalties: tuple = ()
    position_slice: tuple = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "x0", _frozen(self.x0, 1))
        pairs = []
        for item in self.obstacles:
            if isinstance(item, Obstacle):
                pairs.append((item, (0, self.N)))
            else:
                obs, window = item
                pairs.append((obs, (int(window[0]), int(window[1]))))
        object.__setattr__(self, "obstacles", tuple(pairs))
        object.__setattr__(self, "state_penalties", tuple(self.state_penalties))
        object.__setattr__(self, "position_slice", tuple(int(i) for i in self.position_slice))

    @property
    def n(self):
        return self.N * self.dynamics.n_u

    def with_initial_state(self, x0):
        return ControlProblem(self.N, self.dynamics, self.cost, self.box, x0,
                              self.obstacles, self.state_penalties,
                              self.position_slice)


@functools.lru_cache(maxsize=None)
def _trailer_kernels(length):
    L = length

    @njit
    def rhs(x, u):
        s = np.sin(x[2])
        c = np.cos(x[2])
        theta_dot = (u[1] * c - u[0] * s) / L
        out = np.empty(3)
        out[0] = u[0] + L * s * theta_dot
        out[1] = u[1] - L * c * theta_dot
        out[2] = theta_dot
        return out

    @njit
    def rhs_vjp(x, u, p):
        s = np.sin(x[2])
        c = np.cos(x[2])
        theta_dot = (u[1] * c - u[0] * s) / L
        # every output depends on theta_dot through w
        w = L * s * p[0] - L * c * p[1] + p[2]
        gx = np.zeros(3)
        gx[2] = (theta_dot * L * (c * p[0] + s * p[1])
                 - w * (u[1] * s + u[0] * c) / L)
        gu = np.empty(2)
        gu[0] = p[0] - w * s / L
        gu[1] = p[1] + w * c / L
        return gx, gu

    return rhs, rhs_vjp


def make_trailer_model(length=0.5):
    """Continuous-time kinematics of a holonomic robot towing a trailer.

    State ``(p_x, p_y, theta)`` is the trailer position and heading, input
    ``(u_x, u_y)`` the towing vehicle's velocity reference::

        theta_dot = (u_y cos(theta) - u_x sin(theta)) / L
        p_x_dot   = u_x + L sin(theta) theta_dot
        p_y_dot   = u_y - L cos(theta) theta_dot

    Returns a continuous :class:`DynamicsModel` with jitted kernels; use
    :func:`panocnav.shooting.discretize_rk4` or ``discretize_euler`` to get
    a discrete model.
    """
    if not length > 0:
        raise ValueError(f"trailer length must be positive, got {length}")
    rhs, rhs_vjp = _trailer_kernels(float(length))
    return DynamicsModel(3, 2, rhs, rhs_vjp, continuous=True,
                         name=f"trailer(L={float(length)!r})")


@functools.lru_cache(maxsize=None)
def _integrator_kernels(dim):
    @njit
    def rhs(x, u):
        return u.copy()

    @njit
    def rhs_vjp(x, u, p):
        return np.zeros(dim), p.copy()

    return rhs, rhs_vjp


def make_integrator_model(dim=2):
    """Continuous single integrator ``x_dot = u`` in ``dim`` dimensions."""
    rhs, rhs_vjp = _integrator_kernels(int(dim))
    return DynamicsModel(dim, dim, rhs, rhs_vjp, continuous=True, name=f"integrator({dim})")


def _is_psd_like(M):
    return np.allclose(M, M.T) and np.all(np.diag(0.5 * (M + M.T)) >= 0)


def validate(problem: ControlProblem) -> list:
    """Collect every invariant violation of ``problem``.

    An empty list means the problem is well formed.
    """
    errors = []
    n_x, n_u = problem.dynamics.n_x, problem.dynamics.n_u
    if problem.N < 1:
        errors.append(f"horizon N must be >= 1, got {problem.N}")
    if problem.dynamics.continuous:
        errors.append("dynamics are continuous-time; discretize before solving")

    c = problem.cost
    for name, M, k in (("Q", c.Q, n_x), ("R", c.R, n_u), ("Q_N", c.Q_N, n_x)):
        if M.shape != (k, k):
            errors.append(f"{name} has shape {M.shape}, expected {(k, k)}")
        elif not _is_psd_like(M):
            errors.append(f"{name} is not symmetric positive semidefinite")
    if c.x_ref.shape != (n_x,):
        errors.append(f"x_ref has length {c.x_ref.size}, expected {n_x}")
    if c.u_ref.shape != (n_u,):
        errors.append(f"u_ref has length {c.u_ref.size}, expected {n_u}")
    if problem.x0.shape != (n_x,):
        errors.append(f"x0 has length {problem.x0.size}, expected {n_x}")

    b = problem.box
    if b.u_min.shape != (n_u,) or b.u_max.shape != (n_u,):
        errors.append(f"box bounds must have length {n_u}")
    elif np.any(b.u_min > b.u_max):
        errors.append("box bounds crossed: u_min > u_max")

    sl = problem.position_slice
    if len(set(sl)) != len(sl):
        errors.append("duplicate slice index in position_slice")
    if any(i < 0 or i >= n_x for i in sl):
        errors.append(f"position_slice index out of range [0, {n_x})")

    for j, (obs, (first, last)) in enumerate(problem.obstacles):
        if obs.dim != len(sl):
            errors.append(f"obstacle {j} has dimension {obs.dim}, position slice has {len(sl)}")
        if not 0 <= first <= last <= problem.N:
            errors.append(f"obstacle {j} activation window {(first, last)} outside [0, {problem.N}]")
    for j, pen in enumerate(problem.state_penalties):
        if not pen.beta > 0:
            errors.append(f"state penalty {j} has nonpositive beta {pen.beta}")
    return errors
