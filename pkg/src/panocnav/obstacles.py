"""Smooth obstacle penalties.

An obstacle is the open set ``O = {z : h_i(z) > 0 for all i}``. Being
outside ``O`` is encoded by the C^1 equality ``psi_O(z) = 0`` with::

    psi_O(z) = 1/2 * prod_i [h_i(z)]_+^2

which is positive exactly on ``O`` and whose gradient vanishes on the
boundary. The soft-constraint penalty added to the stage cost is
``sum_j eta_j * prod_i [h_ij(z)]_+^2``, i.e. ``2 * eta_j * psi_j``.

Every function accepts a single point of shape ``(n_d,)`` or a batch of
shape ``(..., n_d)`` and broadcasts over the leading dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SmoothInequality",
    "Obstacle",
    "violation",
    "violation_gradient",
    "penalty",
    "penalty_gradient",
    "halfspace",
    "polytope",
    "rectangle",
    "ellipsoid",
    "ball",
    "parabola",
    "sine_band",
    "from_functions",
]


@dataclass(frozen=True)
class SmoothInequality:
    """One defining inequality ``h(z) > 0`` and its gradient."""

    eval: Callable
    grad: Callable


@dataclass(frozen=True)
class Obstacle:
    inequalities: tuple
    eta: float = 1.0
    dim: int = 2
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        if len(self.inequalities) < 1:
            raise ValueError("an obstacle needs at least one inequality")
        if not self.eta > 0:
            raise ValueError(f"penalty weight eta must be positive, got {self.eta}")

    @property
    def m(self):
        return len(self.inequalities)

    def scaled(self, factor):
        return Obstacle(self.inequalities, self.eta * factor, self.dim, self.name)


def _check_dim(obstacle, z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] != obstacle.dim:
        raise ValueError(f"expected points of dimension {obstacle.dim}, got shape {z.shape}")
    return z


def _plus_factors(obstacle, z):
    # shape (m, ...): [h_i(z)]_+
    return np.stack([np.maximum(ineq.eval(z), 0.0) for ineq in obstacle.inequalities])


def _product_of_squares(P):
    out = np.ones(P.shape[1:])
    for Pi in P:
        out = out * (Pi * Pi)
    return out


def violation(obstacle, z):
    """``psi_O(z) = 1/2 prod_i [h_i(z)]_+^2``; zero exactly outside ``O``."""
    z = _check_dim(obstacle, z)
    return 0.5 * _product_of_squares(_plus_factors(obstacle, z))


def _plus_gradient(obstacle, z, P):
    # sum_i [h_i]_+ grad h_i prod_{j != i} [h_j]_+^2, without dividing by h_i
    m = obstacle.m
    out = np.zeros(z.shape)
    for i, ineq in enumerate(obstacle.inequalities):
        weight = P[i]
        for j in range(m):
            if j != i:
                weight = weight * (P[j] * P[j])
        out = out + weight[..., None] * np.asarray(ineq.grad(z))
    return out


def violation_gradient(obstacle, z):
    """Gradient of :func:`violation`; continuous and zero outside ``O``."""
    z = _check_dim(obstacle, z)
    return _plus_gradient(obstacle, z, _plus_factors(obstacle, z))


def _entries(obstacle_list):
    for item in obstacle_list:
        if isinstance(item, Obstacle):
            yield item, True
        else:
            yield item


def penalty(obstacle_list, z):
    """Weighted obstacle penalty ``sum_j eta_j prod_i [h_ij(z)]_+^2``.

    ``obstacle_list`` holds obstacles or ``(obstacle, active)`` pairs;
    ``active`` may be a boolean or a boolean array over the batch.
    """
    z = np.asarray(z, dtype=float)
    total = np.zeros(z.shape[:-1])
    for obs, active in _entries(obstacle_list):
        zc = _check_dim(obs, z)
        term = obs.eta * _product_of_squares(_plus_factors(obs, zc))
        total = total + np.where(active, term, 0.0)
    return total


def penalty_gradient(obstacle_list, z):
    z = np.asarray(z, dtype=float)
    total = np.zeros(z.shape)
    for obs, active in _entries(obstacle_list):
        zc = _check_dim(obs, z)
        g = (2.0 * obs.eta) * _plus_gradient(obs, zc, _plus_factors(obs, zc))
        total = total + np.where(np.asarray(active)[..., None], g, 0.0)
    return total


# -- constructors ------------------------------------------------------------

def _affine(a, b):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    b = float(b)
    return SmoothInequality(
        eval=lambda z: b - np.asarray(z) @ a,
        grad=lambda z: np.broadcast_to(-a, np.shape(z)),
    )


def halfspace(a, b, eta=1.0, margin=0.0, name="halfspace"):
    """``{z : b - a'z > 0}``, shifted outward by ``margin`` (in units of z)."""
    a = np.asarray(a, dtype=float)
    return Obstacle((_affine(a, b + margin * np.linalg.norm(a)),), eta, a.size, name)


def polytope(A, b, eta=1.0, margin=0.0, name="polytope"):
    """Intersection of the open half-spaces ``b_i - a_i'z > 0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    ineqs = [_affine(a, bi + margin * np.linalg.norm(a)) for a, bi in zip(A, b)]
    return Obstacle(ineqs, eta, A.shape[1], name)


def rectangle(lower, upper, eta=1.0, margin=0.0, name="rectangle"):
    """Axis-aligned box ``lower < z < upper`` as 2*n_d half-spaces.

    Each half-space is scaled by the inflated half-width along its axis,
    so every factor equals 1 at the center and the penalty there is
    exactly ``eta`` regardless of the rectangle's size.
    """
    lower = np.asarray(lower, dtype=float) - margin
    upper = np.asarray(upper, dtype=float) + margin
    half = 0.5 * (upper - lower)
    eye = np.eye(lower.size) / half[:, None]
    A = np.vstack([-eye, eye])
    b = np.concatenate([-lower / half, upper / half])
    return polytope(A, b, eta, 0.0, name)


def ellipsoid(center, E, eta=1.0, margin=0.0, name="ellipsoid"):
    """``{z : 1 - (z-c)' E (z-c) > 0}`` with E symmetric positive definite.

    ``margin`` lengthens every semi-axis by the same amount.
    """
    c = np.array(center, dtype=float)
    E = np.array(E, dtype=float)
    if margin:
        w, V = np.linalg.eigh(E)
        axes = 1.0 / np.sqrt(w) + margin
        E = (V / axes**2) @ V.T
    c.setflags(write=False)
    E.setflags(write=False)
    E2 = E + E.T

    def h(z):
        d = np.asarray(z) - c
        return 1.0 - np.einsum("...i,ij,...j->...", d, E, d)

    def grad(z):
        return -(np.asarray(z) - c) @ E2

    return Obstacle((SmoothInequality(h, grad),), eta, c.size, name)


def ball(center, radius, eta=1.0, margin=0.0, name="ball"):
    """Open ball of the given radius (plus ``margin``)."""
    c = np.asarray(center, dtype=float)
    rad = float(radius) + margin
    return ellipsoid(c, np.eye(c.size) / rad**2, eta, 0.0, name)


def parabola(eta=1.0, margin=0.0, name="parabola"):
    """Nonconvex set ``{(x, y) : y > x^2, y < 1 + x^2/2}``.

    Enlargement adds ``margin`` to both defining functions.
    """
    m = float(margin)
    h1 = SmoothInequality(
        eval=lambda z: z[..., 1] - z[..., 0] ** 2 + m,
        grad=lambda z: np.stack([-2.0 * z[..., 0], np.ones_like(z[..., 1])], axis=-1),
    )
    h2 = SmoothInequality(
        eval=lambda z: 1.0 + 0.5 * z[..., 0] ** 2 - z[..., 1] + m,
        grad=lambda z: np.stack([z[..., 0], -np.ones_like(z[..., 1])], axis=-1),
    )
    return Obstacle((h1, h2), eta, 2, name)


def sine_band(eta=1.0, margin=0.0, name="sine_band"):
    """``{(x, y) : y > 2 sin(-x/2), y < 3 sin(x/2 - 1), 1 < x < 8}``.

    Enlargement adds ``margin`` to all four defining functions.
    """
    m = float(margin)

    def const(z, v):
        return np.full(np.shape(z)[:-1], v)

    ineqs = (
        SmoothInequality(
            eval=lambda z: z[..., 1] - 2.0 * np.sin(-0.5 * z[..., 0]) + m,
            grad=lambda z: np.stack([np.cos(-0.5 * z[..., 0]), const(z, 1.0)], axis=-1),
        ),
        SmoothInequality(
            eval=lambda z: 3.0 * np.sin(0.5 * z[..., 0] - 1.0) - z[..., 1] + m,
            grad=lambda z: np.stack([1.5 * np.cos(0.5 * z[..., 0] - 1.0), const(z, -1.0)], axis=-1),
        ),
        SmoothInequality(
            eval=lambda z: z[..., 0] - 1.0 + m,
            grad=lambda z: np.stack([const(z, 1.0), const(z, 0.0)], axis=-1),
        ),
        SmoothInequality(
            eval=lambda z: 8.0 - z[..., 0] + m,
            grad=lambda z: np.stack([const(z, -1.0), const(z, 0.0)], axis=-1),
        ),
    )
    return Obstacle(ineqs, eta, 2, name)


def from_functions(pairs, eta=1.0, dim=2, name="generic"):
    """Build an obstacle from ``(h, grad_h)`` callables."""
    return Obstacle(tuple(SmoothInequality(h, g) for h, g in pairs), eta, dim, name)
