import numpy as np
import pytest

from panocnav import (ControlProblem, InputBox, QuadraticStageCost, discretize_euler,
                      discretize_rk4, make_integrator_model, make_trailer_model, rollout)
from panocnav import obstacles as obst


def trailer_problem(N=20, method="rk4", dt=0.1, x0=(-0.1, -0.2, np.pi / 5),
                    x_ref=(3.77, 1.40, 0.0), obstacles=(), bound=0.8):
    disc = discretize_rk4 if method == "rk4" else discretize_euler
    model = disc(make_trailer_model(0.5), dt)
    cost = QuadraticStageCost.diagonal([0.1] * 3, [0.01] * 2, [0.1] * 3, x_ref, [0.0, 0.0])
    return ControlProblem(N, model, cost, InputBox.symmetric(bound, 2), x0, obstacles)


def integrator_problem(N=1, Q=0.0, R=0.0, QN=1.0, x0=0.0, x_ref=2.0, bound=np.inf):
    model = discretize_euler(make_integrator_model(1), 1.0)
    cost = QuadraticStageCost.diagonal([Q], [R], [QN], [x_ref], [0.0])
    return ControlProblem(N, model, cost, InputBox.symmetric(bound, 1), [x0])


def obstacles_on_path(problem, u, rng, count=2, eta=5.0):
    """Place obstacles so that some predicted positions are inside them."""
    X = rollout(problem, u)
    out = []
    for j in range(count):
        k = rng.integers(1, problem.N + 1)
        c = X[k, :2] + 0.05 * rng.standard_normal(2)
        if j % 2 == 0:
            out.append(obst.ball(c, 0.3 + 0.2 * rng.random(), eta=eta))
        else:
            out.append(obst.rectangle(c - 0.3, c + 0.25, eta=eta))
    return out


def central_difference(f, u, h=1e-6):
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2 * h)
    return g


def gradient_error(g, fd):
    return float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
