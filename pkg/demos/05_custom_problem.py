"""
Building a problem by hand
==========================

The library does not need scenario files: a model, a quadratic cost, an
input box and a list of obstacles make a ControlProblem, and
ShootingObjective turns it into the cost/gradient oracle PANOC expects.
Here an ellipse and a half-plane are added, and a state constraint on
the heading is imposed as a soft penalty.
"""

import numpy as np

from panocnav import (ControlProblem, InputBox, QuadraticStageCost, ShootingObjective,
                      StateInequalityPenalty, cost_terms, discretize_rk4, make_trailer_model,
                      rollout, solve)
from panocnav import obstacles as obst

N = 40
model = discretize_rk4(make_trailer_model(0.5), 0.1)
weights = QuadraticStageCost.diagonal([1.0, 1.0, 0.0], [0.05, 0.05], [20.0, 20.0, 0.0],
                                      [2.0, 0.0, 0.0], [0.0, 0.0])
# slightly off the straight line: centred on it, the straight path is a
# symmetric stationary point with zero sideways gradient
ellipse = obst.ellipsoid([1.0, -0.1], [[4.0, 0.0], [0.0, 16.0]], eta=5.0, margin=0.05)
floor = obst.halfspace([0.0, 1.0], -0.6, eta=5.0)  # y < -0.6 is forbidden
heading = StateInequalityPenalty(
    g=lambda x, u: np.array([abs(x[2]) - 1.2]),
    g_vjp=lambda x, u, w: (np.array([0.0, 0.0, np.sign(x[2]) * w[0]]), np.zeros(2)),
    beta=10.0)

problem = ControlProblem(N, model, weights, InputBox.symmetric(0.8, 2), [0.0, 0.0, 0.0],
                         obstacles=[ellipse, floor], state_penalties=[heading])
objective = ShootingObjective(problem)

report = solve(objective, np.zeros(problem.n))
print(report.status, report.iterations, "iterations, residual", report.residual_inf)
print("cost terms:", cost_terms(problem, report.u_star))

X = rollout(problem, report.u_star)
print("closest approach to the ellipse centre:",
      np.min(np.linalg.norm(X[:, :2] - [1.0, -0.1], axis=1)).round(3))
print("lowest y:", X[:, 1].min().round(3), " final position:", X[-1, :2].round(3))
