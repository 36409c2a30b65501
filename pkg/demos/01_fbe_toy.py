"""
The forward-backward envelope on a one-dimensional toy
======================================================

l(u) = sin(2u) over U = [0, 2] has two local minima, the endpoints u = 0
and u = 2, and a local maximum at pi/4. The envelope phi_gamma lies below
l, touches it at the critical points and is real valued, so a plain
line search can be run on it. PANOC started anywhere in (0, 2) ends at
one of the two minima.
"""

import numpy as np

from panocnav import BoxProjector, FunctionObjective, fbe, solve

toy = FunctionObjective(lambda u: float(np.sin(2 * u[0])),
                        lambda u: np.array([2 * np.cos(2 * u[0])]),
                        BoxProjector([0.0], [2.0]))
gamma = 0.15

# tabulate l and phi on a grid
print(f"{'u':>6} {'l(u)':>10} {'phi(u)':>10}")
for u in np.linspace(0.0, 2.0, 11):
    c, g = toy.cost_and_gradient(np.array([u]))
    print(f"{u:6.2f} {c:10.6f} {fbe(gamma, [u], c, g, toy.box):10.6f}")

# closed form at u = 0.5, where the projection is inactive
c, g = toy.cost_and_gradient(np.array([0.5]))
print("\nphi(0.5) =", fbe(gamma, [0.5], c, g, toy.box),
      " closed form:", np.sin(1) - gamma / 2 * (2 * np.cos(1)) ** 2)

# PANOC from several starts
for u0 in (0.1, 0.5, 1.0, 1.5, 1.9):
    rep = solve(toy, [u0])
    print(f"start {u0:.1f} -> {rep.u_star[0]:.9f} after {rep.iterations} iterations ({rep.status})")
