"""Limited-memory BFGS operator on fixed-point residuals."""

from __future__ import annotations

import numpy as np

__all__ = ["LbfgsBuffer", "lbfgs_direction"]


class LbfgsBuffer:
    """Circular store of up to ``mu`` pairs ``(s, y)``.

    ``apply(q)`` evaluates ``H q`` by the two-loop recursion, where ``H``
    satisfies the inverse secant condition ``H y = s`` on the newest pair.
    A pair is stored only if ``s'y > eps * |s| |y|`` (cautious update), so
    every cached ``rho = 1 / (y's)`` is finite and positive.
    """

    def __init__(self, mu=10, eps=1e-12):
        if mu < 0:
            raise ValueError("memory length must be nonnegative")
        self.mu = int(mu)
        self.eps = eps
        self.S = None
        self.Y = None
        self.rho = np.zeros(self.mu)
        self.count = 0
        self.cursor = 0  # slot of the next push

    def __len__(self):
        return self.count

    def reset(self):
        self.count = 0
        self.cursor = 0

    def push(self, s, y):
        """Store ``(s, y)`` if it passes the curvature test; return whether it did."""
        if self.mu == 0:
            return False
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        sy = float(s @ y)
        if not sy > self.eps * np.linalg.norm(s) * np.linalg.norm(y):
            return False
        if self.S is None or self.S.shape[1] != s.size:
            self.S = np.zeros((self.mu, s.size))
            self.Y = np.zeros((self.mu, s.size))
            self.reset()
        self.S[self.cursor] = s
        self.Y[self.cursor] = y
        self.rho[self.cursor] = 1.0 / sy
        self.cursor = (self.cursor + 1) % self.mu
        self.count = min(self.count + 1, self.mu)
        return True

    def _order(self):
        # newest first
        return [(self.cursor - 1 - i) % self.mu for i in range(self.count)]

    def newest(self):
        if self.count == 0:
            return None
        j = (self.cursor - 1) % self.mu
        return self.S[j], self.Y[j]

    def apply(self, q):
        """Return ``H q``; with empty memory ``H`` is the identity."""
        q = np.array(q, dtype=float)
        if self.count == 0:
            return q
        order = self._order()
        alpha = np.empty(self.count)
        for i, j in enumerate(order):
            alpha[i] = self.rho[j] * (self.S[j] @ q)
            q -= alpha[i] * self.Y[j]
        s, y = self.S[order[0]], self.Y[order[0]]
        q *= (s @ y) / (y @ y)
        for i in range(self.count - 1, -1, -1):
            j = order[i]
            beta = self.rho[j] * (self.Y[j] @ q)
            q += (alpha[i] - beta) * self.S[j]
        return q


def lbfgs_direction(buffer: LbfgsBuffer, r, gamma):
    """Quasi-Newton direction ``-H r``; ``-gamma r`` when the memory is empty."""
    r = np.asarray(r, dtype=float)
    if len(buffer) == 0:
        return -gamma * r
    return -buffer.apply(r)
