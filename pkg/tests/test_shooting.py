import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from panocnav import (ControlProblem, DivergedRolloutError, DynamicsModel, InputBox,
                      QuadraticStageCost, RolloutWorkspace, ShootingObjective,
                      StateInequalityPenalty, cost, cost_and_gradient, cost_terms,
                      discretize_euler, discretize_rk4, make_integrator_model, rollout)
from panocnav import obstacles as obst

from conftest import (central_difference, gradient_error, integrator_problem,
                      obstacles_on_path, trailer_problem)


def linear_model(a=1.0):
    # x_dot = a x + u, scalar, plain-numpy kernels
    return DynamicsModel(1, 1, lambda x, u: a * x + u,
                         lambda x, u, p: (a * p, p.copy()), continuous=True)


def rk4_reference(x, u, dt, L=0.5):
    """One RK4 step of the trailer kinematics, coded from scratch."""
    def f(x):
        s, c = np.sin(x[2]), np.cos(x[2])
        w = (u[1] * c - u[0] * s) / L
        return np.array([u[0] + L * s * w, u[1] - L * c * w, w])
    k1 = f(x)
    k2 = f(x + dt / 2 * k1)
    k3 = f(x + dt / 2 * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


class TestDiscretization:

    def test_rk4_exponential(self):
        m = discretize_rk4(linear_model(), 0.1)
        expected = 1 + 0.1 + 0.1**2 / 2 + 0.1**3 / 6 + 0.1**4 / 24
        assert m.step(np.array([1.0]), np.array([0.0]))[0] == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(1.1051708333333333, abs=1e-15)

    def test_euler_exponential(self):
        m = discretize_euler(linear_model(), 0.1)
        assert m.step(np.array([1.0]), np.array([0.0]))[0] == pytest.approx(1.1, abs=1e-15)

    @pytest.mark.parametrize("disc", [discretize_rk4, discretize_euler])
    def test_zero_field_is_identity(self, disc):
        zero = DynamicsModel(2, 1, lambda x, u: np.zeros(2),
                             lambda x, u, p: (np.zeros(2), np.zeros(1)), continuous=True)
        m = disc(zero, 0.3)
        assert_array_equal(m.step(np.array([1.5, -2.0]), np.array([7.0])), [1.5, -2.0])
        assert not m.continuous

    @pytest.mark.parametrize("disc", [discretize_rk4, discretize_euler])
    def test_adjoint_matches_finite_differences(self, disc, rng):
        p = trailer_problem(method="rk4" if disc is discretize_rk4 else "euler")
        m = p.dynamics
        for _ in range(20):
            x, u, lam = rng.standard_normal(3), rng.standard_normal(2), rng.standard_normal(3)
            gx, gu = m.adjoint_step(x, u, lam)
            fdx = central_difference(lambda v: lam @ m.step(v, u), x)
            fdu = central_difference(lambda v: lam @ m.step(x, v), u)
            assert_allclose(gx, fdx, atol=1e-8)
            assert_allclose(gu, fdu, atol=1e-8)

    def test_rejects_discrete_model_and_bad_dt(self):
        m = discretize_rk4(linear_model(), 0.1)
        with pytest.raises(ValueError):
            discretize_rk4(m, 0.1)
        with pytest.raises(ValueError):
            discretize_euler(linear_model(), 0.0)


class TestRollout:

    def test_prefix_sums(self):
        m = DynamicsModel(1, 1, lambda x, u: x + u, lambda x, u, p: (p, p))
        c = QuadraticStageCost.diagonal([1], [0], [0], [0], [0])
        p = ControlProblem(3, m, c, InputBox.symmetric(np.inf, 1), [0.0], position_slice=(0,))
        assert_array_equal(rollout(p, [1.0, 2.0, 3.0])[:, 0], [0, 1, 3, 6])

    def test_identity_dynamics(self):
        m = DynamicsModel(2, 1, lambda x, u: x.copy(), lambda x, u, p: (p, np.zeros(1)))
        c = QuadraticStageCost.diagonal([1, 1], [0], [0, 0], [0, 0], [0])
        p = ControlProblem(1, m, c, InputBox.symmetric(1, 1), [0.3, -0.4])
        assert_array_equal(rollout(p, [0.5])[1], [0.3, -0.4])

    def test_trailer_against_reference_integrator(self, rng):
        p = trailer_problem(N=30)
        u = rng.uniform(-0.8, 0.8, 60)
        X = rollout(p, u)
        x = np.array(p.x0)
        for k in range(30):
            x = rk4_reference(x, u[2 * k:2 * k + 2], 0.1)
            assert_allclose(X[k + 1], x, atol=1e-12)

    def test_divergence_names_stage(self):
        m = DynamicsModel(1, 1, lambda x, u: x * u, lambda x, u, p: (p * u, p * x))
        c = QuadraticStageCost.diagonal([1], [0], [0], [0], [0])
        p = ControlProblem(5, m, c, InputBox.symmetric(np.inf, 1), [1.0], position_slice=(0,))
        with pytest.raises(DivergedRolloutError) as err, np.errstate(over="ignore"):
            rollout(p, [1e200, 1e200, 1.0, 1.0, 1.0])
        assert err.value.stage == 2

    def test_input_length_checked(self):
        with pytest.raises(ValueError):
            rollout(trailer_problem(N=5), np.zeros(9))


class TestCost:

    def test_equilibrium_is_zero(self):
        p = trailer_problem(N=10, x0=(1.0, 2.0, 0.3), x_ref=(1.0, 2.0, 0.3))
        assert cost(p, np.zeros(20)) == 0.0

    def test_one_step_quadratic(self):
        p = integrator_problem()
        assert cost(p, [1.0]) == 1.0
        value, grad = cost_and_gradient(p, [1.0])
        assert value == 1.0
        assert_allclose(grad, [-2.0])

    def test_constant_dynamics_zero_gradient(self):
        m = DynamicsModel(1, 1, lambda x, u: np.array([4.0]),
                          lambda x, u, p: (np.zeros(1), np.zeros(1)))
        c = QuadraticStageCost.diagonal([1], [0], [1], [4.0], [0])
        p = ControlProblem(4, m, c, InputBox.symmetric(1, 1), [4.0], position_slice=(0,))
        assert_array_equal(cost_and_gradient(p, np.ones(4))[1], np.zeros(4))

    def test_against_independent_evaluation(self, rng):
        b = obst.ball([1.0, 0.3], 0.6, eta=3.0)
        p = trailer_problem(N=25, obstacles=[b])
        u = rng.uniform(-0.8, 0.8, 50)
        # independent script: loop, reference integrator, closed-form penalty
        x = np.array(p.x0)
        total = 0.0
        for k in range(25):
            uk = u[2 * k:2 * k + 2]
            dx = x - np.array([3.77, 1.40, 0.0])
            total += 0.1 * dx @ dx + 0.01 * uk @ uk
            total += 3.0 * max(0.0, 1 - np.sum((x[:2] - [1.0, 0.3]) ** 2) / 0.36) ** 2
            x = rk4_reference(x, uk, 0.1)
        dx = x - np.array([3.77, 1.40, 0.0])
        total += 0.1 * dx @ dx
        total += 3.0 * max(0.0, 1 - np.sum((x[:2] - [1.0, 0.3]) ** 2) / 0.36) ** 2
        assert cost(p, u) == pytest.approx(total, rel=1e-10)

    def test_decomposition(self, rng):
        u = rng.uniform(-0.8, 0.8, 40)
        p = trailer_problem(N=20)
        p = trailer_problem(N=20, obstacles=obstacles_on_path(p, u, rng))
        terms = cost_terms(p, u)
        assert terms["obstacle"] > 0.0 and terms["state"] == 0.0
        assert cost(p, u) == terms["tracking"] + terms["obstacle"] + terms["state"]

    def test_value_bit_identical_to_cost(self, rng):
        u = rng.uniform(-0.8, 0.8, 40)
        p = trailer_problem(N=20)
        p = trailer_problem(N=20, obstacles=obstacles_on_path(p, u, rng))
        assert cost_and_gradient(p, u)[0] == cost(p, u)


class TestGradient:

    @pytest.mark.parametrize("method", ["rk4", "euler"])
    def test_finite_differences_with_obstacles(self, method, rng):
        for _ in range(5):
            u = rng.uniform(-0.8, 0.8, 30)
            p = trailer_problem(N=15, method=method)
            p = trailer_problem(N=15, method=method, obstacles=obstacles_on_path(p, u, rng))
            assert cost_terms(p, u)["obstacle"] > 0
            g = cost_and_gradient(p, u)[1]
            fd = central_difference(lambda v: cost(p, v), u)
            assert gradient_error(g, fd) <= 1e-5

    def test_activation_window(self, rng):
        u = rng.uniform(-0.8, 0.8, 30)
        p = trailer_problem(N=15)
        obs = obstacles_on_path(p, u, rng, count=1)[0]
        p = trailer_problem(N=15, obstacles=[(obs, (3, 9))])
        g = cost_and_gradient(p, u)[1]
        fd = central_difference(lambda v: cost(p, v), u)
        assert gradient_error(g, fd) <= 1e-5

    def test_state_penalties(self, rng):
        # keep the heading below 0.2 at every stage, and y below 0 at the end
        heading = StateInequalityPenalty(
            g=lambda x, u: np.array([x[2] - 0.2, u[0] - 0.5]),
            g_vjp=lambda x, u, w: (np.array([0.0, 0.0, w[0]]), np.array([w[1], 0.0])),
            beta=4.0)
        terminal = StateInequalityPenalty(
            g=lambda x, u: np.array([x[1]]),
            g_vjp=lambda x, u, w: (np.array([0.0, w[0], 0.0]), None),
            beta=2.0, terminal=True)
        base = trailer_problem(N=12)
        p = ControlProblem(base.N, base.dynamics, base.cost, base.box, base.x0,
                           state_penalties=(heading, terminal))
        u = rng.uniform(-0.8, 0.8, 24)
        assert cost_terms(p, u)["state"] > 0
        g = cost_and_gradient(p, u)[1]
        fd = central_difference(lambda v: cost(p, v), u)
        assert gradient_error(g, fd) <= 1e-5


class TestWorkspace:

    def test_results_independent_of_prior_contents(self, rng):
        u = rng.uniform(-0.8, 0.8, 40)
        p = trailer_problem(N=20)
        p = trailer_problem(N=20, obstacles=obstacles_on_path(p, u, rng))
        ws = RolloutWorkspace(p)
        fresh = cost_and_gradient(p, u)
        ws.states[:] = np.nan
        ws.costates[:] = 1e300
        ws.grad[:] = -7.0
        reused = cost_and_gradient(p, u, ws)
        assert reused[0] == fresh[0]
        assert_array_equal(reused[1], fresh[1])

    def test_repeat_calls_bit_identical(self, rng):
        p = trailer_problem(N=20, obstacles=[obst.parabola(eta=20.0)])
        obj = ShootingObjective(p)
        u = rng.uniform(-0.8, 0.8, 40)
        a, b = obj.cost_and_gradient(u), obj.cost_and_gradient(u)
        assert a[0] == b[0]
        assert_array_equal(a[1], b[1])

    def test_objective_box(self):
        obj = ShootingObjective(trailer_problem(N=4))
        assert obj.n == 8
        assert_array_equal(obj.box.project(np.full(8, 2.0)), np.full(8, 0.8))

    def test_workspace_shape_checked(self):
        ws = RolloutWorkspace(trailer_problem(N=4))
        with pytest.raises(ValueError):
            rollout(trailer_problem(N=5), np.zeros(10), ws)
