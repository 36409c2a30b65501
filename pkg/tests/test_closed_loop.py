import numpy as np
import pytest
from numpy.testing import assert_array_equal

from panocnav.sim import (load_scenario, run_baseline_comparison, run_closed_loop,
                          warm_start_shift)


@pytest.fixture(scope="module")
def parabola():
    return load_scenario("fig3_parabola")


@pytest.fixture(scope="module")
def parabola_run(parabola):
    return run_closed_loop(parabola)


class TestWarmStartShift:

    def test_shift_rule(self):
        assert_array_equal(warm_start_shift([1.0, 2.0, 3.0], 1), [2.0, 3.0, 3.0])

    def test_vector_inputs(self):
        assert_array_equal(warm_start_shift([1, 2, 3, 4, 5, 6], 2), [3, 4, 5, 6, 5, 6])

    def test_constant_unchanged(self):
        u = np.full(10, 0.3)
        assert_array_equal(warm_start_shift(u, 2), u)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            warm_start_shift(np.zeros(5), 2)


class TestClosedLoop:

    def test_equilibrium_start(self, parabola):
        s = parabola.replace(obstacles=(), sim_steps=5, position_tol=-1.0)
        log = run_closed_loop(s, s.x_ref)
        assert len(log) == 5
        assert np.max(np.abs(np.array(log.inputs))) <= 1e-9
        assert log.position_error() <= 1e-9

    def test_stops_inside_convergence_radius(self, parabola):
        log = run_closed_loop(parabola.replace(obstacles=()), parabola.x_ref)
        assert len(log) == 0 and log.reached_target()

    def test_reaches_target_clear(self, parabola_run):
        log = parabola_run
        assert log.reached_target(1e-2)
        assert log.clear_of_obstacles()
        assert log.all_converged()
        assert max(log.iterations) < 500

    def test_one_step_prediction_is_exact(self, parabola_run):
        log = parabola_run
        for k in range(len(log) - 1):
            assert_array_equal(log.predicted[k][1], log.states[k + 1])
        assert_array_equal(log.predicted[-1][1], log.final_state)

    def test_inputs_within_box(self, parabola, parabola_run):
        U = np.array(parabola_run.inputs)
        assert np.all(U >= parabola.u_min) and np.all(U <= parabola.u_max)

    def test_bit_identical_repeat(self, parabola, parabola_run):
        again = run_closed_loop(parabola)
        assert_array_equal(np.array(again.states), np.array(parabola_run.states))
        assert_array_equal(np.array(again.inputs), np.array(parabola_run.inputs))
        assert again.iterations == parabola_run.iterations

    def test_perturbation_is_seeded(self, parabola):
        s = parabola.replace(perturbation=1e-3, seed=7, sim_steps=10)
        a, b = run_closed_loop(s), run_closed_loop(s)
        assert_array_equal(np.array(a.states), np.array(b.states))
        c = run_closed_loop(s.replace(seed=8))
        assert not np.array_equal(np.array(a.states), np.array(c.states))

    def test_warm_start_saves_iterations(self, parabola):
        s = parabola.replace(sim_steps=30)
        warm = run_closed_loop(s, warm_start=True)
        cold = run_closed_loop(s, warm_start=False)
        assert sum(warm.iterations) < sum(cold.iterations)

    def test_failed_solve_is_logged_not_fatal(self, parabola):
        s = parabola.replace(sim_steps=3)
        log = run_closed_loop(s, config=s.solver_config(max_iter=2))
        assert log.status == ["max-iterations"] * 3
        assert not log.all_converged()


class TestBaselineComparison:

    def test_zero_memory_columns_coincide(self, parabola):
        s = parabola.replace(sim_steps=5)
        table = run_baseline_comparison(s, config=s.solver_config(memory=0))
        assert len(table.rows) == 5
        for row in table.rows:
            assert row["panoc_iters"] == row["pg_iters"]
            assert row["panoc_status"] == row["pg_status"]

    def test_strongly_convex_toy(self):
        table = run_baseline_comparison(load_scenario("integrator_toy"))
        assert table.rows
        for row in table.rows:
            assert row["panoc_iters"] <= row["pg_iters"]

    def test_summary_keys(self, parabola):
        table = run_baseline_comparison(parabola, steps=3)
        summary = table.summary()
        assert summary["steps"] == 3
        assert summary["iteration_ratio"] == pytest.approx(
            summary["panoc_mean_iterations"] / summary["pg_mean_iterations"])
