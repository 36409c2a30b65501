import numpy as np
import pytest
from numpy.testing import assert_array_equal

from panocnav import obstacles as obst
from panocnav.sim import ScenarioError, load_scenario, parse_scenario, shipped_scenarios
from panocnav.sim.scenario import scenario_path

MINIMAL = """\
schema_version: 1
name: minimal
plant: {model: trailer, length: 0.5}
discretization: {method: rk4, dt: 0.1}
horizon: 10
weights: {Q: [1, 1, 0], R: [0.1, 0.1], QN: [1, 1, 0]}
reference: {x: [1.0, 0.0, 0.0]}
inputs: {u_min: [-1, -1], u_max: [1, 1]}
obstacles: []
initial_states: [[0, 0, 0]]
"""


def with_line(text, old, new):
    assert old in text
    return text.replace(old, new)


class TestShipped:

    def test_names(self):
        names = shipped_scenarios()
        for n in ("fig3_rectangle", "fig3_circles", "fig3_parabola", "fig3_sine",
                  "lab_experiment", "integrator_toy"):
            assert n in names

    @pytest.mark.parametrize("name", shipped_scenarios())
    def test_every_file_loads_and_builds(self, name):
        s = load_scenario(name)
        assert s.name == name
        p = s.build_problem()
        assert p.n == s.N * s.n_u
        assert len(s.initial_states) >= 1

    def test_parabola_inequalities(self, rng):
        s = load_scenario("fig3_parabola")
        [(o, _)] = s.build_obstacles(enlarged=False)
        Z = rng.uniform(-3, 3, (200, 2))
        h1, h2 = (np.array([ineq.eval(z) for z in Z]) for ineq in o.inequalities)
        x, y = Z[:, 0], Z[:, 1]
        np.testing.assert_allclose(h1, y - x**2, atol=1e-14)
        np.testing.assert_allclose(h2, 1 + x**2 / 2 - y, atol=1e-14)

    def test_margin_only_when_enlarged(self):
        s = load_scenario("fig3_parabola")
        [(big, _)] = s.build_obstacles(enlarged=True)
        [(nominal, _)] = s.build_obstacles(enlarged=False)
        z = [0.0, -0.05]  # just below y = x^2
        assert obst.violation(nominal, z) == 0.0 and obst.violation(big, z) > 0.0

    def test_solver_config_overrides(self):
        s = load_scenario("fig3_parabola")
        cfg = s.solver_config(tol=1e-3, memory=None)
        assert cfg.tol == 1e-3 and cfg.memory == 10 and cfg.max_iter == 500

    def test_path_and_name_agree(self):
        assert load_scenario(scenario_path("fig3_sine")).name == "fig3_sine"
        with pytest.raises(FileNotFoundError):
            load_scenario("no_such_scenario")


class TestParse:

    def test_minimal(self):
        s = parse_scenario(MINIMAL)
        assert s.obstacles == () and s.must_avoid
        assert_array_equal(s.u_ref, [0.0, 0.0])
        assert s.build_problem().obstacles == ()

    def test_crossed_bounds_reports_line(self):
        text = with_line(MINIMAL, "u_min: [-1, -1]", "u_min: [2, -1]")
        with pytest.raises(ScenarioError) as err:
            parse_scenario(text)
        [msg] = err.value.errors
        assert msg.startswith("line 8:") and "crossed" in msg

    def test_unknown_obstacle_kind(self):
        text = with_line(MINIMAL, "obstacles: []",
                         "obstacles:\n  - {kind: torus, eta: 1}")
        with pytest.raises(ScenarioError, match="unknown obstacle kind 'torus'"):
            parse_scenario(text)

    def test_missing_field(self):
        text = with_line(MINIMAL, "horizon: 10\n", "")
        with pytest.raises(ScenarioError, match="horizon"):
            parse_scenario(text)

    def test_dimension_mismatch(self):
        text = with_line(MINIMAL, "R: [0.1, 0.1]", "R: [0.1, 0.1, 0.1]")
        with pytest.raises(ScenarioError) as err:
            parse_scenario(text)
        assert any("weights.R" in e for e in err.value.errors)

    def test_collects_several_errors(self):
        text = with_line(MINIMAL, "dt: 0.1", "dt: -0.1")
        text = with_line(text, "method: rk4", "method: midpoint")
        with pytest.raises(ScenarioError) as err:
            parse_scenario(text)
        assert len(err.value.errors) == 2

    def test_malformed_yaml(self):
        with pytest.raises(ScenarioError, match="malformed"):
            parse_scenario("a: [1, 2\nb: 3\n")

    def test_unknown_solver_option(self):
        text = MINIMAL + "solver: {tol: 1.0e-6, stepsize: 3}\n"
        with pytest.raises(ScenarioError, match="stepsize"):
            parse_scenario(text)

    def test_window(self):
        text = with_line(MINIMAL, "obstacles: []",
                         "obstacles:\n  - {kind: ball, center: [0, 1], radius: 0.2, eta: 1, window: [2, 5]}")
        s = parse_scenario(text)
        assert s.build_problem().obstacles[0][1] == (2, 5)
