"""
Test cases for the built-in scenario catalog
"""
import numpy as np
import pytest

from triplewave.errors import ArgumentError, UnsupportedError
from triplewave.geometry.flowout import flow_out
from triplewave.scenarios.catalog import closed_form_distance, list_scenarios, make_scenario


class TestCatalog:
    def test_list_scenarios(self):
        assert list_scenarios() == ["planes-cylinder", "planes-cone", "spheres", "fig1-2d", "lens"]

    def test_unknown_scenario(self):
        with pytest.raises(ArgumentError) as excinfo:
            make_scenario("planes-torus")
        assert "planes-torus" in str(excinfo.value)

    def test_unknown_parameter(self):
        with pytest.raises(ArgumentError):
            make_scenario("spheres", {"c": 2.0})

    def test_decreasing_gamma_range(self):
        with pytest.raises(ArgumentError):
            make_scenario("planes-cone", {"gamma_range": [1.0, -1.0]})

    def test_spheres_need_positive_offsets(self):
        with pytest.raises(ArgumentError):
            make_scenario("spheres", {"a": 0.0})

    def test_fig1_needs_three_angles(self):
        with pytest.raises(ArgumentError):
            make_scenario("fig1-2d", {"angles_deg": [0.0, 90.0]})

    @pytest.mark.parametrize("scenario_id", ["planes-cylinder", "planes-cone", "spheres", "fig1-2d"])
    def test_gamma_lies_on_every_surface_and_on_q(self, scenario_id):
        scenario = make_scenario(scenario_id)
        _, points = scenario.gamma_samples(7)
        for surf in scenario.surfaces:
            np.testing.assert_allclose(surf.phi(points), 0.0, atol=1e-12)
        assert closed_form_distance(scenario, points) == pytest.approx(0.0, abs=1e-12)

    def test_point_gamma_has_single_sample(self, fig1_scenario):
        params, points = fig1_scenario.gamma_samples(10)
        assert params.shape == (1, 0)
        np.testing.assert_allclose(points, [[0.0, 0.0, 0.0]])
        assert fig1_scenario.gamma_dim == 0

    def test_spheres_gamma_is_hyperbola(self):
        scenario = make_scenario("spheres", {"a": 1.0, "b": 2.0})
        _, points = scenario.gamma_samples(5)
        np.testing.assert_allclose(points[:, 0], np.sqrt(points[:, 3] ** 2 + 5.0))
        np.testing.assert_allclose(points[:, 1:3], np.tile([1.0, 2.0], (5, 1)))

    def test_lens_has_no_closed_form(self):
        scenario = make_scenario("lens")
        with pytest.raises(UnsupportedError):
            closed_form_distance(scenario, np.zeros((1, 3)))

    def test_points_outside_closed_form_are_far(self):
        scenario = make_scenario("spheres")
        _, gamma = scenario.gamma_samples(3)
        # t^2 < x3^2 leaves the domain of the closed form
        outside = np.array([[0.5, 1.0, 1.0, 2.0]])
        assert closed_form_distance(scenario, outside) == float("inf")
        assert closed_form_distance(scenario, np.vstack([gamma, outside])) == float("inf")
        off_q = gamma + np.array([0.0, 0.1, 0.0, 0.0])
        assert 0.0 < closed_form_distance(scenario, off_q) < np.inf

    def test_config_round_trip(self):
        scenario = make_scenario("spheres", {"a": 0.5})
        cfg = scenario.to_config()
        rebuilt = make_scenario(cfg["id"], cfg["params"])
        assert rebuilt.params == scenario.params
        assert rebuilt.params["gamma_range"] == [-1.0, 1.0]


class TestScenarioFibers:
    def test_fig1_fiber_is_full_light_cone(self, fig1_scenario):
        _, points = fig1_scenario.gamma_samples(1)
        fiber = fig1_scenario.fibers(points, 12)[0]
        assert len(fiber) == 12
        slopes = [pt.eta[0] / np.linalg.norm(pt.eta[1:]) for pt in fiber]
        np.testing.assert_allclose(slopes, 1.0, atol=1e-12)

    def test_fig1_flow_out_is_light_cone(self, fig1_scenario):
        params, points = fig1_scenario.gamma_samples(1)
        mesh = flow_out(fig1_scenario.operator, points, fig1_scenario.fibers(points, 16), 1.5, 16,
                        gamma_params=params)
        assert closed_form_distance(fig1_scenario, mesh.points[mesh.valid_nodes()]) <= 1e-8
