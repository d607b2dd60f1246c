"""
Test cases for operators, rays, surfaces and flow-out meshes
"""
import numpy as np
import pytest

from triplewave.errors import ArgumentError, DomainError, PreconditionError
from triplewave.geometry.flowout import (
    apparent_front_speed,
    caustic_scan,
    export_front_mesh,
    flow_out,
    load_front_mesh,
    slice_at_time,
)
from triplewave.geometry.operator import (
    CovectorPoint,
    HyperbolicOperator,
    check_coefficients,
    hamilton_field,
    principal_symbol,
    subprincipal_symbol,
)
from triplewave.geometry.rays import StepControl, export_ray_csv, trace_ray, trace_ray_fixed_step
from triplewave.geometry.surfaces import (
    CharSurface,
    conormal_null_fiber,
    eikonal_residual,
    fiber_basis,
    is_characteristic,
    triple_intersection,
)
from triplewave.scenarios.catalog import closed_form_distance, make_scenario


def _mesh(scenario, gamma_count=5, angular_res=12, s_max=1.0, s_samples=21, ctrl=None):
    params, points = scenario.gamma_samples(gamma_count)
    fibers = scenario.fibers(points, angular_res)
    return flow_out(scenario.operator, points, fibers, s_max, s_samples, step_ctrl=ctrl,
                    gamma_params=params, scenario_id=scenario.id)


class TestOperator:
    def test_principal_symbol(self, minkowski3):
        """p = tau^2 - |xi|^2 for the wave operator"""
        assert principal_symbol(minkowski3, CovectorPoint([0, 0, 0], [1, 1, 0])) == pytest.approx(0.0)
        assert principal_symbol(minkowski3, CovectorPoint([0, 0, 0], [2, 1, 0])) == pytest.approx(3.0)

    def test_covector_shape_mismatch(self):
        with pytest.raises(ValueError):
            CovectorPoint([0, 0, 0], [1, 0])

    def test_wrong_dimension_is_domain_error(self, minkowski3):
        with pytest.raises(DomainError):
            check_coefficients(minkowski3, np.zeros(4))

    def test_non_positive_alpha_rejected(self):
        op = HyperbolicOperator.constant_coefficients(3, alpha=-1.0)
        with pytest.raises(DomainError):
            principal_symbol(op, CovectorPoint([0, 0, 0], [1, 1, 0]))

    def test_hamilton_field_minkowski(self, minkowski3):
        y_dot, eta_dot = hamilton_field(minkowski3, CovectorPoint([0, 0, 0], [1, 1, 0]))
        np.testing.assert_allclose(y_dot, [2.0, -2.0, 0.0])
        np.testing.assert_allclose(eta_dot, 0.0)

    def test_subprincipal_vanishes_without_first_order(self, minkowski4):
        assert subprincipal_symbol(minkowski4, CovectorPoint([0, 0, 0, 0], [1, 1, 0, 0])) == 0

    def test_subprincipal_of_damping(self):
        """d_t^2 - Laplacian + beta d_t has c = -i beta tau"""
        beta = 0.3
        op = HyperbolicOperator.constant_coefficients(3, first_order=[beta, 0.0, 0.0])
        c = subprincipal_symbol(op, CovectorPoint([0, 0, 0], [2.0, 2.0, 0.0]))
        assert c == pytest.approx(-1j * beta * 2.0)

    def test_max_speed_isotropic(self):
        op = HyperbolicOperator.isotropic(3, lambda y: 2.0 + 0.0 * y[..., 0])
        assert op.max_speed(np.zeros((4, 3))) == pytest.approx(2.0)


class TestRays:
    def test_minkowski_ray_is_straight(self, minkowski3):
        ray = trace_ray(minkowski3, CovectorPoint([0, 0, 0], [1, 1, 0]), 2.0, StepControl(n_samples=21))
        assert len(ray) == 21
        np.testing.assert_allclose(ray.y[-1], [4.0, -4.0, 0.0], atol=1e-10)
        np.testing.assert_allclose(ray.eta, np.tile([1.0, 1.0, 0.0], (21, 1)), atol=1e-12)
        assert ray.step_stats["null_conserved"]

    def test_non_null_start_rejected(self, minkowski3):
        with pytest.raises(PreconditionError):
            trace_ray(minkowski3, CovectorPoint([0, 0, 0], [2, 1, 0]), 1.0)

    def test_zero_length_ray(self, minkowski3):
        ray = trace_ray(minkowski3, CovectorPoint([0, 0, 0], [1, 0, 1]), 0.0)
        assert len(ray) == 1
        assert ray.step_stats["status"] == "trivial"

    def test_backward_ray_ends_at_start(self, minkowski3):
        start = CovectorPoint([0.5, 0.0, 0.0], [1, 1, 0])
        ray = trace_ray(minkowski3, start, 1.0, StepControl(n_samples=11), direction=-1)
        assert ray.s[0] == pytest.approx(-1.0)
        assert np.all(np.diff(ray.s) > 0)
        np.testing.assert_allclose(ray.y[-1], start.y, atol=1e-12)
        np.testing.assert_allclose(ray.y[0], [-1.5, 2.0, 0.0], atol=1e-10)

    def test_lens_ray_matches_fixed_step_oracle(self):
        op = make_scenario("lens").operator
        y0 = np.array([0.0, -3.0, 0.5])
        c = float(np.sqrt(op.metric(y0)[0, 0]))
        start = CovectorPoint(y0, [c, 1.0, 0.0])
        ray = trace_ray(op, start, 2.0, StepControl(n_samples=5))
        oracle = trace_ray_fixed_step(op, start, 2.0, 2000)
        np.testing.assert_allclose(ray.y[-1], oracle.y[-1], atol=1e-8)
        assert ray.null_drift(op) < 1e-8

    def test_export_empty_ray_csv(self, tmp_path):
        path = export_ray_csv([], tmp_path / "rays.csv", 3)
        lines = path.read_text().strip().splitlines()
        assert lines == ["ray,s,t,x1,x2,tau,xi1,xi2"]


class TestSurfaces:
    def test_plane_characteristic(self, minkowski4):
        surf = CharSurface.plane([1.0, -1.0, 0.0, 0.0])
        assert eikonal_residual(minkowski4, surf, np.zeros((1, 4))) == pytest.approx(0.0)
        assert is_characteristic(minkowski4, surf, np.zeros((1, 4)))

    def test_spacelike_plane_not_characteristic(self, minkowski4):
        surf = CharSurface.plane([1.0, 0.0, 0.0, 0.0])
        assert not is_characteristic(minkowski4, surf, np.zeros((1, 4)))

    def test_empty_samples_rejected(self, minkowski4):
        with pytest.raises(ArgumentError):
            eikonal_residual(minkowski4, CharSurface.plane([1, -1, 0, 0]), np.empty((0, 4)))

    def test_triple_intersection_of_cylinder_planes(self, cylinder_scenario):
        box = [(-1.0, 1.0)] * 4
        result = triple_intersection(cylinder_scenario.surfaces, box, grid_res=5)
        assert len(result) > 0
        np.testing.assert_allclose(result.points[:, :3], 0.0, atol=1e-12)
        assert np.all(result.transversal)

    def test_triple_intersection_needs_three_surfaces(self, cylinder_scenario):
        with pytest.raises(ArgumentError):
            triple_intersection(cylinder_scenario.surfaces[:2], [(-1.0, 1.0)] * 4)

    def test_dependent_normals_rejected(self):
        normals = np.array([[1.0, -1.0, 0.0, 0.0], [2.0, -2.0, 0.0, 0.0], [1.0, 0.0, -1.0, 0.0]])
        with pytest.raises(PreconditionError):
            fiber_basis(normals)

    def test_null_fiber_is_null_and_future(self, cylinder_scenario):
        op = cylinder_scenario.operator
        q = np.zeros(4)
        normals = cylinder_scenario.normals_at(q)
        fiber = conormal_null_fiber(op, q, normals, angular_res=8)
        assert len(fiber) == 8
        for pt in fiber:
            assert abs(principal_symbol(op, pt)) < 1e-10
            assert pt.eta[0] > 0
            assert np.linalg.norm(pt.eta) == pytest.approx(1.0)
        both = conormal_null_fiber(op, q, normals, angular_res=8, nappe="both")
        assert len(both) == 16

    def test_definite_fiber_is_empty(self, minkowski4):
        normals = np.eye(4)[1:]
        assert conormal_null_fiber(minkowski4, np.zeros(4), normals, angular_res=8) == []


class TestFlowOut:
    @pytest.mark.parametrize("scenario_id", ["planes-cylinder", "planes-cone", "spheres"])
    def test_mesh_reproduces_closed_form(self, scenario_id):
        """Non-caustic nodes lie on the closed-form Q"""
        scenario = make_scenario(scenario_id)
        mesh = _mesh(scenario)
        nodes = mesh.points[mesh.valid_nodes()]
        assert len(nodes) > 0
        assert closed_form_distance(scenario, nodes) <= 1e-8

    def test_zero_flow_length_gives_gamma(self, cylinder_scenario):
        params, points = cylinder_scenario.gamma_samples(3)
        mesh = _mesh(cylinder_scenario, gamma_count=3, s_max=0.0)
        assert mesh.shape == (3, 12, 1)
        np.testing.assert_allclose(mesh.points[:, :, 0, :], np.repeat(points[:, None, :], 12, axis=1))

    def test_cylinder_has_no_caustic(self, cylinder_scenario):
        mesh = _mesh(cylinder_scenario)
        assert caustic_scan(mesh)["empty"]

    def test_lens_produces_caustic(self):
        scenario = make_scenario("lens")
        ctrl = StepControl(rtol=1e-8, atol=1e-10, tol_ray=1e-6)
        mesh = _mesh(scenario, gamma_count=1, angular_res=256, s_max=12.0, s_samples=241, ctrl=ctrl)
        report = caustic_scan(mesh)
        assert not report["empty"]
        assert report["components"][0]["corank"] in (1, 2)

    def test_slice_of_cylinder_is_circle(self, cylinder_scenario):
        mesh = _mesh(cylinder_scenario)
        pts = slice_at_time(mesh, 1.0).reshape(-1, 4)
        pts = pts[np.all(np.isfinite(pts), axis=-1)]
        assert len(pts) > 0
        np.testing.assert_allclose(np.hypot(pts[:, 1], pts[:, 2]), 1.0, atol=1e-6)

    def test_spheres_front_appears_superluminal(self):
        """Section of Q at x3 = 1 grows at 2/sqrt(3) at t = 2"""
        scenario = make_scenario("spheres", {"gamma_range": [0.0, 2.0]})
        mesh = _mesh(scenario, gamma_count=21, angular_res=16, s_max=1.0, s_samples=41)
        speed = apparent_front_speed(mesh, 1.0, [1.9, 2.0, 2.1])
        assert speed["speed"][1] == pytest.approx(2.0 / np.sqrt(3.0), abs=1e-3)
        assert np.all(speed["speed"] >= 1.0)

    def test_mesh_export_round_trip(self, cylinder_scenario, tmp_path):
        mesh = _mesh(cylinder_scenario, gamma_count=2, angular_res=6, s_samples=5)
        loaded = load_front_mesh(export_front_mesh(mesh, tmp_path / "mesh.bin"))
        np.testing.assert_array_equal(loaded.points, mesh.points)
        np.testing.assert_array_equal(loaded.caustic_flag, mesh.caustic_flag)

    def test_fibers_must_match_gamma(self, cylinder_scenario):
        _, points = cylinder_scenario.gamma_samples(2)
        fibers = cylinder_scenario.fibers(points[:1], 4)
        with pytest.raises(ArgumentError):
            flow_out(cylinder_scenario.operator, points, fibers, 1.0, 5)
