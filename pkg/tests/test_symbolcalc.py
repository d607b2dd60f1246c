"""
Test cases for order bookkeeping, product symbols and amplitude transport
"""
import warnings

import numpy as np
import pytest

from triplewave.errors import ArgumentError, CausticError, DomainError, HypothesisWarning
from triplewave.geometry.flowout import flow_out
from triplewave.geometry.operator import CovectorPoint, HyperbolicOperator
from triplewave.geometry.rays import StepControl, trace_ray
from triplewave.symbolcalc.orders import (
    ConormalOrder,
    incoming_class_order,
    k_of_m,
    pair_interaction_report,
    product_order,
    symbol_order_gap,
    triple_output_order,
)
from triplewave.symbolcalc.prediction import predicted_leading_term
from triplewave.symbolcalc.symbols import SymbolFactor, build_product_symbol
from triplewave.symbolcalc.transport import transport_amplitude, transport_amplitude_rk4


def _ray(op, eta=(1.0, 1.0, 0.0), s_max=2.0, samples=21):
    return trace_ray(op, CovectorPoint(np.zeros(op.dim), eta), s_max, StepControl(n_samples=samples))


class TestOrders:
    @pytest.mark.parametrize("m,expected", [(-6.0, 4), (-5.5, 4), (-3.0, 1), (-1.5, 0)])
    def test_k_of_m(self, m, expected):
        k = k_of_m(m)
        assert k == expected
        assert -m - 2 <= k < -m - 1

    def test_k_of_m_domain(self):
        with pytest.raises(DomainError):
            k_of_m(-1.0)

    def test_class_order(self):
        order = ConormalOrder(-6.0, 1, 4)
        assert order.class_order == pytest.approx(-6.5)
        assert ConormalOrder.from_class_order(-6.5, 1, 4) == order

    def test_includes(self):
        assert ConormalOrder(-6.0, 1, 4).includes(ConormalOrder(-7.0, 1, 4))
        assert not ConormalOrder(-7.0, 1, 4).includes(ConormalOrder(-6.0, 1, 4))
        with pytest.raises(DomainError):
            ConormalOrder(-6.0, 1, 4).includes(ConormalOrder(-6.0, 2, 4))

    def test_product_order(self):
        assert product_order(-6.0, 1, 4) == pytest.approx(incoming_class_order(-6.0, 4))
        assert product_order(-6.0, 3, 4) == pytest.approx(-14.5)

    def test_triple_output_order(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            out = triple_output_order(-6.0, 4)
        assert out["output_order"] == pytest.approx(-19.0)
        assert out["incoming_order"] == pytest.approx(-6.5)
        assert out["hypothesis_ok"]
        assert out["threshold"] == pytest.approx(-5.5)

    def test_triple_output_order_outside_range_warns(self):
        with pytest.warns(HypothesisWarning):
            out = triple_output_order(-5.0, 4)
        assert not out["hypothesis_ok"]
        assert out["output_order"] == pytest.approx(-16.0)

    def test_symbol_order_gap(self):
        assert symbol_order_gap(-6.0) == pytest.approx(-12.5)

    def test_pair_creates_nothing_new(self):
        report = pair_interaction_report(-6.0, 4)
        assert report["new_singularity"] is False
        assert report["incoming_order"] == pytest.approx(-6.5)


class TestProductSymbol:
    def _symbol(self, m=-2.0):
        return build_product_symbol([SymbolFactor.japanese_power(m) for _ in range(3)])

    def test_evaluate(self):
        assert self._symbol().evaluate(1.0, 1.0, 1.0) == pytest.approx(0.125)

    def test_scaled_and_pullback(self):
        v = self._symbol()
        assert v.scaled(0, 2.0).evaluate(1.0, 1.0, 1.0) == pytest.approx(0.25)
        assert v.pullback([2.0, 1.0, 1.0]).evaluate(2.0, 0.0, 0.0) == pytest.approx(0.25)
        with pytest.raises(ArgumentError):
            v.pullback([0.0, 1.0, 1.0])

    def test_ellipticity(self):
        assert self._symbol().ellipticity_scan(np.linspace(-50, 50, 101)) == [True, True, True]

    def test_needs_three_factors_on_gamma(self):
        with pytest.raises(ArgumentError):
            build_product_symbol([SymbolFactor.japanese_power(-2.0)] * 2)
        off = SymbolFactor(func=lambda eta: eta, order=1.0, on_gamma=False)
        with pytest.raises(ArgumentError):
            build_product_symbol([SymbolFactor.japanese_power(1.0)] * 2 + [off])


class TestTransport:
    def test_plane_tube_keeps_amplitude(self, minkowski3):
        out = transport_amplitude(minkowski3, _ray(minkowski3), 2.0 + 1.0j)
        np.testing.assert_allclose(out.a, 2.0 + 1.0j, atol=1e-10)
        assert out.residual < 1e-8

    def test_damping_decays_exponentially(self):
        beta = 0.5
        op = HyperbolicOperator.constant_coefficients(3, first_order=[beta, 0.0, 0.0])
        ray = _ray(op)
        out = transport_amplitude(op, ray, 1.0)
        np.testing.assert_allclose(np.abs(out.a), np.exp(-beta * ray.s), rtol=1e-8)
        np.testing.assert_allclose(transport_amplitude_rk4(op, ray, 1.0), out.a, atol=1e-8)

    def test_point_source_spreading(self, minkowski3):
        ray = _ray(minkowski3)
        out = transport_amplitude(minkowski3, ray, 1.0, jacobian=ray.s, start=1)
        np.testing.assert_allclose(out.a, np.sqrt(ray.s[1] / ray.s[1:]), rtol=1e-10)
        assert np.isnan(ray.amplitude[0])

    def test_vanishing_jacobian_is_caustic(self, minkowski3):
        ray = _ray(minkowski3)
        with pytest.raises(CausticError) as excinfo:
            transport_amplitude(minkowski3, ray, 1.0, jacobian=1.0 - ray.s)
        assert excinfo.value.s == pytest.approx(1.0, abs=0.11)

    def test_too_short_ray(self, minkowski3):
        ray = _ray(minkowski3, samples=2)
        with pytest.raises(ArgumentError):
            transport_amplitude(minkowski3, ray, 1.0, start=1)


class TestPrediction:
    def test_cubic_term_predicts_front(self, fig1_scenario):
        report = predicted_leading_term(fig1_scenario, -6.0, lambda q, u: 6.0)
        assert report["on"]
        assert report["hypothesis_ok"]
        assert report["output_order"] == pytest.approx(-18.75)
        assert report["symbol_order_gap"] == pytest.approx(-12.5)

    def test_vanishing_cubic_derivative_predicts_nothing(self, fig1_scenario):
        report = predicted_leading_term(fig1_scenario, -6.0, lambda q, u: 0.0 * u)
        assert not report["on"]
        assert not np.any(report["predicate"])

    def test_amplitudes_on_mesh(self, cylinder_scenario):
        params, points = cylinder_scenario.gamma_samples(3)
        mesh = flow_out(cylinder_scenario.operator, points, cylinder_scenario.fibers(points, 8), 1.0, 11,
                        gamma_params=params)
        symbol = build_product_symbol([SymbolFactor.japanese_power(-6.0) for _ in range(3)])
        report = predicted_leading_term(cylinder_scenario, -8.0, lambda q, u: 6.0, mesh=mesh, symbol=symbol)
        amps = report["amplitude"]
        assert amps.shape == (3, 8, 11)
        assert np.all(np.isnan(amps[:, :, 0]))
        assert np.all(np.isfinite(amps[:, :, 1:]))
        assert report["amplitude_caustic_rays"] == 0
