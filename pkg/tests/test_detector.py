"""
Test cases for spectral slopes, front extraction and the cubic discriminator
"""
import numpy as np
import pytest

from triplewave.detector.discriminator import cubic_discriminator
from triplewave.detector.fronts import (
    band_energy_map,
    band_pass,
    crest_width,
    default_band,
    exclusion_mask,
    export_ridge_csv,
    extract_front,
    q_agreement,
    q_slice_points,
    ridge_mask,
)
from triplewave.detector.spectral import (
    SlopeEstimate,
    normal_transect,
    relative_order_gap,
    spectral_slope,
)
from triplewave.errors import ArgumentError, InsufficientDataError
from triplewave.solver.leapfrog import GridField

N_SAMPLES = 8192
H = 80.0 / N_SAMPLES
X = -40.0 + H * np.arange(N_SAMPLES)


def _xplus(k):
    return np.where(X > 0, X, 0.0) ** k * np.exp(-X ** 2 / 18.0)


def _field(grid, u, t=1.0):
    return GridField(grid=grid, times=[t], data=[u], cfl=0.4, bc="dirichlet")


def _disk(grid, radius=1.5):
    x = grid.coords()
    return (np.linalg.norm(x, axis=-1) < radius).astype(float)


class TestSpectralSlope:
    @pytest.mark.parametrize("k,window,expected", [(2, (20.0, 80.0), -3.0), (4, (10.0, 40.0), -5.0)])
    def test_xplus_decay(self, k, window, expected):
        est = spectral_slope(_xplus(k), window=window, h=H)
        assert est.accepted
        assert est.slope == pytest.approx(expected, abs=0.15)

    def test_differentiation_raises_slope_by_one(self):
        base = spectral_slope(_xplus(2), window=(20.0, 80.0), h=H)
        diff = spectral_slope(np.diff(_xplus(2)) / H, window=(20.0, 80.0), h=H)
        assert diff.slope - base.slope == pytest.approx(1.0, abs=0.15)

    def test_smooth_profile_rejected(self):
        est = spectral_slope(np.exp(-X ** 2 / 2.0), h=H)
        assert not est.accepted
        assert est.slope is None

    def test_zero_transect_rejected(self):
        assert not spectral_slope(np.zeros(512)).accepted

    def test_short_transect(self):
        with pytest.raises(InsufficientDataError):
            spectral_slope(np.ones(100))

    def test_window_outside_band(self):
        with pytest.raises(ArgumentError):
            spectral_slope(_xplus(2), window=(1e-3, 10.0), h=H)
        with pytest.raises(ArgumentError):
            spectral_slope(_xplus(2), window=(20.0, 500.0), h=H)


class TestTransect:
    def test_transect_samples_field(self, small_grid):
        x = small_grid.coords()
        data = np.exp(-np.sum(x ** 2, axis=-1))
        lower = [a[0] for a in small_grid.axes]
        samples, ds = normal_transect(data, small_grid.h, lower, [0.3, -0.2], [1.0, 0.0], length=256)
        assert len(samples) == 256
        assert ds == pytest.approx(small_grid.h[0])
        assert samples[128] == pytest.approx(np.exp(-0.13), rel=1e-5)
        assert samples[0] == 0.0

    def test_transect_needs_direction(self, small_grid):
        data = np.zeros(small_grid.shape)
        with pytest.raises(ArgumentError):
            normal_transect(data, small_grid.h, [-2.0, -2.0], [0.0, 0.0], [0.0, 0.0])


class TestOrderGap:
    def _est(self, slope, accepted=True):
        return SlopeEstimate(slope if accepted else None, 0.0, -0.99, 20, (1.0, 2.0), accepted)

    def test_gap_within_tolerance(self):
        report = relative_order_gap(self._est(-5.0), self._est(-17.3), -12.5)
        assert report["measured_gap"] == pytest.approx(-12.3)
        assert report["weaker"]
        assert report["passed"]

    def test_gap_too_far(self):
        report = relative_order_gap(self._est(-5.0), self._est(-8.0), -12.5)
        assert report["weaker"]
        assert not report["passed"]

    def test_rejected_slope(self):
        report = relative_order_gap(self._est(-5.0), self._est(0.0, accepted=False), -12.5)
        assert report["measured_gap"] is None
        assert not report["passed"]


class TestFronts:
    def test_default_band(self):
        lo, hi = default_band([0.01, 0.02])
        assert lo == pytest.approx(np.pi / 0.16)
        assert hi == pytest.approx(np.pi / 0.08)

    def test_empty_band(self, small_grid):
        with pytest.raises(ArgumentError):
            band_pass(np.zeros(small_grid.shape), small_grid.h, (1e4, 2e4))

    def test_ridge_of_a_smooth_crest(self):
        x = np.linspace(-1.0, 1.0, 81)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        energy = np.exp(-((xx - 0.2) / 0.2) ** 2)
        ridge = ridge_mask(energy)
        rows = np.argwhere(ridge)[:, 0]
        assert ridge.any()
        np.testing.assert_allclose(x[rows], 0.2, atol=0.025)

    def test_ridge_drops_flanks_of_a_curved_crest(self):
        x = np.linspace(-2.0, 2.0, 161)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        width = 8.0
        r = np.hypot(xx, yy)
        energy = np.exp(-0.5 * ((r - 1.2) / (width * 0.025)) ** 2)
        ridge = ridge_mask(energy, width=width)
        assert ridge.any()
        np.testing.assert_allclose(r[ridge], 1.2, atol=0.025)

    def test_ridge_needs_sharp_curvature(self):
        x = np.linspace(-1.0, 1.0, 81)
        xx, _ = np.meshgrid(x, x, indexing="ij")
        energy = np.exp(-((xx - 0.2) / 0.2) ** 2)
        # crest standard deviation is about 5.7 cells
        assert ridge_mask(energy, width=5.7).any()
        assert not ridge_mask(energy, width=2.0).any()

    def test_jump_energy_has_crest_width(self, small_grid):
        x1 = small_grid.coords()[..., 0]
        u = (x1 > 0.5).astype(float) * np.exp(-((x1 - 0.5) / 0.5) ** 2)
        band = default_band(small_grid.h)
        profile = band_energy_map(u, small_grid.h, band)[:, small_grid.shape[1] // 2]
        axis = small_grid.axes[0]
        inside = np.abs(axis) <= 1.6
        weights = profile[inside] / profile[inside].sum()
        centre = np.sum(weights * axis[inside])
        spread = np.sqrt(np.sum(weights * (axis[inside] - centre) ** 2))
        assert centre == pytest.approx(0.5, abs=small_grid.h[0])
        assert spread == pytest.approx(crest_width(band), rel=0.15)

    def test_jump_ridge_sits_on_the_jump(self, small_grid):
        x1 = small_grid.coords()[..., 0]
        u = (x1 > 0.5).astype(float) * np.exp(-((x1 - 0.5) / 0.5) ** 2)
        front = extract_front(_field(small_grid, u))
        assert not front.empty
        assert np.max(np.abs(front.points[:, 0] - 0.5)) <= 2 * small_grid.h[0]

    def test_zero_field_has_no_front(self, small_grid):
        front = extract_front(_field(small_grid, np.zeros(small_grid.shape)))
        assert front.empty

    def test_mask_shape_checked(self, small_grid):
        with pytest.raises(ArgumentError):
            extract_front(_field(small_grid, np.zeros(small_grid.shape)), mask=np.zeros((3, 3), dtype=bool))

    def test_ring_agrees_with_light_cone(self, fig1_scenario, small_grid):
        front = extract_front(_field(small_grid, _disk(small_grid), t=1.5))
        report = q_agreement(front, fig1_scenario, small_grid)
        assert report["on"]
        assert report["passed"]
        assert report["mean_distance"] <= 2 * small_grid.h[0]
        assert report["coverage"] >= 0.6

    def test_q_slice_of_light_cone(self, fig1_scenario, small_grid):
        pts = q_slice_points(fig1_scenario, small_grid, 1.0)
        assert len(pts) > 100
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=small_grid.h[0] ** 2)

    def test_exclusion_mask_covers_lines_and_gamma(self, fig1_scenario, small_grid):
        mask = exclusion_mask(small_grid, 1.0, fig1_scenario, 3 * small_grid.h[0])
        center = tuple(s // 2 for s in small_grid.shape)
        assert mask[center]
        # line 1 at t = 1 is x2 = 1
        i2 = int(np.argmin(np.abs(small_grid.axes[1] - 1.0)))
        assert mask[center[0], i2]
        assert not mask[center[0], int(np.argmin(np.abs(small_grid.axes[1] + 1.5)))]

    def test_export_ridge_csv(self, small_grid, tmp_path):
        x1 = small_grid.coords()[..., 0]
        front = extract_front(_field(small_grid, (x1 > 0.5).astype(float) * np.exp(-((x1 - 0.5) / 0.5) ** 2)))
        path = export_ridge_csv(front, tmp_path / "ridge.csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "i1,i2,x1,x2,strength"
        assert len(lines) == len(front) + 1


class TestDiscriminator:
    def test_new_ring_is_on(self, fig1_scenario, small_grid):
        cubic = _field(small_grid, _disk(small_grid), t=1.5)
        zero = _field(small_grid, np.zeros(small_grid.shape), t=1.5)
        report, front = cubic_discriminator({"cubic": cubic, "quadratic": zero, "linear": zero},
                                            fig1_scenario, return_front=True)
        assert report["verdict"] == "ON"
        assert report["ratio"] == float("inf")
        assert report["front_source"] == "cubic-linear"
        assert not front.empty
        assert report["q_agreement"]["mean_distance"] <= 2 * small_grid.h[0]

    def test_identical_runs_are_off(self, fig1_scenario, small_grid):
        same = _field(small_grid, _disk(small_grid))
        report = cubic_discriminator({"cubic": same, "linear": same}, fig1_scenario)
        assert report["verdict"] == "OFF"
        assert report["ratio"] == pytest.approx(1.0)
        assert not report["q_agreement"]["on"]

    def test_all_zero_ratio_is_one(self, fig1_scenario, small_grid):
        zero = _field(small_grid, np.zeros(small_grid.shape))
        report = cubic_discriminator({"cubic": zero, "quadratic": zero}, fig1_scenario)
        assert report["ratio"] == 1.0
        assert report["verdict"] == "OFF"

    def test_needs_a_control(self, fig1_scenario, small_grid):
        cubic = _field(small_grid, np.zeros(small_grid.shape))
        with pytest.raises(ArgumentError):
            cubic_discriminator({"cubic": cubic}, fig1_scenario)

    def test_mismatched_times(self, fig1_scenario, small_grid):
        cubic = _field(small_grid, np.zeros(small_grid.shape))
        later = _field(small_grid, np.zeros(small_grid.shape), t=1.5)
        with pytest.raises(ArgumentError):
            cubic_discriminator({"cubic": cubic, "linear": later}, fig1_scenario)

    def test_thin_mask_refused(self, fig1_scenario, small_grid):
        cubic = _field(small_grid, np.zeros(small_grid.shape))
        with pytest.raises(ArgumentError):
            cubic_discriminator({"cubic": cubic, "linear": cubic}, fig1_scenario, mask_cells=2.0)
