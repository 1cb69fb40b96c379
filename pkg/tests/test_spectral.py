import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lwirsep.spectral import (
    GRID_STEP_UM,
    SpectralGrid,
    at_sensor_radiance,
    inverse_planck,
    planck_radiance,
    planck_spectrum,
    surface_emitted_at_sensor,
)

# Reference values evaluated with 40-digit arithmetic from the closed form,
# frozen to 12 significant digits.
PLANCK_10UM_300K = 9.93823379339e-4
PLANCK_BAND107_300K = 9.93760555432e-4  # band center 10.0038 um


class TestGrid:
    def test_shape_and_bounds(self, grid):
        w = grid.wavelengths_um
        assert w.shape == (256,)
        assert w[0] == 7.5
        assert np.all(np.diff(w) > 0)
        assert np.max(np.abs(np.diff(w) - GRID_STEP_UM)) <= 1e-9

    def test_rejects_wrong_band_count(self):
        with pytest.raises(ValueError):
            SpectralGrid(np.linspace(7.5, 13.5, 100))

    def test_rejects_wrong_start(self):
        with pytest.raises(ValueError):
            SpectralGrid(7.6 + GRID_STEP_UM * np.arange(256))

    def test_definition_round_trip(self, grid):
        assert grid.definition() == "7.5:0.0234:256"
        assert grid.matches(SpectralGrid.default())


class TestPlanck:
    def test_reference_value(self):
        assert planck_radiance(10.0, 300.0) == pytest.approx(PLANCK_10UM_300K, rel=1e-11)

    def test_cold_limit(self):
        assert planck_radiance(10.0, 10.0) < 1e-30

    def test_monotone_in_temperature(self):
        assert planck_radiance(10.0, 310.0) > planck_radiance(10.0, 300.0)

    def test_monotone_ladder(self, grid):
        temps = np.arange(270.0, 331.0)
        values = planck_radiance(grid.wavelengths_um[None, :], temps[:, None])
        assert np.all(np.diff(values, axis=0) > 0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            planck_radiance(-1.0, 300.0)
        with pytest.raises(ValueError):
            planck_radiance(10.0, 0.0)
        with pytest.raises(ValueError):
            planck_radiance(10.0, -5.0)


class TestPlanckSpectrum:
    def test_band_matches_reference(self, grid):
        spec = planck_spectrum(grid, 300.0)
        i = grid.index_of(10.0)
        assert i == 107
        assert spec[i] == pytest.approx(PLANCK_BAND107_300K, rel=1e-11)

    def test_all_positive(self, grid):
        assert np.all(planck_spectrum(grid, 295.0) > 0)

    def test_pointwise_monotone(self, grid):
        assert np.all(planck_spectrum(grid, 315.0) > planck_spectrum(grid, 295.0))

    def test_unit_sanity_at_300K(self, grid):
        spec = planck_spectrum(grid, 300.0)
        assert np.all(spec >= 1e-4) and np.all(spec <= 2e-3)

    def test_zero_kelvin_continuous_extension(self, grid):
        assert np.array_equal(planck_spectrum(grid, 0.0), np.zeros(256))
        with pytest.raises(ValueError):
            planck_spectrum(grid, -1.0)


class TestInversePlanck:
    def test_round_trip_examples(self):
        assert inverse_planck(10.0, planck_radiance(10.0, 300.0)) == pytest.approx(300.0, abs=1e-8)
        assert inverse_planck(8.0, planck_radiance(8.0, 315.0)) == pytest.approx(315.0, abs=1e-8)

    def test_reference_inverse(self):
        # inverse of the rounded radiance magnitude lands near 300 K
        assert inverse_planck(10.0, 9.90e-4) == pytest.approx(299.760995435, rel=1e-10)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            inverse_planck(10.0, 0.0)
        with pytest.raises(ValueError):
            inverse_planck(10.0, -1e-4)

    @settings(max_examples=60, deadline=None)
    @given(T=st.floats(270.0, 330.0), band=st.integers(0, 255))
    def test_round_trip_property(self, T, band, grid):
        lam = grid.wavelengths_um[band]
        back = inverse_planck(lam, planck_radiance(lam, T))
        assert back == pytest.approx(T, rel=1e-8)


class TestAtSensorRadiance:
    def test_pure_reflector(self, grid):
        tau = np.full(256, 0.8)
        l_down = np.full(256, 4e-4)
        l_up = np.full(256, 2e-4)
        out = at_sensor_radiance(np.zeros(256), 300.0, tau, l_down, l_up, grid)
        assert np.allclose(out, l_down * tau + l_up, rtol=0, atol=0)

    def test_blackbody(self, grid):
        tau = np.full(256, 0.7)
        l_up = np.full(256, 2e-4)
        out = at_sensor_radiance(np.ones(256), 305.0, tau, np.full(256, 4e-4), l_up, grid)
        assert np.allclose(out, planck_spectrum(grid, 305.0) * tau + l_up, rtol=0, atol=0)

    def test_half_emissivity_cancellation(self, grid):
        # eps = 0.5, tau = 1, L_up = 0, L_down = B(T): output is exactly B(T)
        B = planck_spectrum(grid, 300.0)
        out = at_sensor_radiance(np.full(256, 0.5), 300.0, np.ones(256), B,
                                 np.zeros(256), grid)
        assert out == pytest.approx(B, rel=1e-15)

    def test_rejects_out_of_range_eps(self, grid):
        with pytest.raises(ValueError):
            at_sensor_radiance(np.full(256, 1.2), 300.0, np.ones(256),
                               np.zeros(256), np.zeros(256), grid)

    def test_rejects_grid_mismatch(self, grid):
        with pytest.raises(ValueError):
            at_sensor_radiance(np.zeros(100), 300.0, np.ones(256),
                               np.zeros(256), np.zeros(256), grid)

    def test_decomposition_identity(self, grid):
        rng = np.random.default_rng(0)
        eps = rng.uniform(0.1, 0.95, 256)
        tau = rng.uniform(0.2, 0.9, 256)
        l_down = rng.uniform(2e-4, 5e-4, 256)
        l_up = rng.uniform(1e-4, 4e-4, 256)
        total = at_sensor_radiance(eps, 310.0, tau, l_down, l_up, grid)
        emitted = surface_emitted_at_sensor(eps, 310.0, tau, grid)
        assert np.array_equal(total, (1 - eps) * l_down * tau + emitted + l_up)


class TestSurfaceEmitted:
    def test_blackbody_unattenuated(self, grid):
        out = surface_emitted_at_sensor(np.ones(256), 300.0, np.ones(256), grid)
        assert np.array_equal(out, planck_spectrum(grid, 300.0))

    def test_zero_emissivity(self, grid):
        out = surface_emitted_at_sensor(np.zeros(256), 300.0, np.ones(256), grid)
        assert np.array_equal(out, np.zeros(256))

    def test_scalar_factorization(self, grid):
        out = surface_emitted_at_sensor(np.full(256, 0.5), 300.0, np.full(256, 0.5), grid)
        assert out == pytest.approx(0.25 * planck_spectrum(grid, 300.0), rel=1e-15)
