import numpy as np
import pytest

from lwirsep.atmosphere import (
    AtmosphereModel,
    Geometry,
    atmosphere_from_config,
    atmosphere_to_config,
    downwelling,
    extinction_profile,
    path_optical_depth,
    transmission,
    upwelling,
)
from lwirsep.errors import ConfigError
from lwirsep.spectral import planck_radiance


def oracle_optical_depth(atm, grid, range_m, angle_deg, n=20000):
    """Trapezoid quadrature of the slant-path extinction integral."""
    s = np.linspace(0.0, range_m / 1000.0, n + 1)
    z = s * np.sin(np.deg2rad(angle_deg))
    dens = np.exp(-z / atm.absorber_scale_height)
    return extinction_profile(atm, grid) * np.trapezoid(dens, s)


class TestGeometry:
    def test_bounds_enforced(self):
        Geometry(3000.0, 30.0)
        Geometry(6500.0, 60.0)
        with pytest.raises(ValueError):
            Geometry(2999.0, 45.0)
        with pytest.raises(ValueError):
            Geometry(5000.0, 61.0)


class TestExtinctionProfile:
    def test_peaks_inside_absorption_windows(self, atm, grid):
        k = extinction_profile(atm, grid)
        lam_max = grid.wavelengths_um[np.argmax(k)]
        assert 7.5 <= lam_max <= 8.5 or 12.2 <= lam_max <= 13.5

    def test_zero_absorbers_gives_continuum(self, grid):
        flat = AtmosphereModel(band_absorbers=())
        k = extinction_profile(flat, grid)
        assert np.array_equal(k, np.full(256, flat.continuum_extinction))

    def test_doubling_peaks_doubles_excess(self, atm, grid):
        doubled = AtmosphereModel(
            band_absorbers=tuple((c, w, 2 * p) for c, w, p in atm.band_absorbers))
        k1 = extinction_profile(atm, grid) - atm.continuum_extinction
        k2 = extinction_profile(doubled, grid) - atm.continuum_extinction
        assert k2 == pytest.approx(2 * k1, rel=1e-12)

    def test_floor_at_continuum(self, atm, grid):
        assert np.all(extinction_profile(atm, grid) >= atm.continuum_extinction)


class TestTransmission:
    def test_zero_path_limit(self, atm, grid):
        tau = np.exp(-path_optical_depth(atm, grid, 0.0, 45.0))
        assert np.array_equal(tau, np.ones(256))

    def test_longer_range_absorbs_more(self, atm, grid):
        near = transmission(atm, Geometry(3000.0, 30.0), grid)
        far = transmission(atm, Geometry(6500.0, 30.0), grid)
        assert np.all(far < near)

    def test_mid_window_magnitude_and_ordering(self, atm, grid, mid_geometry):
        tau = transmission(atm, mid_geometry, grid)
        t101 = tau[grid.index_of(10.1)]
        assert 0.5 <= t101 <= 0.95
        assert tau[grid.index_of(7.6)] < t101

    def test_against_quadrature_oracle(self, atm, grid, mid_geometry):
        depth = path_optical_depth(atm, grid, mid_geometry.range_m, mid_geometry.angle_deg)
        oracle = oracle_optical_depth(atm, grid, mid_geometry.range_m, mid_geometry.angle_deg)
        assert depth == pytest.approx(oracle, rel=1e-3)

    def test_in_unit_interval(self, atm, grid):
        for geom in (Geometry(3000, 30), Geometry(6500, 60), Geometry(4800, 41)):
            tau = transmission(atm, geom, grid)
            assert np.all(tau > 0) and np.all(tau <= 1)


class TestUpwelling:
    def test_zero_extinction_emits_nothing(self, grid, mid_geometry):
        vacuum = AtmosphereModel(band_absorbers=(), continuum_extinction=0.0)
        assert np.array_equal(upwelling(vacuum, mid_geometry, grid), np.zeros(256))

    def test_lower_angle_sees_more_emission(self, atm, grid):
        low = upwelling(atm, Geometry(5000.0, 30.0), grid)
        high = upwelling(atm, Geometry(5000.0, 60.0), grid)
        assert np.all(low >= high)

    def test_refinement_oracle(self, atm, grid, mid_geometry):
        base = upwelling(atm, mid_geometry, grid)
        refined = upwelling(atm, mid_geometry, grid, n_layers=400)
        i = grid.index_of(10.1)
        assert base[i] == pytest.approx(refined[i], rel=0.01)
        assert np.max(np.abs(base - refined) / refined) < 0.01

    def test_bounded_by_warmest_blackbody(self, atm, grid, mid_geometry):
        l_up = upwelling(atm, mid_geometry, grid)
        tau = transmission(atm, mid_geometry, grid)
        bound = (1 - tau) * planck_radiance(grid.wavelengths_um, atm.surface_air_temp + 5.0)
        assert np.all(l_up < bound)


class TestDownwelling:
    def test_zero_extinction(self, grid):
        vacuum = AtmosphereModel(band_absorbers=(), continuum_extinction=0.0)
        assert np.array_equal(downwelling(vacuum, grid), np.zeros(256))

    def test_geometry_free_signature(self, atm, grid):
        # downwelling takes no geometry at all; repeated calls are bit-identical
        a = downwelling(atm, grid)
        b = downwelling(atm, grid)
        assert np.array_equal(a, b)

    def test_opaque_band_radiates_warmer(self, atm, grid):
        l_down = downwelling(atm, grid)
        assert l_down[grid.index_of(7.6)] > l_down[grid.index_of(10.1)]

    def test_positive(self, atm, grid):
        assert np.all(downwelling(atm, grid) > 0)


@pytest.mark.slow
class TestSweepMonotonicity:
    def test_full_grid(self, atm, grid):
        angles = np.arange(30.0, 61.0)
        ranges = np.arange(3000.0, 6501.0, 100.0)
        tau = np.empty((angles.size, ranges.size, 256))
        lup = np.empty_like(tau)
        for i, a in enumerate(angles):
            for j, r in enumerate(ranges):
                geom = Geometry(r, a)
                tau[i, j] = transmission(atm, geom, grid)
                lup[i, j] = upwelling(atm, geom, grid)
        assert np.all(np.diff(tau, axis=1) < 0), "tau must fall with range"
        assert np.all(np.diff(tau, axis=0) > 0), "tau must rise with angle"
        assert np.all(np.diff(lup, axis=1) > 0), "L_up must rise with range"
        assert np.all(np.diff(lup, axis=0) < 0), "L_up must fall with angle"


class TestConfigRoundTrip:
    def test_round_trip(self, atm):
        text = atmosphere_to_config(atm)
        back = atmosphere_from_config(text)
        assert back == atm

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="mystery"):
            atmosphere_from_config("mystery = 12\n")

    def test_malformed_absorber(self):
        with pytest.raises(ConfigError):
            atmosphere_from_config("band_absorbers = 7.8 0.4\n")

    def test_determinism(self, atm, grid, mid_geometry):
        a = transmission(atm, mid_geometry, grid)
        b = transmission(AtmosphereModel(), mid_geometry, grid)
        assert np.array_equal(a, b)
