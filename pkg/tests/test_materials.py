import numpy as np
import pytest

from lwirsep.materials import (
    FAMILY_CONSTANT,
    FAMILY_JAGGED,
    FAMILY_METAL,
    FAMILY_SMOOTH,
    LIBRARY_SIZE,
    build_material_library,
    material_library_hash,
)


def test_library_size(library):
    assert len(library) == LIBRARY_SIZE
    assert [m.id for m in library] == list(range(LIBRARY_SIZE))


def test_deterministic_in_seed(grid):
    a = build_material_library(42, grid)
    b = build_material_library(42, grid)
    assert material_library_hash(a) == material_library_hash(b)
    for ma, mb in zip(a, b):
        assert np.array_equal(ma.emissivity, mb.emissivity)


def test_different_seeds_differ(grid):
    a = build_material_library(1, grid)
    b = build_material_library(2, grid)
    assert material_library_hash(a) != material_library_hash(b)


def test_eps_bar_is_band_mean(library):
    for m in library:
        assert m.eps_bar == pytest.approx(float(m.emissivity.mean()), abs=1e-12)


def test_emissivities_in_unit_interval(library):
    for m in library:
        assert np.all(m.emissivity >= 0) and np.all(m.emissivity <= 1)
        assert 0 < m.eps_bar < 1


def test_family_mix(library):
    counts = {}
    for m in library:
        counts[m.family] = counts.get(m.family, 0) + 1
    assert counts[FAMILY_CONSTANT] >= 2
    assert counts[FAMILY_METAL] >= 2
    assert counts[FAMILY_SMOOTH] >= 12
    assert counts[FAMILY_JAGGED] >= 2


def test_constant_materials_are_high_and_flat(library):
    for m in library:
        if m.family == FAMILY_CONSTANT:
            assert 0.97 <= m.eps_bar <= 0.99
            assert m.emissivity.max() - m.emissivity.min() < 0.02


def test_metal_regimes(library):
    metals = [m for m in library if m.family == FAMILY_METAL]
    assert any(abs(m.eps_bar - 0.174) < 1e-9 for m in metals)  # aluminum analog
    assert any(m.eps_bar < 0.05 for m in metals)  # spectralon analog
    assert sum(0.05 <= m.eps_bar <= 0.2 for m in metals) >= 2


def test_jagged_has_band_to_band_structure(library):
    for m in library:
        if m.family == FAMILY_JAGGED:
            assert np.abs(np.diff(m.emissivity)).mean() > 0.02
        if m.family == FAMILY_SMOOTH:
            assert np.abs(np.diff(m.emissivity)).mean() < 0.02
