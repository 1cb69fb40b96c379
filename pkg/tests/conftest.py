import numpy as np
import pytest

from lwirsep.atmosphere import AtmosphereModel, Geometry
from lwirsep.materials import build_material_library
from lwirsep.spectral import SpectralGrid


@pytest.fixture(scope="session")
def grid():
    return SpectralGrid.default()


@pytest.fixture(scope="session")
def atm():
    return AtmosphereModel()


@pytest.fixture(scope="session")
def library(grid):
    return build_material_library(42, grid)


@pytest.fixture(scope="session")
def mid_geometry():
    return Geometry(5000.0, 45.0)


@pytest.fixture(scope="session")
def small_records(atm, library, grid):
    """A handful of simulated records spanning materials and geometries."""
    from lwirsep.data import simulate_sample

    rng = np.random.default_rng(5)
    records = []
    for i in range(12):
        geom = Geometry(rng.uniform(3000, 6500), rng.uniform(30, 60))
        records.append(simulate_sample(atm, geom, library[i % len(library)],
                                       float(rng.uniform(290, 320)), grid))
    return records
