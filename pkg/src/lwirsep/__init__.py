"""Longwave-infrared hyperspectral atmospheric correction and
temperature-emissivity separation: a parametric forward simulator, a
geometry-dependent hybrid network trained on mixed simulated/field-like
data, and a grid-search retrieval stage."""

__version__ = "0.1.0"

from .spectral import (
    SpectralGrid,
    planck_radiance,
    planck_spectrum,
    inverse_planck,
    at_sensor_radiance,
    surface_emitted_at_sensor,
)
from .atmosphere import AtmosphereModel, Geometry, transmission, upwelling, downwelling
from .materials import MaterialSpec, build_material_library, material_library_hash
from .records import SampleRecord
from .data import (
    NormalizationStats,
    normalize,
    denormalize,
    compute_norm_stats,
    split,
    simulate_sample,
    generate_sweep,
    generate_field_like,
    write_dataset,
    read_dataset,
)
from .nn import HybridNetwork, init_params, RecordBatch, loss1, loss2
from .training import TrainConfig, train, save_checkpoint, load_checkpoint
from .retrieval import (
    TemperatureGrid,
    invert_emissivity,
    grid_search_temperature,
    norm_mae,
    deviation_curve,
)
from .evaluation import (
    component_errors,
    residual_fields,
    purity_classification,
    equivalent_blackbody_temperature,
)
