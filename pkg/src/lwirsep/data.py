"""Dataset generation, normalization statistics, splits and file I/O.

The parameter sweep mirrors a 31-angle x 36-range x 6-temperature collection
campaign over the material library; desk-scale presets stride both geometry
axes. The field-like generator produces ill-posed pixels: a perturbed copy of
the base atmosphere, multiplicative radiance noise on the observed total, and
withheld atmospheric components.

Dataset file layout (little-endian throughout):

    LWIRDS1\\n                      magic
    key = value\\n ...              manifest (version, grid, record_count,
                                    material_hash, optional atm.* block)
    \\n                             blank separator line
    <records>                       fixed-layout binary payload

Each record is ``range_m:f8  angle_deg:f8  material_id:i4  T:f8  flags:u1``
followed by the present spectra as 256 f8 each, in the order
tau, L_down, L_up, L_emit, L_total. Simulated records carry all five;
field-like records carry only L_total. Flag bit 0 = labeled, bit 1 =
field-like source.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .atmosphere import (
    ANGLE_BOUNDS_DEG,
    TAU_FLOOR,
    AtmosphereModel,
    Geometry,
    atmosphere_from_config,
    atmosphere_to_config,
    downwelling,
    transmission,
    upwelling,
)
from .errors import DataFormatError
from .materials import MaterialSpec
from .records import SOURCE_FIELD_LIKE, SOURCE_SIMULATED, SampleRecord
from .spectral import SpectralGrid, planck_spectrum

__all__ = [
    "SWEEP_ANGLES_DEG",
    "SWEEP_RANGES_M",
    "SWEEP_TEMPERATURES_K",
    "FIELD_RANGE_BOUNDS_M",
    "NormalizationStats",
    "normalize",
    "denormalize",
    "compute_norm_stats",
    "DatasetSplit",
    "split",
    "simulate_sample",
    "generate_sweep",
    "generate_field_like",
    "write_dataset",
    "read_dataset",
]

SWEEP_ANGLES_DEG = tuple(float(a) for a in range(30, 61))
SWEEP_RANGES_M = tuple(float(r) for r in range(3000, 6501, 100))
SWEEP_TEMPERATURES_K = (295.0, 300.0, 305.0, 310.0, 315.0, 320.0)

# Field collections observed a narrower range window than the simulations.
FIELD_RANGE_BOUNDS_M = (3600.0, 6150.0)

_NORMALIZED_COMPONENTS = ("L_total", "L_down", "L_up", "L_emit")
_PASSTHROUGH_COMPONENTS = ("tau", "eps")


@dataclass(frozen=True)
class NormalizationStats:
    """Global min/max per radiance component, used to map into [0, 1]."""

    L_total: tuple[float, float]
    L_down: tuple[float, float]
    L_up: tuple[float, float]
    L_emit: tuple[float, float]

    def __post_init__(self):
        for name in _NORMALIZED_COMPONENTS:
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name}: max must exceed min")

    def bounds(self, component: str) -> tuple[float, float]:
        if component not in _NORMALIZED_COMPONENTS:
            raise KeyError(f"no normalization stats for component {component!r}")
        return getattr(self, component)

    @classmethod
    def reference(cls) -> "NormalizationStats":
        """Fixed preset used by regression tests and as a documented example."""
        return cls(
            L_total=(3.656e-4, 1.344e-3),
            L_down=(2.1833e-4, 1.01e-3),
            L_up=(1.8016e-4, 7.106e-4),
            L_emit=(3.544e-4, 1.116e-3),
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in _NORMALIZED_COMPONENTS}


def normalize(x, stats: NormalizationStats, component: str):
    """Map ``x`` to normalized space. tau/eps pass through unchanged.

    Values outside the stats range map outside [0, 1] and are intentionally
    not clipped (test-set records may exceed the training extrema).
    """
    if component in _PASSTHROUGH_COMPONENTS:
        return np.asarray(x, dtype=np.float64)
    lo, hi = stats.bounds(component)
    return (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)


def denormalize(y, stats: NormalizationStats, component: str):
    """Exact inverse of :func:`normalize`."""
    if component in _PASSTHROUGH_COMPONENTS:
        return np.asarray(y, dtype=np.float64)
    lo, hi = stats.bounds(component)
    return np.asarray(y, dtype=np.float64) * (hi - lo) + lo


def compute_norm_stats(records) -> NormalizationStats:
    """Min/max per component over all records and bands.

    L_down/L_up/L_emit come from simulated records (field-like pixels withhold
    them); L_total additionally includes every field-like observation.
    """
    sim = [r for r in records if r.source == SOURCE_SIMULATED]
    if not sim:
        raise ValueError("need at least one simulated record to compute stats")
    totals = [r.L_total for r in records]

    def minmax(arrays):
        stacked = np.stack(arrays)
        return float(stacked.min()), float(stacked.max())

    return NormalizationStats(
        L_total=minmax(totals),
        L_down=minmax([r.L_down for r in sim]),
        L_up=minmax([r.L_up for r in sim]),
        L_emit=minmax([r.L_emit for r in sim]),
    )


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/validation/test index partition (72/8/20)."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]


def split(records, seed: int) -> DatasetSplit:
    """Deterministic shuffled 72/8/20 partition of ``records`` indices.

    A 20% test cut first, then 10% of the remainder as validation.
    """
    n = len(records)
    if n < 10:
        raise ValueError(f"need at least 10 records to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_test = round(0.20 * n)
    n_val = round(0.10 * (n - n_test))
    test = order[:n_test]
    val = order[n_test:n_test + n_val]
    train = order[n_test + n_val:]
    return DatasetSplit(tuple(int(i) for i in train),
                        tuple(int(i) for i in val),
                        tuple(int(i) for i in test))


# -- generation ---------------------------------------------------------------


def simulate_sample(atm: AtmosphereModel, geom: Geometry, material: MaterialSpec,
                    T: float, grid: SpectralGrid) -> SampleRecord:
    """Forward-simulate one observation with all components stored."""
    tau = np.maximum(transmission(atm, geom, grid), TAU_FLOOR)
    L_up = upwelling(atm, geom, grid)
    L_down = downwelling(atm, grid)
    return _compose(geom, material, T, tau, L_down, L_up, grid)


def _compose(geom, material, T, tau, L_down, L_up, grid):
    eps = material.emissivity
    L_emit = eps * planck_spectrum(grid, T) * tau
    L_total = (1.0 - eps) * L_down * tau + L_emit + L_up
    return SampleRecord.simulated(geom, material.id, T, tau, L_down, L_up, L_emit, L_total)


def generate_sweep(atm: AtmosphereModel, materials, grid: SpectralGrid, *,
                   angle_stride: int = 1, range_stride: int = 1,
                   temperatures=None) -> list[SampleRecord]:
    """One simulated record per (material x angle x range x T) combination.

    ``angle_stride``/``range_stride`` subsample the sweep axes for desk-scale
    runs (stride 5 gives 7 angles x 8 ranges = 56 geometries). Records come
    out in canonical material-major order.
    """
    angles = SWEEP_ANGLES_DEG[::angle_stride]
    ranges = SWEEP_RANGES_M[::range_stride]
    temps = tuple(temperatures) if temperatures is not None else SWEEP_TEMPERATURES_K

    L_down = downwelling(atm, grid)
    geo_cache = {}
    for a in angles:
        for r in ranges:
            geom = Geometry(r, a)
            tau = np.maximum(transmission(atm, geom, grid), TAU_FLOOR)
            geo_cache[(a, r)] = (geom, tau, upwelling(atm, geom, grid))

    out = []
    for material in materials:
        for a in angles:
            for r in ranges:
                geom, tau, L_up = geo_cache[(a, r)]
                for T in temps:
                    out.append(_compose(geom, material, T, tau, L_down, L_up, grid))
    return out


def perturbed_atmosphere(atm: AtmosphereModel, perturbation_scale: float,
                         rng: np.random.Generator) -> AtmosphereModel:
    """Jitter absorber strengths and the surface air temperature.

    Multiplicative ``1 + scale * N(0,1)`` on the continuum and on each band
    absorber peak; additive ``scale * N(0,1) * 5 K`` on the surface air
    temperature. With scale 0 the model is returned bit-identical (the draws
    are still consumed, keeping the stream position stable).
    """
    temp_shift = perturbation_scale * rng.standard_normal() * 5.0
    continuum = atm.continuum_extinction * (1.0 + perturbation_scale * rng.standard_normal())
    absorbers = tuple(
        (c, w, p * (1.0 + perturbation_scale * rng.standard_normal()))
        for c, w, p in atm.band_absorbers
    )
    return AtmosphereModel(
        surface_air_temp=atm.surface_air_temp + temp_shift,
        lapse_rate=atm.lapse_rate,
        absorber_scale_height=atm.absorber_scale_height,
        band_absorbers=absorbers,
        continuum_extinction=max(continuum, 0.0),
        n_layers=atm.n_layers,
        rng_seed=atm.rng_seed,
    )


def generate_field_like(atm_base: AtmosphereModel, perturbation_scale: float,
                        noise_sigma: float, n_pixels: int, material: MaterialSpec,
                        T: float = 285.0, seed: int = 0, *,
                        labeled_fraction: float = 1.0,
                        impure_fraction: float = 0.0,
                        impurity_material: MaterialSpec | None = None,
                        grid: SpectralGrid | None = None) -> list[SampleRecord]:
    """Ill-posed pixels of one nominal material under a perturbed atmosphere.

    Geometry is sampled uniformly over the field collection window; the
    observed total radiance carries per-band multiplicative Gaussian noise of
    relative width ``noise_sigma``. The first ``round(labeled_fraction * n)``
    pixels are labeled (truth readable); all pixels withhold the atmospheric
    components.

    ``impure_fraction`` contaminates that share of pixels: their radiance is
    generated from a blend of the nominal and the impurity emissivity
    (nominal weight drawn from U(0.4, 0.9)) while they stay tagged with the
    nominal material, the way location-based pixel extraction mislabels
    background mixtures as the target. Which pixels are impure is decided by
    a seeded draw, so labeled and unlabeled pixels are contaminated alike.
    """
    if perturbation_scale < 0 or noise_sigma < 0:
        raise ValueError("perturbation_scale and noise_sigma must be >= 0")
    if not 0.0 <= impure_fraction <= 1.0:
        raise ValueError("impure_fraction must lie in [0, 1]")
    if impure_fraction > 0 and impurity_material is None:
        raise ValueError("impure_fraction needs an impurity_material")
    grid = grid or SpectralGrid.default()
    rng = np.random.default_rng(seed)
    # separate stream so contamination never shifts the geometry/noise draws
    rng_impurity = np.random.default_rng([seed, 1])
    atm = perturbed_atmosphere(atm_base, perturbation_scale, rng)

    n_labeled = round(labeled_fraction * n_pixels)
    records = []
    for i in range(n_pixels):
        r = rng.uniform(*FIELD_RANGE_BOUNDS_M)
        a = rng.uniform(*ANGLE_BOUNDS_DEG)
        geom = Geometry(r, a)
        pixel_material = material
        if impure_fraction > 0 and rng_impurity.uniform() < impure_fraction:
            w = rng_impurity.uniform(0.4, 0.9)
            blend = w * material.emissivity + (1.0 - w) * impurity_material.emissivity
            pixel_material = MaterialSpec.from_emissivity(
                material.id, material.name, material.family, blend)
        clean = simulate_sample(atm, geom, pixel_material, T, grid)
        noisy_total = clean.L_total * (1.0 + noise_sigma * rng.standard_normal(grid.n))
        records.append(SampleRecord.field_like(geom, material.id, T, noisy_total,
                                               labeled=i < n_labeled))
    return records


# -- file I/O -----------------------------------------------------------------

_MAGIC = b"LWIRDS1\n"
_VERSION = 1
_HEAD = struct.Struct("<ddidB")  # range, angle, material_id, T, flags
_FLAG_LABELED = 0x01
_FLAG_FIELD = 0x02


def write_dataset(records, path, *, grid: SpectralGrid, material_hash: str = "",
                  atm: AtmosphereModel | None = None, extra: dict | None = None) -> None:
    """Write records plus a manifest; byte-identical for identical inputs."""
    lines = [
        f"version = {_VERSION}",
        f"grid = {grid.definition()}",
        f"record_count = {len(records)}",
        f"material_hash = {material_hash}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    if atm is not None:
        for ln in atmosphere_to_config(atm).splitlines():
            key, _, val = ln.partition("=")
            lines.append(f"atm.{key.strip()} = {val.strip()}")

    chunks = [_MAGIC, ("\n".join(lines) + "\n\n").encode()]
    for rec in records:
        flags = (_FLAG_LABELED if rec.labeled else 0) | (
            _FLAG_FIELD if rec.source == SOURCE_FIELD_LIKE else 0)
        chunks.append(_HEAD.pack(rec.geometry.range_m, rec.geometry.angle_deg,
                                 rec._material_id, rec._T, flags))
        if rec.source == SOURCE_SIMULATED:
            for comp in (rec._tau, rec._L_down, rec._L_up, rec._L_emit, rec._L_total):
                chunks.append(_spectrum_bytes(comp, grid))
        else:
            chunks.append(_spectrum_bytes(rec._L_total, grid))
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def _spectrum_bytes(arr, grid):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.shape != (grid.n,):
        raise ValueError(f"spectrum shape {arr.shape} does not match grid")
    return arr.astype("<f8", copy=False).tobytes()


def read_dataset(path, *, expected_grid: SpectralGrid | None = None,
                 expected_material_hash: str | None = None):
    """Read a dataset file back into ``(records, manifest_dict)``.

    Raises :class:`DataFormatError` on a bad magic, unsupported version,
    truncation, or a grid/material-hash mismatch against the expectations.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(_MAGIC):
        raise DataFormatError(f"{path}: not a dataset file (bad magic)")
    sep = blob.find(b"\n\n", len(_MAGIC))
    if sep < 0:
        raise DataFormatError(f"{path}: missing manifest terminator")
    manifest = {}
    for ln in blob[len(_MAGIC):sep].decode().splitlines():
        key, eq, val = ln.partition("=")
        if not eq:
            raise DataFormatError(f"{path}: malformed manifest line {ln!r}")
        manifest[key.strip()] = val.strip()

    if int(manifest.get("version", -1)) != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {manifest.get('version')!r}")
    grid = SpectralGrid.default()
    if manifest.get("grid") != grid.definition():
        raise DataFormatError(f"{path}: unknown grid {manifest.get('grid')!r}")
    if expected_grid is not None and manifest["grid"] != expected_grid.definition():
        raise DataFormatError(f"{path}: grid mismatch")
    if expected_material_hash is not None and manifest.get("material_hash") != expected_material_hash:
        raise DataFormatError(f"{path}: material library hash mismatch")

    n = int(manifest["record_count"])
    spec_bytes = grid.n * 8
    records = []
    pos = sep + 2
    for _ in range(n):
        if pos + _HEAD.size > len(blob):
            raise DataFormatError(f"{path}: truncated record header")
        range_m, angle_deg, material_id, T, flags = _HEAD.unpack_from(blob, pos)
        pos += _HEAD.size
        geom = Geometry(range_m, angle_deg)
        labeled = bool(flags & _FLAG_LABELED)
        is_field = bool(flags & _FLAG_FIELD)
        n_spectra = 1 if is_field else 5
        if pos + n_spectra * spec_bytes > len(blob):
            raise DataFormatError(f"{path}: truncated record payload")
        spectra = [
            np.frombuffer(blob, dtype="<f8", count=grid.n, offset=pos + i * spec_bytes).copy()
            for i in range(n_spectra)
        ]
        pos += n_spectra * spec_bytes
        if is_field:
            records.append(SampleRecord.field_like(geom, material_id, T, spectra[0], labeled))
        else:
            records.append(SampleRecord.simulated(geom, material_id, T, *spectra))
    if pos != len(blob):
        raise DataFormatError(f"{path}: {len(blob) - pos} trailing bytes after records")

    atm_lines = [f"{k[4:]} = {v}" for k, v in manifest.items() if k.startswith("atm.")]
    if atm_lines:
        manifest["_atmosphere"] = atmosphere_from_config("\n".join(atm_lines))
    return records, manifest
