"""Synthetic surface material library.

29 materials spanning the behaviors the retrieval stage has to cope with:
near-constant high emitters (vegetation/water analogs), low-emissivity metals
(including a ~0.17 aluminum analog and a ~0.04 spectralon analog), smooth
multi-feature spectra built from a handful of Gaussian dips and peaks, and
jagged spectra with band-to-band structure. Construction is fully
deterministic in the seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralGrid

__all__ = ["MaterialSpec", "build_material_library", "material_library_hash", "LIBRARY_SIZE"]

LIBRARY_SIZE = 29

FAMILY_CONSTANT = "constant"
FAMILY_METAL = "metal"
FAMILY_SMOOTH = "smooth"
FAMILY_JAGGED = "jagged"


@dataclass(frozen=True)
class MaterialSpec:
    """A surface material: identity, emissivity spectrum and its band mean."""

    id: int
    name: str
    family: str
    emissivity: np.ndarray
    eps_bar: float

    def __post_init__(self):
        e = np.asarray(self.emissivity, dtype=np.float64)
        object.__setattr__(self, "emissivity", e)
        if np.any(e < 0.0) or np.any(e > 1.0):
            raise ValueError(f"material {self.name}: emissivity must lie in [0, 1]")
        if not 0.0 < self.eps_bar < 1.0:
            raise ValueError(f"material {self.name}: eps_bar must lie in (0, 1)")

    @classmethod
    def from_emissivity(cls, id, name, family, emissivity):
        e = np.asarray(emissivity, dtype=np.float64)
        return cls(id, name, family, e, float(e.mean()))


def _gaussian(lam, center, width, amp):
    return amp * np.exp(-0.5 * ((lam - center) / width) ** 2)


def _smooth_spectrum(lam, rng, base_range=(0.62, 0.90)):
    base = rng.uniform(*base_range)
    e = np.full(lam.size, base)
    for _ in range(rng.integers(2, 6)):
        amp = rng.uniform(0.04, 0.16) * rng.choice([-1.0, 1.0])
        center = rng.uniform(7.8, 13.2)
        width = rng.uniform(0.15, 0.8)
        e += _gaussian(lam, center, width, amp)
    return np.clip(e, 0.02, 0.995)


def _jagged_spectrum(lam, rng):
    base = rng.uniform(0.55, 0.85)
    e = base + rng.uniform(-0.12, 0.12, size=lam.size)
    # a couple of broader features underneath the band-to-band structure
    for _ in range(2):
        e += _gaussian(lam, rng.uniform(8.0, 13.0), rng.uniform(0.3, 0.9),
                       rng.uniform(0.05, 0.12) * rng.choice([-1.0, 1.0]))
    return np.clip(e, 0.02, 0.995)


def _with_mean(e, target):
    """Shift a spectrum so its band mean hits ``target`` exactly."""
    shifted = e + (target - e.mean())
    if shifted.min() < 0.0 or shifted.max() > 1.0:
        raise ValueError("mean adjustment left [0, 1]")
    return shifted


def build_material_library(seed: int, grid: SpectralGrid | None = None) -> list[MaterialSpec]:
    """The 29-entry material library, deterministic in ``seed``."""
    grid = grid or SpectralGrid.default()
    lam = grid.wavelengths_um
    rng = np.random.default_rng(seed)
    mats = []

    def add(name, family, e):
        mats.append(MaterialSpec.from_emissivity(len(mats), name, family, e))

    # near-constant high emitters
    add("grass", FAMILY_CONSTANT,
        _with_mean(0.983 - _gaussian(lam, 9.6, 0.5, 0.006), 0.983))
    add("water", FAMILY_CONSTANT,
        _with_mean(0.988 + 0.003 * (lam - lam.mean()) / 6.0, 0.988))
    add("ice", FAMILY_CONSTANT,
        _with_mean(0.975 + _gaussian(lam, 11.5, 1.2, 0.005), 0.975))

    # low-emissivity metal-likes
    add("aluminum", FAMILY_METAL,
        _with_mean(0.16 + 0.03 * (lam - 7.5) / 6.0 + _gaussian(lam, 9.0, 1.5, 0.02), 0.174))
    add("steel", FAMILY_METAL,
        _with_mean(0.12 - 0.02 * (lam - 7.5) / 6.0, 0.12))
    add("brass", FAMILY_METAL,
        _with_mean(0.095 + _gaussian(lam, 11.0, 2.0, 0.015), 0.095))
    add("spectralon", FAMILY_METAL,
        _with_mean(0.039 + 0.004 * (lam - lam.mean()) / 6.0, 0.039))

    # named smooth materials
    add("sand", FAMILY_SMOOTH,
        np.clip(0.88 - _gaussian(lam, 8.7, 0.45, 0.32) - _gaussian(lam, 12.4, 0.7, 0.06), 0.02, 0.995))
    add("concrete", FAMILY_SMOOTH,
        np.clip(0.93 - _gaussian(lam, 9.1, 0.6, 0.18) - _gaussian(lam, 11.2, 0.8, 0.05), 0.02, 0.995))

    for i in range(16):
        add(f"smooth_{i + 1:02d}", FAMILY_SMOOTH, _smooth_spectrum(lam, rng))
    for i in range(4):
        add(f"jagged_{i + 1:02d}", FAMILY_JAGGED, _jagged_spectrum(lam, rng))

    assert len(mats) == LIBRARY_SIZE
    return mats


def material_library_hash(materials) -> str:
    """SHA-256 over ids, names and emissivity bytes, for dataset manifests."""
    h = hashlib.sha256()
    for m in materials:
        h.update(f"{m.id}:{m.name}:{m.family}:".encode())
        h.update(np.ascontiguousarray(m.emissivity).tobytes())
    return h.hexdigest()
