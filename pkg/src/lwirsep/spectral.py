"""Wavelength grid, Planck physics and the simplified at-sensor radiance model.

In the longwave window a surface both emits and reflects, so the radiance
reaching the sensor decomposes into a reflected-downwelling term, the surface
self-emission attenuated along the line of sight, and the path's own thermal
emission:

    L = (1 - eps) * L_down * tau  +  eps * B(T) * tau  +  L_up

Radiance unit throughout the package: W cm^-2 sr^-1 um^-1 (SI spectral
radiance per metre of wavelength times 1e-10). Plots and reports sometimes
quote micro flicks, i.e. 1e-6 of that unit.

Spectra are plain float64 arrays aligned to a :class:`SpectralGrid`;
dimensionless spectra (transmission, emissivity) live in [0, 1] and are
validated at the operation boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "H",
    "C",
    "K_B",
    "N_BANDS",
    "GRID_START_UM",
    "GRID_STEP_UM",
    "SpectralGrid",
    "planck_radiance",
    "planck_spectrum",
    "inverse_planck",
    "at_sensor_radiance",
    "surface_emitted_at_sensor",
]

# Constants are pinned to the values used to produce the reference numbers in
# this package (not current CODATA) so results reproduce bit-for-bit.
H: float = 6.6256e-34
"""Planck constant (J s)."""

C: float = 2.998e8
"""Speed of light (m s^-1)."""

K_B: float = 1.381e-23
"""Boltzmann constant (J K^-1)."""

N_BANDS: int = 256
GRID_START_UM: float = 7.5
GRID_STEP_UM: float = 0.0234

# W m^-2 sr^-1 m^-1  ->  W cm^-2 sr^-1 um^-1
_SI_TO_WCM2: float = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """The fixed 256-band wavelength axis every spectrum aligns to.

    Band centers run from 7.5 um upward in uniform steps of 0.0234 um.
    """

    wavelengths_um: np.ndarray = field(
        default_factory=lambda: GRID_START_UM + GRID_STEP_UM * np.arange(N_BANDS)
    )

    def __post_init__(self):
        w = np.asarray(self.wavelengths_um, dtype=np.float64)
        object.__setattr__(self, "wavelengths_um", w)
        if w.shape != (N_BANDS,):
            raise ValueError(f"grid must have exactly {N_BANDS} bands, got {w.shape}")
        if w[0] != GRID_START_UM:
            raise ValueError(f"grid must start at {GRID_START_UM} um")
        steps = np.diff(w)
        if np.any(steps <= 0):
            raise ValueError("grid wavelengths must be strictly increasing")
        if np.any(np.abs(steps - GRID_STEP_UM) > 1e-9):
            raise ValueError(f"grid step must be {GRID_STEP_UM} um within 1e-9")

    @classmethod
    def default(cls) -> "SpectralGrid":
        return cls()

    @property
    def n(self) -> int:
        return self.wavelengths_um.size

    def definition(self) -> str:
        """Canonical ``start:step:count`` string used in file manifests."""
        return f"{GRID_START_UM}:{GRID_STEP_UM}:{self.n}"

    def matches(self, other: "SpectralGrid") -> bool:
        return np.array_equal(self.wavelengths_um, other.wavelengths_um)

    def index_of(self, lambda_um: float) -> int:
        """Index of the band center closest to ``lambda_um``."""
        return int(np.argmin(np.abs(self.wavelengths_um - lambda_um)))


def planck_radiance(lambda_um, T):
    """Blackbody spectral radiance at wavelength ``lambda_um`` (um) and ``T`` (K).

    Evaluates 2 h c^2 lam^-5 / (exp(h c / (lam k T)) - 1) in SI and converts
    to W cm^-2 sr^-1 um^-1. Broadcasts over array inputs.

    Raises
    ------
    ValueError
        If any wavelength or temperature is non-positive.
    """
    lam = np.asarray(lambda_um, dtype=np.float64)
    temp = np.asarray(T, dtype=np.float64)
    if np.any(lam <= 0.0):
        raise ValueError("wavelength must be positive")
    if np.any(temp <= 0.0):
        raise ValueError("temperature must be positive")
    lam_m = lam * 1e-6
    exponent = H * C / (lam_m * K_B * temp)
    radiance_si = 2.0 * H * C**2 * lam_m**-5 / np.expm1(exponent)
    out = radiance_si * _SI_TO_WCM2
    if np.isscalar(lambda_um) and np.isscalar(T):
        return float(out)
    return out


def planck_spectrum(grid: SpectralGrid, T: float) -> np.ndarray:
    """Blackbody radiance spectrum on ``grid`` at temperature ``T``.

    ``T = 0`` returns the zero spectrum (the continuous T -> 0 limit); this is
    what the false-target evaluation mode relies on. Negative ``T`` raises.
    """
    if T < 0.0:
        raise ValueError("temperature must be non-negative")
    if T == 0.0:
        return np.zeros(grid.n)
    return planck_radiance(grid.wavelengths_um, T)


def inverse_planck(lambda_um, L):
    """Temperature whose blackbody radiance at ``lambda_um`` equals ``L``.

    Closed-form inversion of the Planck law; exact to roundoff, so
    ``inverse_planck(lam, planck_radiance(lam, T))`` recovers ``T``.
    ``L`` is in W cm^-2 sr^-1 um^-1. Broadcasts over arrays.

    Raises
    ------
    ValueError
        If any radiance or wavelength is non-positive.
    """
    lam = np.asarray(lambda_um, dtype=np.float64)
    radiance = np.asarray(L, dtype=np.float64)
    if np.any(lam <= 0.0):
        raise ValueError("wavelength must be positive")
    if np.any(radiance <= 0.0):
        raise ValueError("radiance must be positive")
    lam_m = lam * 1e-6
    radiance_si = radiance / _SI_TO_WCM2
    out = H * C / (lam_m * K_B * np.log1p(2.0 * H * C**2 * lam_m**-5 / radiance_si))
    if np.isscalar(lambda_um) and np.isscalar(L):
        return float(out)
    return out


def _check_aligned(grid: SpectralGrid, **spectra) -> None:
    for name, values in spectra.items():
        arr = np.asarray(values)
        if arr.shape != (grid.n,):
            raise ValueError(f"{name} has shape {arr.shape}, expected ({grid.n},)")


def _check_unit_interval(**spectra) -> None:
    for name, values in spectra.items():
        arr = np.asarray(values)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")


def at_sensor_radiance(eps, T, tau, L_down, L_up, grid: SpectralGrid) -> np.ndarray:
    """Total radiance reaching the sensor for a surface at temperature ``T``.

    Bandwise ``(1 - eps) * L_down * tau + eps * B(T) * tau + L_up``.
    ``eps`` and ``tau`` are dimensionless in [0, 1]; radiances are in
    W cm^-2 sr^-1 um^-1 on ``grid``.
    """
    eps = np.asarray(eps, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    L_down = np.asarray(L_down, dtype=np.float64)
    L_up = np.asarray(L_up, dtype=np.float64)
    _check_aligned(grid, eps=eps, tau=tau, L_down=L_down, L_up=L_up)
    _check_unit_interval(eps=eps, tau=tau)
    L_T = planck_spectrum(grid, T)
    return (1.0 - eps) * L_down * tau + eps * L_T * tau + L_up


def surface_emitted_at_sensor(eps, T, tau, grid: SpectralGrid) -> np.ndarray:
    """Surface self-emission after path attenuation: ``eps * B(T) * tau``."""
    eps = np.asarray(eps, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    _check_aligned(grid, eps=eps, tau=tau)
    _check_unit_interval(eps=eps, tau=tau)
    return eps * planck_spectrum(grid, T) * tau
