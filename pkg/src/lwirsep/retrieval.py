"""Temperature-emissivity separation by per-temperature inversion + grid search.

With the atmospheric components in hand, the surface emissivity at an assumed
temperature T follows from the radiance budget:

    eps(lambda) = ((L_total - L_up) / tau - L_down) / (B(T) - L_down)

One measured spectrum has 256 bands but 257 unknowns (the emissivity spectrum
plus T), so T is searched over a grid and scored against an assumed constant
emissivity eps_bar: plain MAE, or MAE plus a min-max-normalized MAE that
compares spectral shape instead of level. Raw inversions are deliberately not
clipped to [0, 1]; out-of-range excursions carry diagnostic information.

Bands where the transmission is below 1e-6 or the denominator vanishes are
flagged invalid and never contribute to any criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInversionError
from .spectral import planck_radiance

__all__ = [
    "TAU_VALID_MIN",
    "TemperatureGrid",
    "TesResult",
    "invert_emissivity",
    "norm_mae",
    "grid_search_temperature",
    "grid_search_temperature_pooled",
    "deviation_curve",
]

TAU_VALID_MIN = 1e-6
_DENOM_MIN = 1e-12


@dataclass(frozen=True)
class TemperatureGrid:
    """Inclusive evenly spaced search temperatures."""

    t_min: float = 280.0
    t_max: float = 320.0
    step: float = 5.0

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be below t_max")
        if self.step <= 0:
            raise ValueError("step must be positive")

    def values(self) -> np.ndarray:
        n = int(round((self.t_max - self.t_min) / self.step))
        return self.t_min + self.step * np.arange(n + 1)

    @classmethod
    def fine(cls) -> "TemperatureGrid":
        return cls(270.0, 320.0, 1.0)


@dataclass
class TesResult:
    """Grid-search outcome for one pixel (or one pooled pixel set)."""

    t_hat: float
    emissivity: np.ndarray
    valid: np.ndarray
    table: list = field(default_factory=list)  # rows (T, mae, norm_mae-or-nan)
    criterion: str = "mae"


def invert_emissivity(L_total, L_up, L_down, tau, T, wavelengths_um):
    """Per-band emissivity at assumed temperature ``T``.

    Returns ``(eps_hat, valid)``; flagged bands hold NaN. Values are not
    clipped. Raises :class:`DegenerateInversionError` if no band survives.
    """
    L_total = np.asarray(L_total, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    B = planck_radiance(np.asarray(wavelengths_um, dtype=np.float64), T)
    denom = B - np.asarray(L_down, dtype=np.float64)
    valid = (tau >= TAU_VALID_MIN) & (np.abs(denom) >= _DENOM_MIN)
    if not valid.any():
        raise DegenerateInversionError("every band is flagged invalid")
    eps = np.full(L_total.shape, np.nan)
    surface = (L_total - L_up) / np.where(valid, tau, 1.0) - L_down
    np.divide(surface, denom, out=eps, where=valid)
    return eps, valid


def norm_mae(e_hat, e_ref, valid=None) -> float:
    """Shape criterion: min-max normalize both spectra, then mean |diff|.

    A scalar (or constant) reference has no shape; its normalized form is
    defined as the all-0.5 spectrum so the criterion degrades gracefully.
    A constant ``e_hat`` raises ValueError (no shape to compare; callers fall
    back to the plain MAE).
    """
    e_hat = np.asarray(e_hat, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(e_hat)
    vals = e_hat[valid]
    if vals.size < 2 or vals.max() == vals.min():
        raise ValueError("e_hat must have at least 2 distinct unflagged values")
    hat_n = (vals - vals.min()) / (vals.max() - vals.min())

    e_ref = np.asarray(e_ref, dtype=np.float64)
    if e_ref.ndim == 0:
        ref_n = np.full(vals.shape, 0.5)
    else:
        ref = e_ref[valid]
        span = ref.max() - ref.min()
        ref_n = np.full(vals.shape, 0.5) if span == 0 else (ref - ref.min()) / span
    return float(np.abs(hat_n - ref_n).mean())


CRITERION_MAE = "mae"
CRITERION_MAE_PLUS_NORM = "mae_plus_norm_mae"


def _score_rows(inversions, eps_bar, t_values, criterion):
    """(score, mae, norm_mae) per grid temperature from per-T inversions."""
    rows, scores = [], []
    for T, (eps, valid) in zip(t_values, inversions):
        mae = float(np.abs(eps[valid] - eps_bar).mean())
        nmae = np.nan
        if criterion == CRITERION_MAE_PLUS_NORM:
            try:
                nmae = norm_mae(eps, np.float64(eps_bar), valid)
            except ValueError:
                nmae = np.nan  # constant inversion: fall back to MAE alone
        rows.append((float(T), mae, nmae))
        scores.append(mae if np.isnan(nmae) else mae + nmae)
    return rows, np.asarray(scores)


def grid_search_temperature(L_total, L_up, L_down, tau, eps_bar,
                            t_grid: TemperatureGrid,
                            criterion: str = CRITERION_MAE,
                            wavelengths_um=None) -> TesResult:
    """Estimate T as the grid argmin of the chosen criterion for one pixel.

    Ties break toward the lower temperature (underestimation is the safer
    error direction: retrieved emissivity shrinks as the assumed T grows).
    """
    if not 0.0 < eps_bar < 1.0:
        raise ValueError("eps_bar must lie in (0, 1)")
    if criterion not in (CRITERION_MAE, CRITERION_MAE_PLUS_NORM):
        raise ValueError(f"unknown criterion {criterion!r}")
    t_values = t_grid.values()
    inversions = [invert_emissivity(L_total, L_up, L_down, tau, T, wavelengths_um)
                  for T in t_values]
    rows, scores = _score_rows(inversions, eps_bar, t_values, criterion)
    best = int(np.argmin(scores))  # argmin returns the first (= lowest T) tie
    eps, valid = inversions[best]
    return TesResult(float(t_values[best]), eps, valid, rows, criterion)


def grid_search_temperature_pooled(L_totals, L_ups, L_downs, taus, eps_bar,
                                   t_grid: TemperatureGrid,
                                   criterion: str = CRITERION_MAE,
                                   wavelengths_um=None) -> TesResult:
    """Joint search over a pixel set sharing one true temperature.

    Criteria aggregate over all pixels and bands at once (the alternative to
    the per-pixel search; reports label which aggregation produced a number).
    The returned emissivity is the valid-band mean spectrum at the chosen T.
    """
    L_totals = np.atleast_2d(np.asarray(L_totals, dtype=np.float64))
    L_ups = np.atleast_2d(np.asarray(L_ups, dtype=np.float64))
    L_downs = np.atleast_2d(np.asarray(L_downs, dtype=np.float64))
    taus = np.atleast_2d(np.asarray(taus, dtype=np.float64))
    t_values = t_grid.values()
    inversions = []
    for T in t_values:
        eps = np.full(L_totals.shape, np.nan)
        valid = np.zeros(L_totals.shape, dtype=bool)
        for i in range(L_totals.shape[0]):
            eps[i], valid[i] = invert_emissivity(
                L_totals[i], L_ups[i], L_downs[i], taus[i], T, wavelengths_um)
        inversions.append((eps, valid))
    rows, scores = _score_rows(inversions, eps_bar, t_values, criterion)
    best = int(np.argmin(scores))
    eps, valid = inversions[best]
    mean_eps = np.nanmean(np.where(valid, eps, np.nan), axis=0)
    return TesResult(float(t_values[best]), mean_eps, np.isfinite(mean_eps),
                     rows, criterion)


def deviation_curve(records, material, t_grid: TemperatureGrid, grid):
    """Mean inversion MAE vs temperature deviation, using true components.

    All records must share one true temperature; the curve is indexed by
    ``dT = T_assumed - T_true``. Minimum at 0 for clean data.
    """
    true_T = records[0].T
    if any(r.T != true_T for r in records):
        raise ValueError("records must share one true temperature")
    t_values = t_grid.values()
    sums = np.zeros(t_values.size)
    for rec in records:
        for j, T in enumerate(t_values):
            eps, valid = invert_emissivity(rec.L_total, rec.L_up, rec.L_down,
                                           rec.tau, T, grid.wavelengths_um)
            sums[j] += np.abs(eps[valid] - material.emissivity[valid]).mean()
    return [(float(T - true_T), float(s / len(records)))
            for T, s in zip(t_values, sums)]
