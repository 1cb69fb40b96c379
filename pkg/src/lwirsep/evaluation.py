"""Error tables, residual fields, purity fractions and the per-band
blackbody-temperature diagnostic.

All error statistics are computed in physical units after denormalizing the
network outputs. The "false target" mode masks the surface truth (emissivity
and temperature both zero) before deriving the emitted/total radiance; the
atmospheric component predictions do not depend on the target, so their error
rows must come out bit-identical between the two modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import NormalizationStats, denormalize
from .nn.losses import RecordBatch
from .records import SOURCE_SIMULATED
from .retrieval import TAU_VALID_MIN
from .spectral import SpectralGrid, inverse_planck, planck_radiance

__all__ = [
    "ComponentErrorTable",
    "component_errors",
    "ResidualField",
    "residual_fields",
    "purity_classification",
    "equivalent_blackbody_temperature",
    "ebt_noise_study",
]

_COMPONENT_ORDER = ("L_total", "L_down", "L_up", "L_emit", "tau")


@dataclass
class ComponentErrorTable:
    """Per component: ground-truth mean, MAE and RMSE."""

    target_mode: str
    rows: dict  # component -> (truth_mean, mae, rmse)

    def to_csv(self) -> str:
        lines = ["component,target_mode,truth_mean,mae,rmse"]
        for comp in _COMPONENT_ORDER:
            mean, mae, rmse = self.rows[comp]
            lines.append(f"{comp},{self.target_mode},{mean:.10e},{mae:.10e},{rmse:.10e}")
        return "\n".join(lines) + "\n"


def predict_components(net, records, stats):
    """Denormalized atmospheric predictions for a record list.

    Needs only the viewing geometry, so it works on unlabeled field pixels.
    """
    ranges = np.array([r.geometry.range_m for r in records])
    angles = np.array([r.geometry.angle_deg for r in records])
    downs, ups, taus = [], [], []
    for i in range(0, len(records), 256):
        d, u, t = net.forward(ranges[i:i + 256], angles[i:i + 256], training=False)
        downs.append(d)
        ups.append(u)
        taus.append(t)
    return {
        "L_down": denormalize(np.concatenate(downs), stats, "L_down"),
        "L_up": denormalize(np.concatenate(ups), stats, "L_up"),
        "tau": np.concatenate(taus),
    }


def component_errors(net, test_records, stats: NormalizationStats, library,
                     grid: SpectralGrid, target_mode: str = "true") -> ComponentErrorTable:
    """MAE/RMSE per component over simulated test records.

    ``target_mode="false"`` masks emissivity and temperature to zero when
    deriving the emitted and total radiance (the atmospheric predictions are
    unchanged by construction).
    """
    if target_mode not in ("true", "false"):
        raise ValueError(f"target_mode must be 'true' or 'false', got {target_mode!r}")
    if any(r.source != SOURCE_SIMULATED for r in test_records):
        raise ValueError("component errors need simulated records with ground truth")
    batch = RecordBatch.from_records(test_records, library, grid)
    pred = predict_components(net, test_records, stats)

    if target_mode == "true":
        B = planck_radiance(batch.wavelengths_um[None, :], batch.T[:, None])
        eps = batch.eps
    else:
        B = np.zeros_like(batch.L_total)  # Planck spectrum at T=0 is zero
        eps = np.zeros_like(batch.eps)
    L_emit_hat = eps * B * pred["tau"]
    L_total_hat = (1.0 - eps) * pred["L_down"] * pred["tau"] + L_emit_hat + pred["L_up"]

    truth = {"L_total": batch.L_total, "L_down": batch.L_down, "L_up": batch.L_up,
             "L_emit": batch.L_emit, "tau": batch.tau}
    predicted = {"L_total": L_total_hat, "L_down": pred["L_down"], "L_up": pred["L_up"],
                 "L_emit": L_emit_hat, "tau": pred["tau"]}
    rows = {}
    for comp in _COMPONENT_ORDER:
        err = predicted[comp] - truth[comp]
        rows[comp] = (float(truth[comp].mean()),
                      float(np.abs(err).mean()),
                      float(np.sqrt((err**2).mean())))
    return ComponentErrorTable(target_mode, rows)


@dataclass
class ResidualField:
    """Truth/prediction/residual grids over (axis value x wavelength)."""

    component: str
    axis_name: str       # "angle_deg" or "range_m"
    axis_values: np.ndarray
    wavelengths_um: np.ndarray
    truth: np.ndarray      # (n_axis, n_bands)
    predicted: np.ndarray
    residual: np.ndarray   # truth - predicted


def residual_fields(net, atm, material, stats, grid, *, fixed_range_m=None,
                    fixed_angle_deg=None, T: float = 295.0) -> dict:
    """Component fields over one swept geometry axis with the other fixed.

    Exactly one of ``fixed_range_m``/``fixed_angle_deg`` must be given. Truth
    comes from the forward simulator, predictions from the network.
    """
    from .data import SWEEP_ANGLES_DEG, SWEEP_RANGES_M, simulate_sample
    from .atmosphere import Geometry

    if (fixed_range_m is None) == (fixed_angle_deg is None):
        raise ValueError("fix exactly one of range or angle")
    if fixed_range_m is not None:
        axis_name, axis = "angle_deg", np.asarray(SWEEP_ANGLES_DEG)
        geoms = [Geometry(fixed_range_m, a) for a in axis]
    else:
        axis_name, axis = "range_m", np.asarray(SWEEP_RANGES_M)
        geoms = [Geometry(r, fixed_angle_deg) for r in axis]

    records = [simulate_sample(atm, g, material, T, grid) for g in geoms]
    batch = RecordBatch.from_records(records, [material], grid)
    pred = predict_components(net, records, stats)
    B = planck_radiance(grid.wavelengths_um[None, :], batch.T[:, None])
    L_emit_hat = batch.eps * B * pred["tau"]
    L_total_hat = (1.0 - batch.eps) * pred["L_down"] * pred["tau"] + L_emit_hat + pred["L_up"]
    predicted = {"tau": pred["tau"], "L_down": pred["L_down"], "L_up": pred["L_up"],
                 "L_emit": L_emit_hat, "L_total": L_total_hat}
    truth = {"tau": batch.tau, "L_down": batch.L_down, "L_up": batch.L_up,
             "L_emit": batch.L_emit, "L_total": batch.L_total}
    return {comp: ResidualField(comp, axis_name, axis, grid.wavelengths_um,
                                truth[comp], predicted[comp],
                                truth[comp] - predicted[comp])
            for comp in _COMPONENT_ORDER}


def residual_fields_to_csv(fields: dict) -> str:
    """Plot-ready long format: component, kind, axis value, wavelength, value."""
    lines = ["component,kind,axis_name,axis_value,wavelength_um,value"]
    for comp, f in fields.items():
        for kind, grid_vals in (("truth", f.truth), ("predicted", f.predicted),
                                ("residual", f.residual)):
            for i, av in enumerate(f.axis_values):
                for j, wl in enumerate(f.wavelengths_um):
                    lines.append(f"{comp},{kind},{f.axis_name},{av},{wl},{grid_vals[i, j]:.10e}")
    return "\n".join(lines) + "\n"


def purity_classification(tes_results, true_emissivities, thresholds=(0.02, 0.01)) -> dict:
    """Fraction of pixels whose valid-band MAE against truth beats each threshold."""
    n = len(tes_results)
    if n == 0:
        raise ValueError("no retrievals to classify")
    maes = []
    for res, truth in zip(tes_results, true_emissivities):
        v = res.valid
        maes.append(np.abs(res.emissivity[v] - np.asarray(truth)[v]).mean())
    maes = np.asarray(maes)
    return {float(t): float((maes < t).mean()) for t in thresholds}


def equivalent_blackbody_temperature(L_emit, tau, eps, wavelengths_um):
    """Per-band temperature from the surface-leaving radiance estimate.

    Inverts the Planck law on (L_emit / tau) / eps. On exact simulator output
    this recovers the true temperature at every band; structure only appears
    once noise enters. Returns ``(temps, valid)``; invalid bands hold NaN.
    """
    L_emit = np.asarray(L_emit, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    ratio = np.full(L_emit.shape, np.nan)
    valid = (eps > 0) & (tau >= TAU_VALID_MIN)
    np.divide(L_emit, tau * np.where(valid, eps, 1.0), out=ratio, where=valid)
    valid &= ratio > 0
    temps = np.full(L_emit.shape, np.nan)
    wl = np.asarray(wavelengths_um, dtype=np.float64)
    temps[valid] = inverse_planck(wl[valid], ratio[valid])
    return temps, valid


def ebt_noise_study(records, library, grid, noise_sigma: float = 0.003,
                    seed: int = 0):
    """Monte-Carlo blackbody-temperature spread under radiance noise.

    The noise is sized relative to the surface-leaving radiance (eps * B) and
    added to the at-sensor emitted component, which models a radiometric
    noise floor: after the division by tau, low-transmission bands amplify
    it, concentrating the temperature spread inside the absorption windows.
    (Noise that simply multiplies L_emit would cancel in the ratio and leave
    no window structure at all.)

    Returns per-band MAE over all records, per-material MAE over bands, and
    the per-band count of contributing values.
    """
    rng = np.random.default_rng(seed)
    by_id = {m.id: m for m in library}
    band_abs = np.zeros(grid.n)
    band_count = np.zeros(grid.n)
    per_material = {}
    for rec in records:
        mat = by_id[rec.material_id]
        B = planck_radiance(grid.wavelengths_um, rec.T)
        noise = noise_sigma * rng.standard_normal(grid.n) * mat.emissivity * B
        temps, valid = equivalent_blackbody_temperature(
            rec.L_emit + noise, rec.tau, mat.emissivity, grid.wavelengths_um)
        err = np.abs(temps - rec.T)
        band_abs[valid] += err[valid]
        band_count[valid] += 1
        per_material.setdefault(mat.name, []).append(float(err[valid].mean()))
    per_band_mae = np.divide(band_abs, band_count, out=np.full(grid.n, np.nan),
                             where=band_count > 0)
    per_material_mae = {name: float(np.mean(v)) for name, v in per_material.items()}
    return per_band_mae, per_material_mae, band_count
