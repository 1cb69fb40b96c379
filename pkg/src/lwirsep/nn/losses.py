"""The two training losses and their gradients w.r.t. the network outputs.

Both losses work in normalized space. The network emits normalized
downwelling/upwelling and raw transmission; the derived quantities are
composed in physical units,

    L_emit_hat  = eps * B(T) * tau_hat
    L_total_hat = (1 - eps) * L_down_hat * tau_hat + L_emit_hat + L_up_hat,

with L_down_hat/L_up_hat first rescaled back to radiance, and the derived
L_total_hat/L_emit_hat then re-normalized with their own global min/max
before squaring errors.

loss1 (simulated records, all components known) averages five squared-error
terms: total, downwelling, upwelling, emitted, transmission. loss2 (labeled
field pixels, only the observed total known) keeps just the total-radiance
term, which constrains the composed sum but not the individual components --
that is the ill-posedness the mixed training schedule works around.

Each term is a mean over bands; terms are averaged (divided by 5 for loss1)
and then averaged over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import NormalizationStats, denormalize, normalize
from ..records import SOURCE_SIMULATED
from ..spectral import planck_radiance


@dataclass
class RecordBatch:
    """Dense arrays for a batch of records, truth resolved via the library.

    Ground-truth component arrays are ``None`` for field-like batches.
    """

    wavelengths_um: np.ndarray  # (nb,)
    ranges_m: np.ndarray        # (n,)
    angles_deg: np.ndarray      # (n,)
    eps: np.ndarray             # (n, nb)
    T: np.ndarray               # (n,)
    tau: np.ndarray | None
    L_down: np.ndarray | None
    L_up: np.ndarray | None
    L_emit: np.ndarray | None
    L_total: np.ndarray         # (n, nb)

    @classmethod
    def from_records(cls, records, library, grid):
        """Build a batch; field-like records must be labeled (truth is read)."""
        by_id = {m.id: m for m in library}
        simulated = all(r.source == SOURCE_SIMULATED for r in records)
        stack = (lambda name: np.stack([getattr(r, name) for r in records])) if simulated else (lambda name: None)
        return cls(
            wavelengths_um=grid.wavelengths_um,
            ranges_m=np.array([r.geometry.range_m for r in records]),
            angles_deg=np.array([r.geometry.angle_deg for r in records]),
            eps=np.stack([by_id[r.material_id].emissivity for r in records]),
            T=np.array([r.T for r in records]),
            tau=stack("tau"),
            L_down=stack("L_down"),
            L_up=stack("L_up"),
            L_emit=stack("L_emit"),
            L_total=np.stack([r.L_total for r in records]),
        )

    def __len__(self):
        return self.ranges_m.size


def _compose(pred, batch, stats):
    """Derived physical and normalized quantities shared by both losses."""
    down_n, up_n, tau = pred
    L_down_hat = denormalize(down_n, stats, "L_down")
    L_up_hat = denormalize(up_n, stats, "L_up")
    B = planck_radiance(batch.wavelengths_um[None, :], batch.T[:, None])
    L_emit_hat = batch.eps * B * tau
    L_total_hat = (1.0 - batch.eps) * L_down_hat * tau + L_emit_hat + L_up_hat
    u = normalize(L_total_hat, stats, "L_total")
    v = normalize(L_emit_hat, stats, "L_emit")
    return L_down_hat, B, u, v


def loss1_with_grads(pred, batch: RecordBatch, stats: NormalizationStats):
    """Five-term simulated-data loss and its gradients w.r.t. the outputs.

    Returns ``(value, (d_down, d_up, d_tau))``.
    """
    if batch.tau is None:
        raise ValueError("loss1 needs a simulated batch with all components")
    down_n, up_n, tau = pred
    n, nb = batch.L_total.shape
    L_down_hat, B, u, v = _compose(pred, batch, stats)

    u_t = normalize(batch.L_total, stats, "L_total")
    a_t = normalize(batch.L_down, stats, "L_down")
    b_t = normalize(batch.L_up, stats, "L_up")
    v_t = normalize(batch.L_emit, stats, "L_emit")

    ru = u - u_t
    ra = down_n - a_t
    rb = up_n - b_t
    rv = v - v_t
    rt = tau - batch.tau
    value = float((ru**2 + ra**2 + rb**2 + rv**2 + rt**2).sum() / (5 * n * nb))

    scale = 2.0 / (5 * n * nb)
    lo_t, hi_t = stats.bounds("L_total")
    lo_e, hi_e = stats.bounds("L_emit")
    lo_d, hi_d = stats.bounds("L_down")
    lo_u, hi_u = stats.bounds("L_up")
    du = scale * ru / (hi_t - lo_t)      # d value / d L_total_hat (physical)
    dv = scale * rv / (hi_e - lo_e)      # d value / d L_emit_hat (physical)
    d_tau = du * ((1.0 - batch.eps) * L_down_hat + batch.eps * B) \
        + dv * batch.eps * B + scale * rt
    d_down = du * (1.0 - batch.eps) * tau * (hi_d - lo_d) + scale * ra
    d_up = du * (hi_u - lo_u) + scale * rb
    return value, (d_down, d_up, d_tau)


def loss2_with_grads(pred, batch: RecordBatch, stats: NormalizationStats):
    """Observed-total-only loss (labeled field pixels) and output gradients."""
    down_n, up_n, tau = pred
    n, nb = batch.L_total.shape
    L_down_hat, B, u, _ = _compose(pred, batch, stats)
    ru = u - normalize(batch.L_total, stats, "L_total")
    value = float((ru**2).sum() / (n * nb))

    scale = 2.0 / (n * nb)
    lo_t, hi_t = stats.bounds("L_total")
    lo_d, hi_d = stats.bounds("L_down")
    lo_u, hi_u = stats.bounds("L_up")
    du = scale * ru / (hi_t - lo_t)
    d_tau = du * ((1.0 - batch.eps) * L_down_hat + batch.eps * B)
    d_down = du * (1.0 - batch.eps) * tau * (hi_d - lo_d)
    d_up = du * (hi_u - lo_u)
    return value, (d_down, d_up, d_tau)


def loss1(pred, batch, stats) -> float:
    return loss1_with_grads(pred, batch, stats)[0]


def loss2(pred, batch, stats) -> float:
    return loss2_with_grads(pred, batch, stats)[0]


def backward(net, ranges, angles, loss_kind: str, batch: RecordBatch,
             stats: NormalizationStats):
    """Forward in training mode, apply the chosen loss, backpropagate.

    Returns ``(loss_value, gradient_dict)`` with one entry per parameter.
    """
    net.zero_grads()
    pred = net.forward(ranges, angles, training=True)
    fn = {"loss1": loss1_with_grads, "loss2": loss2_with_grads}[loss_kind]
    value, (d_down, d_up, d_tau) = fn(pred, batch, stats)
    grads = net.backward(d_down, d_up, d_tau)
    return value, grads
