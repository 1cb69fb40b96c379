import numpy as np
import pytest

from lwirsep.data import NormalizationStats, denormalize, normalize
from lwirsep.nn.losses import (
    RecordBatch,
    backward,
    loss1,
    loss1_with_grads,
    loss2,
    loss2_with_grads,
)
from lwirsep.nn.network import HybridNetwork
from lwirsep.spectral import planck_radiance

# Two-band miniature: all quantities hand-set, expected losses evaluated by
# an independent transliteration of the loss definition and frozen here.
MINI_STATS = NormalizationStats(
    L_total=(1.0e-4, 1.4e-3),
    L_down=(2.0e-4, 1.0e-3),
    L_up=(1.5e-4, 7.0e-4),
    L_emit=(3.0e-4, 1.2e-3),
)
MINI_LOSS1 = 0.003455026722513011
MINI_LOSS2 = 0.0014697682253062385


def miniature_batch():
    wl = np.array([9.0, 11.0])
    eps = np.array([[0.9, 0.8]])
    T = np.array([300.0])
    B = planck_radiance(wl[None, :], T[:, None])
    tau_t = np.array([[0.8, 0.7]])
    ldown_t = np.array([[4.0e-4, 5.0e-4]])
    lup_t = np.array([[2.0e-4, 3.0e-4]])
    lemit_t = eps * B * tau_t
    ltot_t = (1 - eps) * ldown_t * tau_t + lemit_t + lup_t
    return RecordBatch(wl, np.array([5000.0]), np.array([45.0]), eps, T,
                       tau_t, ldown_t, lup_t, lemit_t, ltot_t)


def miniature_pred():
    return (np.array([[0.3, 0.45]]), np.array([[0.2, 0.35]]), np.array([[0.75, 0.72]]))


def perfect_pred(batch, stats):
    return (normalize(batch.L_down, stats, "L_down"),
            normalize(batch.L_up, stats, "L_up"),
            batch.tau.copy())


class TestLoss1:
    def test_miniature_matches_oracle(self):
        value = loss1(miniature_pred(), miniature_batch(), MINI_STATS)
        assert value == pytest.approx(MINI_LOSS1, rel=1e-12)

    def test_zero_at_ground_truth(self):
        batch = miniature_batch()
        assert loss1(perfect_pred(batch, MINI_STATS), batch, MINI_STATS) == 0.0

    def test_quadratic_in_single_band_tau_error(self):
        batch = miniature_batch()
        values = []
        for delta in (1e-2, 1e-3, 1e-4):
            down, up, tau = perfect_pred(batch, MINI_STATS)
            tau[0, 0] += delta
            values.append(loss1((down, up, tau), batch, MINI_STATS))
        assert values[0] > 0
        # quadratic decay: shrinking delta 10x shrinks the loss 100x
        assert values[1] == pytest.approx(values[0] / 100, rel=1e-2)
        assert values[2] == pytest.approx(values[1] / 100, rel=1e-2)

    def test_rejects_field_batch(self):
        batch = miniature_batch()
        batch.tau = None
        with pytest.raises(ValueError):
            loss1(miniature_pred(), batch, MINI_STATS)

    def test_gradient_matches_finite_difference(self):
        batch = miniature_batch()
        pred = miniature_pred()
        _, (d_down, d_up, d_tau) = loss1_with_grads(pred, batch, MINI_STATS)
        h = 1e-7
        for arr, grad in zip(pred, (d_down, d_up, d_tau)):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                lp = loss1(pred, batch, MINI_STATS)
                arr[idx] = orig - h
                lm = loss1(pred, batch, MINI_STATS)
                arr[idx] = orig
                assert grad[idx] == pytest.approx((lp - lm) / (2 * h), rel=1e-6, abs=1e-12)


class TestLoss2:
    def test_miniature_matches_oracle(self):
        value = loss2(miniature_pred(), miniature_batch(), MINI_STATS)
        assert value == pytest.approx(MINI_LOSS2, rel=1e-12)

    def test_zero_at_exact_prediction(self):
        batch = miniature_batch()
        assert loss2(perfect_pred(batch, MINI_STATS), batch, MINI_STATS) == 0.0

    def test_blind_to_compensating_component_errors(self):
        """Two different component triples composing to the same total give
        the same loss2: the ill-posedness, stated as arithmetic."""
        batch = miniature_batch()
        stats = MINI_STATS
        down_n, up_n, tau = perfect_pred(batch, stats)
        # perturb tau, then absorb the total-radiance change into L_up
        tau2 = tau + 0.05
        B = planck_radiance(batch.wavelengths_um[None, :], batch.T[:, None])
        ldown = denormalize(down_n, stats, "L_down")
        total = (1 - batch.eps) * ldown * tau + batch.eps * B * tau \
            + denormalize(up_n, stats, "L_up")
        lup2 = total - (1 - batch.eps) * ldown * tau2 - batch.eps * B * tau2
        up2_n = normalize(lup2, stats, "L_up")
        a = loss2((down_n, up_n, tau), batch, stats)
        b = loss2((down_n, up2_n, tau2), batch, stats)
        assert a == pytest.approx(0.0, abs=1e-28)
        assert b == pytest.approx(a, abs=1e-24)

    def test_gradient_matches_finite_difference(self):
        batch = miniature_batch()
        pred = miniature_pred()
        _, grads = loss2_with_grads(pred, batch, MINI_STATS)
        h = 1e-7
        for arr, grad in zip(pred, grads):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                lp = loss2(pred, batch, MINI_STATS)
                arr[idx] = orig - h
                lm = loss2(pred, batch, MINI_STATS)
                arr[idx] = orig
                assert grad[idx] == pytest.approx((lp - lm) / (2 * h), rel=1e-6, abs=1e-12)


class TestBackward:
    def _consistent_batch(self, net, library, grid):
        """A batch whose ground truth equals the network's own predictions."""
        from lwirsep.data import NormalizationStats

        stats = NormalizationStats.reference()
        ranges = np.array([5000.0, 4200.0])
        angles = np.array([45.0, 33.0])
        down_n, up_n, tau = net.forward(ranges, angles, training=True)
        eps = np.stack([library[0].emissivity, library[3].emissivity])
        T = np.array([300.0, 310.0])
        B = planck_radiance(grid.wavelengths_um[None, :], T[:, None])
        ldown = denormalize(down_n, stats, "L_down")
        lup = denormalize(up_n, stats, "L_up")
        lemit = eps * B * tau
        ltot = (1 - eps) * ldown * tau + lemit + lup
        batch = RecordBatch(grid.wavelengths_um, ranges, angles, eps, T,
                            tau.copy(), ldown, lup, lemit, ltot)
        return batch, stats

    def test_zero_loss_gives_zero_gradient(self, library, grid):
        net = HybridNetwork(seed=9)
        batch, stats = self._consistent_batch(net, library, grid)
        value, grads = backward(net, batch.ranges_m, batch.angles_deg, "loss1", batch, stats)
        # the normalize/denormalize round trip leaves ~1e-16 residuals
        assert value < 1e-30
        total = sum(float(np.abs(g).sum()) for g in grads.values())
        assert total <= 1e-12

    def test_loss2_reaches_branch_one(self, library, grid):
        net = HybridNetwork(seed=10)
        batch, stats = self._consistent_batch(net, library, grid)
        batch.L_total = batch.L_total * 1.01  # break the fit
        _, grads = backward(net, batch.ranges_m, batch.angles_deg, "loss2", batch, stats)
        assert np.any(grads["down_fc1.W"] != 0)
        assert np.any(grads["down_fc2.b"] != 0)

    def test_gradients_accumulate_from_zero(self, library, grid):
        net = HybridNetwork(seed=11)
        batch, stats = self._consistent_batch(net, library, grid)
        batch.L_total = batch.L_total * 1.01
        _, g1 = backward(net, batch.ranges_m, batch.angles_deg, "loss1", batch, stats)
        snapshot = {k: v.copy() for k, v in g1.items()}
        _, g2 = backward(net, batch.ranges_m, batch.angles_deg, "loss1", batch, stats)
        for k in snapshot:
            assert np.array_equal(snapshot[k], g2[k])
