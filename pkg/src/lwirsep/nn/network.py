"""The three-branch geometry-dependent network.

Branch I (two dense layers + sigmoid) maps the wavelength channel to the
normalized downwelling radiance; taking no geometry input makes the
downwelling prediction geometry-independent by construction. Branch II maps
each raw input (wavelength vector, range scalar, angle scalar) through its
own dense layer + LeakyReLU into a 256-wide feature row. Branch III stacks
the three rows as channels and runs a strided convolutional encoder into a
(256, 1) latent followed by a transposed-convolution decoder back to
(2, 256); a final sigmoid yields the normalized upwelling radiance and the
transmission.

Layer geometry of branch III (channels, length):

    encoder  (3,256) -> (16,248) -> (32,122) -> (64,59) -> (128,28)
             -> (256,13) -> (256,1)
    decoder  (256,1) -> (256,13) -> (128,28) -> (64,59) -> (32,122)
             -> (16,247) -> (2,256)

The published stride of 2 on the last upsampling layer cannot reach length
256 from 247 ((247-1)*2 - 2 + 12 = 502); stride 1 gives exactly 256, so
stride 1 it is. Every intermediate length is asserted at construction.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..spectral import SpectralGrid
from .layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Dense,
    LeakyReLU,
    Sigmoid,
    conv_output_length,
    conv_transpose_output_length,
)

# (c_in, c_out, kernel, stride, pad, expected output length)
ENCODER_SPEC = (
    (3, 16, 11, 1, 1, 248),
    (16, 32, 7, 2, 1, 122),
    (32, 64, 7, 2, 1, 59),
    (64, 128, 7, 2, 1, 28),
    (128, 256, 5, 2, 1, 13),
    (256, 256, 13, 1, 0, 1),
)
DECODER_SPEC = (
    (256, 256, 13, 1, 0, 13),
    (256, 128, 6, 2, 1, 28),
    (128, 64, 7, 2, 1, 59),
    (64, 32, 8, 2, 1, 122),
    (32, 16, 7, 2, 1, 247),
    (16, 2, 12, 1, 1, 256),
)

# Optional conditioning rescale for the raw scalar inputs; off by default so
# the network sees meters and degrees directly.
RANGE_SCALE = 6500.0
ANGLE_SCALE = 60.0


class HybridNetwork:
    """Parameters and forward/backward semantics of the three-branch model."""

    def __init__(self, seed: int, grid: SpectralGrid | None = None,
                 input_scale: bool = False):
        self.grid = grid or SpectralGrid.default()
        self.seed = int(seed)
        self.input_scale = bool(input_scale)
        rng = np.random.default_rng(seed)
        n = self.grid.n

        # branch I: downwelling from the wavelength channel alone
        self.down_fc1 = Dense(n, n, rng)
        self.down_act1 = LeakyReLU()
        self.down_fc2 = Dense(n, n, rng)
        self.down_out = Sigmoid()

        # branch II: per-input feature rows
        self.feat_wavelength = Dense(n, n, rng)
        self.feat_wavelength_act = LeakyReLU()
        self.feat_range = Dense(1, n, rng)
        self.feat_range_act = LeakyReLU()
        self.feat_angle = Dense(1, n, rng)
        self.feat_angle_act = LeakyReLU()

        # branch III: encoder-decoder
        self.encoder = []
        length = n
        for c_in, c_out, k, s, p, expect in ENCODER_SPEC:
            length = conv_output_length(length, k, s, p)
            assert length == expect, f"encoder length {length} != {expect}"
            self.encoder.append((Conv1d(c_in, c_out, k, s, p, rng),
                                 BatchNorm1d(c_out), LeakyReLU()))
        self.decoder = []
        for c_in, c_out, k, s, p, expect in DECODER_SPEC:
            length = conv_transpose_output_length(length, k, s, p)
            assert length == expect, f"decoder length {length} != {expect}"
            self.decoder.append((ConvTranspose1d(c_in, c_out, k, s, p, rng),
                                 BatchNorm1d(c_out), LeakyReLU()))
        # last decoder block: sigmoid output, no batch norm
        self.decoder[-1] = (self.decoder[-1][0], None, Sigmoid())
        assert length == n

    # -- parameter registry ---------------------------------------------------

    def _layer_items(self):
        yield "down_fc1", self.down_fc1
        yield "down_fc2", self.down_fc2
        yield "feat_wavelength", self.feat_wavelength
        yield "feat_range", self.feat_range
        yield "feat_angle", self.feat_angle
        for i, (conv, bn, _) in enumerate(self.encoder):
            yield f"enc{i + 1}.conv", conv
            yield f"enc{i + 1}.bn", bn
        for i, (conv, bn, _) in enumerate(self.decoder):
            yield f"dec{i + 1}.conv", conv
            if bn is not None:
                yield f"dec{i + 1}.bn", bn

    def parameters(self):
        """(name, array) pairs in fixed declaration order."""
        out = []
        for lname, layer in self._layer_items():
            for pname, arr in layer.params().items():
                out.append((f"{lname}.{pname}", arr))
        return out

    def gradients(self):
        """Accumulated gradients, same key set as :meth:`parameters`."""
        out = {}
        for lname, layer in self._layer_items():
            for pname, arr in layer.grads.items():
                out[f"{lname}.{pname}"] = arr
        return out

    def running_stats(self):
        out = []
        for lname, layer in self._layer_items():
            if isinstance(layer, BatchNorm1d):
                for sname, arr in layer.running_stats().items():
                    out.append((f"{lname}.{sname}", arr))
        return out

    def zero_grads(self):
        for _, layer in self._layer_items():
            layer.zero_grads()

    def architecture_descriptor(self) -> str:
        parts = [f"grid={self.grid.definition()}", f"input_scale={int(self.input_scale)}",
                 "fc=256-256-256", "feat=256/1/1->256"]
        parts += [f"enc{i}={spec[:5]}" for i, spec in enumerate(ENCODER_SPEC, 1)]
        parts += [f"dec{i}={spec[:5]}" for i, spec in enumerate(DECODER_SPEC, 1)]
        return ";".join(parts)

    def architecture_hash(self) -> str:
        return hashlib.sha256(self.architecture_descriptor().encode()).hexdigest()

    # -- forward / backward ---------------------------------------------------

    def _scaled_inputs(self, ranges, angles):
        ranges = np.asarray(ranges, dtype=np.float64).reshape(-1, 1)
        angles = np.asarray(angles, dtype=np.float64).reshape(-1, 1)
        if self.input_scale:
            return ranges / RANGE_SCALE, angles / ANGLE_SCALE
        return ranges, angles

    def embed_inputs(self, ranges, angles):
        """Branch II latent block, shape (batch, 3, 256).

        Channel order: wavelength, range, angle. The wavelength row is the
        same for every sample, so it is computed once and broadcast.
        """
        r, a = self._scaled_inputs(ranges, angles)
        n = r.shape[0]
        wave_row = self.grid.wavelengths_um[None, :]
        fw = self.feat_wavelength_act.forward(self.feat_wavelength.forward(wave_row))
        fr = self.feat_range_act.forward(self.feat_range.forward(r))
        fa = self.feat_angle_act.forward(self.feat_angle.forward(a))
        out = np.empty((n, 3, self.grid.n))
        out[:, 0, :] = fw
        out[:, 1, :] = fr
        out[:, 2, :] = fa
        return out

    def forward(self, ranges, angles, training: bool = False):
        """Predict (L_down_norm, L_up_norm, tau), each (batch, 256) in [0, 1]."""
        r, _ = self._scaled_inputs(ranges, angles)
        n = r.shape[0]
        wave_row = self.grid.wavelengths_um[None, :]

        h = self.down_act1.forward(self.down_fc1.forward(wave_row))
        down_row = self.down_out.forward(self.down_fc2.forward(h))
        l_down_norm = np.broadcast_to(down_row, (n, self.grid.n))

        z = self.embed_inputs(ranges, angles)
        for conv, bn, act in self.encoder:
            z = act.forward(bn.forward(conv.forward(z), training))
        for conv, bn, act in self.decoder:
            z = conv.forward(z)
            if bn is not None:
                z = bn.forward(z, training)
            z = act.forward(z)
        return l_down_norm, z[:, 0, :], z[:, 1, :]

    def backward(self, d_down, d_up, d_tau):
        """Propagate output gradients; accumulates into the layer grads.

        Returns the full gradient dict (same keys as :meth:`parameters`).
        """
        dz = np.stack([d_up, d_tau], axis=1)
        for conv, bn, act in reversed(self.decoder):
            dz = act.backward(dz)
            if bn is not None:
                dz = bn.backward(dz)
            dz = conv.backward(dz)
        for conv, bn, act in reversed(self.encoder):
            dz = conv.backward(bn.backward(act.backward(dz)))

        # wavelength row was broadcast in forward: fold the batch back first
        dw_row = dz[:, 0, :].sum(axis=0, keepdims=True)
        self.feat_wavelength.backward(self.feat_wavelength_act.backward(dw_row))
        self.feat_range.backward(self.feat_range_act.backward(dz[:, 1, :]))
        self.feat_angle.backward(self.feat_angle_act.backward(dz[:, 2, :]))

        dd_row = np.asarray(d_down).sum(axis=0, keepdims=True)
        dd = self.down_out.backward(dd_row)
        self.down_fc1.backward(self.down_act1.backward(self.down_fc2.backward(dd)))
        return self.gradients()

    # -- state access for checkpointing ----------------------------------------

    def state_arrays(self):
        """Parameters followed by batch-norm running stats, declaration order."""
        return list(self.parameters()) + self.running_stats()

    def load_state(self, flat: np.ndarray) -> None:
        """Fill parameters + running stats from one flat float64 vector."""
        pos = 0
        for _, arr in self.state_arrays():
            arr[...] = flat[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size
        if pos != flat.size:
            raise ValueError(f"state size mismatch: {flat.size} floats, expected {pos}")

    def state_vector(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.state_arrays()])


def init_params(seed: int, grid: SpectralGrid | None = None,
                input_scale: bool = False) -> HybridNetwork:
    """Fresh network with fan-in-scaled uniform weights, deterministic in seed."""
    return HybridNetwork(seed, grid, input_scale)
