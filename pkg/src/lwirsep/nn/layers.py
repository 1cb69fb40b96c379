"""Minimal float64 layers with hand-written forward/backward passes.

Only the layer types the hybrid network needs: dense, strided 1-d
convolution, transposed 1-d convolution, batch norm over (batch, length),
LeakyReLU and sigmoid. Each layer caches what its backward pass needs;
``backward`` consumes the upstream gradient and both accumulates parameter
gradients in ``grads`` and returns the gradient w.r.t. its input.

Convolutions are lowered to matrix products: the forward pass gathers strided
windows (im2col) and multiplies by the flattened kernel; backward scatters
through the same index structure. Everything is double precision so analytic
gradients match central finite differences to ~1e-8 relative.

Weights start from a fan-in-scaled uniform distribution with bound
1/sqrt(fan_in); the unnormalized wavelength input (values around 10) would
saturate the downwelling branch's sigmoid under a wider bound.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    """Base: parameterless unless ``params`` is overridden."""

    def params(self) -> dict:
        return {}

    @property
    def grads(self) -> dict:
        return getattr(self, "_grads", {})

    def zero_grads(self):
        for g in self.grads.values():
            g[...] = 0.0

    def forward(self, x, training: bool = False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


def conv_output_length(l_in: int, kernel: int, stride: int, pad: int) -> int:
    return (l_in + 2 * pad - kernel) // stride + 1


def conv_transpose_output_length(l_in: int, kernel: int, stride: int, pad: int) -> int:
    return (l_in - 1) * stride - 2 * pad + kernel


class Dense(Layer):
    """y = x @ W.T + b with x of shape (batch, n_in)."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.n_in, self.n_out = n_in, n_out
        bound = 1.0 / np.sqrt(n_in)
        self.W = rng.uniform(-bound, bound, size=(n_out, n_in))
        self.b = np.zeros(n_out)
        self._grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, x, training=False):
        self._x = x
        return x @ self.W.T + self.b

    def backward(self, dy):
        self._grads["W"] += dy.T @ self._x
        self._grads["b"] += dy.sum(axis=0)
        return dy @ self.W


class Conv1d(Layer):
    """Strided 1-d convolution over (batch, channels, length)."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: int,
                 rng: np.random.Generator):
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.pad = kernel, stride, pad
        bound = 1.0 / np.sqrt(c_in * kernel)
        self.W = rng.uniform(-bound, bound, size=(c_out, c_in, kernel))
        self.b = np.zeros(c_out)
        self._grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, x, training=False):
        n, c, l_in = x.shape
        l_out = conv_output_length(l_in, self.kernel, self.stride, self.pad)
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad))) if self.pad else x
        win = sliding_window_view(xp, self.kernel, axis=2)[:, :, ::self.stride]
        # (n, c_in, l_out, k) -> (n * l_out, c_in * k)
        cols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(n * l_out, c * self.kernel)
        y = cols @ self.W.reshape(self.c_out, -1).T
        self._cols, self._in_shape = cols, x.shape
        return y.reshape(n, l_out, self.c_out).transpose(0, 2, 1) + self.b[None, :, None]

    def backward(self, dy):
        n, _, l_out = dy.shape
        _, c, l_in = self._in_shape
        dyt = np.ascontiguousarray(dy.transpose(0, 2, 1)).reshape(n * l_out, self.c_out)
        self._grads["W"] += (dyt.T @ self._cols).reshape(self.W.shape)
        self._grads["b"] += dy.sum(axis=(0, 2))
        dcols = (dyt @ self.W.reshape(self.c_out, -1)).reshape(n, l_out, c, self.kernel)
        dwin = dcols.transpose(0, 2, 1, 3)  # (n, c_in, l_out, k)
        dxp = np.zeros((n, c, l_in + 2 * self.pad))
        for k in range(self.kernel):
            dxp[:, :, k:k + self.stride * l_out:self.stride] += dwin[:, :, :, k]
        return dxp[:, :, self.pad:self.pad + l_in] if self.pad else dxp


class ConvTranspose1d(Layer):
    """Transposed 1-d convolution (fractionally strided upsampling).

    Weight layout (c_in, c_out, k); output position ``l*stride + k - pad``
    accumulates ``x[:, c, l] * W[c, o, k]``.
    """

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: int,
                 rng: np.random.Generator):
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.pad = kernel, stride, pad
        bound = 1.0 / np.sqrt(c_in * kernel)
        self.W = rng.uniform(-bound, bound, size=(c_in, c_out, kernel))
        self.b = np.zeros(c_out)
        self._grads = {"W": np.zeros_like(self.W), "b": np.zeros_like(self.b)}

    def params(self):
        return {"W": self.W, "b": self.b}

    def forward(self, x, training=False):
        n, c, l_in = x.shape
        l_out = conv_transpose_output_length(l_in, self.kernel, self.stride, self.pad)
        l_full = (l_in - 1) * self.stride + self.kernel
        xt = np.ascontiguousarray(x.transpose(0, 2, 1)).reshape(n * l_in, c)
        t = (xt @ self.W.reshape(c, -1)).reshape(n, l_in, self.c_out, self.kernel)
        t = t.transpose(0, 2, 3, 1)  # (n, c_out, k, l_in)
        full = np.zeros((n, self.c_out, l_full))
        span = self.stride * (l_in - 1) + 1
        for k in range(self.kernel):
            full[:, :, k:k + span:self.stride] += t[:, :, k, :]
        self._x = x
        return full[:, :, self.pad:self.pad + l_out] + self.b[None, :, None]

    def backward(self, dy):
        x = self._x
        n, c, l_in = x.shape
        l_full = (l_in - 1) * self.stride + self.kernel
        dfull = np.zeros((n, self.c_out, l_full))
        dfull[:, :, self.pad:self.pad + dy.shape[2]] = dy
        win = sliding_window_view(dfull, self.kernel, axis=2)[:, :, ::self.stride]
        # (n, c_out, l_in, k) -> (n * l_in, c_out * k)
        wcols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(n * l_in, -1)
        wflat = self.W.reshape(c, -1)  # (c_in, c_out * k)
        xt = np.ascontiguousarray(x.transpose(0, 2, 1)).reshape(n * l_in, c)
        self._grads["W"] += (xt.T @ wcols).reshape(self.W.shape)
        self._grads["b"] += dy.sum(axis=(0, 2))
        return (wcols @ wflat.T).reshape(n, l_in, c).transpose(0, 2, 1)


class BatchNorm1d(Layer):
    """Per-channel batch norm over (batch, channels, length).

    Training mode normalizes with batch statistics (biased variance) and
    updates the running mean/variance with the configured momentum; inference
    mode uses the running statistics, so outputs are batch-size independent.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1):
        self.channels = channels
        self.eps, self.momentum = eps, momentum
        self.gamma = np.ones(channels)
        self.beta = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._grads = {"gamma": np.zeros_like(self.gamma), "beta": np.zeros_like(self.beta)}

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def running_stats(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training=False):
        if training:
            mean = x.mean(axis=(0, 2))
            xhat = x - mean[None, :, None]
            var = np.einsum("ncl,ncl->c", xhat, xhat) / (x.shape[0] * x.shape[2])
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (var - self.running_var)
        else:
            var = self.running_var
            xhat = x - self.running_mean[None, :, None]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat *= inv_std[None, :, None]
        self._xhat, self._inv_std, self._training = xhat, inv_std, training
        y = xhat * self.gamma[None, :, None]
        y += self.beta[None, :, None]
        return y

    def backward(self, dy):
        xhat, inv_std = self._xhat, self._inv_std
        dgamma = np.einsum("ncl,ncl->c", dy, xhat)
        self._grads["gamma"] += dgamma
        self._grads["beta"] += dy.sum(axis=(0, 2))
        if not self._training:
            return dy * (self.gamma * inv_std)[None, :, None]
        m = dy.shape[0] * dy.shape[2]
        # dx = (inv_std * gamma / m) * (m*dy - sum(dy) - xhat * sum(dy*xhat))
        dx = dy - (dy.sum(axis=(0, 2)) / m)[None, :, None]
        dx -= xhat * (dgamma / m)[None, :, None]
        dx *= (self.gamma * inv_std)[None, :, None]
        return dx


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.01):
        self.slope = slope

    def forward(self, x, training=False):
        self._factor = np.where(x > 0, 1.0, self.slope)
        return x * self._factor

    def backward(self, dy):
        return dy * self._factor


class Sigmoid(Layer):
    def forward(self, x, training=False):
        self._y = 1.0 / (1.0 + np.exp(-x))
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)
