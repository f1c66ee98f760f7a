"""Layers of the numpy network engine.

Tensors are laid out ``(batch, length, channels)``. Every layer caches what
its backward pass needs during ``forward`` and accumulates parameter
gradients into ``self.grads`` on ``backward``.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ParameterError


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.out_channels: int | None = None

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_length(self, length: int) -> int:
        return length

    def macs(self, length: int) -> int:
        return 0

    def zero_grad(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def named_params(self, prefix=""):
        for name, p in self.params.items():
            yield prefix + name, self, name

    def named_buffers(self, prefix=""):
        for name in self.buffers:
            yield prefix + name, self, name

    def astype(self, dtype):
        for d in (self.params, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)
        self.zero_grad()


def _uniform(rng, shape, fan_in, dtype, fan_out=None):
    # He uniform; Glorot uniform when fan_out is given
    bound = math.sqrt(6.0 / fan_in) if fan_out is None else math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1D(Layer):
    """Cross-correlation along the length axis; weight shape ``(filters, in_channels, width)``."""

    kind = "conv1d"

    def __init__(self, in_channels, filters, width, padding="same", rng=None, dtype=np.float32):
        super().__init__()
        if width < 1 or filters < 1:
            raise ParameterError("conv1d needs width >= 1 and filters >= 1")
        self.in_channels, self.filters, self.width = in_channels, filters, width
        if padding == "same":
            self.pad = ((width - 1) // 2, width - 1 - (width - 1) // 2)
        else:
            p = int(padding)
            if p < 0:
                raise ParameterError("explicit padding must be >= 0")
            self.pad = (p, p)
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        self.params["weight"] = _uniform(rng, (filters, in_channels, width), in_channels * width, dtype)
        self.params["bias"] = np.zeros(filters, dtype=dtype)
        self.out_channels = filters
        self.zero_grad()

    def output_length(self, length):
        return length + sum(self.pad) - self.width + 1

    def macs(self, length):
        return self.output_length(length) * self.in_channels * self.width * self.filters

    def _weight_matrix(self):
        # (N, D, W) -> (D*W, N), matching the (D, W) window layout
        return self.params["weight"].transpose(1, 2, 0).reshape(self.in_channels * self.width, self.filters)

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ParameterError(f"conv1d expects (batch, length, {self.in_channels}), got {x.shape}")
        b, length, _ = x.shape
        xp = np.pad(x, ((0, 0), self.pad, (0, 0)))
        out_len = self.output_length(length)
        if out_len < 1:
            raise ParameterError("input shorter than the filter")
        win = sliding_window_view(xp, self.width, axis=1)  # (B, Lout, D, W)
        cols = win.reshape(b * out_len, self.in_channels * self.width)
        self._cache = (cols, xp.shape)
        out = cols @ self._weight_matrix() + self.params["bias"]
        return out.reshape(b, out_len, self.filters)

    def backward(self, grad):
        cols, padded_shape = self._cache
        b, out_len, _ = grad.shape
        g2 = grad.reshape(b * out_len, self.filters)
        gw = cols.T @ g2
        self.grads["weight"] += gw.reshape(self.in_channels, self.width, self.filters).transpose(2, 0, 1)
        self.grads["bias"] += g2.sum(axis=0)
        gcols = (g2 @ self._weight_matrix().T).reshape(b, out_len, self.in_channels, self.width)
        gxp = np.zeros(padded_shape, dtype=grad.dtype)
        for w in range(self.width):
            gxp[:, w:w + out_len, :] += gcols[..., w]
        left, right = self.pad
        return gxp[:, left:padded_shape[1] - right, :]


class BatchNorm(Layer):
    """Per-channel normalization over (batch, length)."""

    kind = "batchnorm"

    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)
        self.out_channels = channels
        self.zero_grad()

    def forward(self, x, train=False):
        gamma, beta = self.params["gamma"], self.params["beta"]
        if not train:
            inv_std = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            xhat = (x - self.buffers["running_mean"]) * inv_std
            self._cache = ("eval", xhat, inv_std)
            return xhat * gamma + beta
        if x.shape[0] < 2:
            raise ParameterError("batch normalization in train mode needs batch >= 2")
        count = x.shape[0] * x.shape[1]
        mean = x.mean(axis=(0, 1))
        centered = x - mean
        var = (centered * centered).mean(axis=(0, 1))
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = centered * inv_std
        mom = self.momentum
        self.buffers["running_mean"] = ((1 - mom) * self.buffers["running_mean"] + mom * mean).astype(x.dtype)
        unbiased = var * count / max(count - 1, 1)
        self.buffers["running_var"] = ((1 - mom) * self.buffers["running_var"] + mom * unbiased).astype(x.dtype)
        self._cache = ("train", xhat, inv_std)
        return xhat * gamma + beta

    def backward(self, grad):
        gamma = self.params["gamma"]
        mode, xhat, inv_std = self._cache
        if mode == "eval":
            # running stats are constants here
            self.grads["gamma"] += (grad * xhat).sum(axis=(0, 1))
            self.grads["beta"] += grad.sum(axis=(0, 1))
            return grad * (gamma * inv_std)
        count = grad.shape[0] * grad.shape[1]
        self.grads["gamma"] += (grad * xhat).sum(axis=(0, 1))
        self.grads["beta"] += grad.sum(axis=(0, 1))
        dxhat = grad * gamma
        sum_d = dxhat.sum(axis=(0, 1))
        sum_dx = (dxhat * xhat).sum(axis=(0, 1))
        return (inv_std / count) * (count * dxhat - sum_d - xhat * sum_dx)


class LeakyReLU(Layer):
    kind = "lrelu"

    def __init__(self, alpha=0.01):
        super().__init__()
        self.alpha = alpha

    def forward(self, x, train=False):
        self._mask = x >= 0
        return np.where(self._mask, x, self.alpha * x)

    def backward(self, grad):
        return np.where(self._mask, grad, self.alpha * grad)


class Dense(Layer):
    """Affine map on the channel axis; weight shape ``(in_features, units)``."""

    kind = "dense"

    def __init__(self, in_features, units, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_features, self.units = in_features, units
        self.params["weight"] = _uniform(rng, (in_features, units), in_features, dtype, fan_out=units)
        self.params["bias"] = np.zeros(units, dtype=dtype)
        self.out_channels = units
        self.zero_grad()

    def macs(self, length):
        return length * self.in_features * self.units

    def forward(self, x, train=False):
        if x.shape[-1] != self.in_features:
            raise ParameterError(f"dense expects {self.in_features} input features, got {x.shape[-1]}")
        self._x = x
        return x @ self.params["weight"] + self.params["bias"]

    def backward(self, grad):
        x = self._x
        self.grads["weight"] += x.reshape(-1, self.in_features).T @ grad.reshape(-1, self.units)
        self.grads["bias"] += grad.reshape(-1, self.units).sum(axis=0)
        return grad @ self.params["weight"].T


class Crop(Layer):
    """Keep the central ``keep`` positions of the length axis."""

    kind = "crop"

    def __init__(self, keep):
        super().__init__()
        self.keep = keep

    def output_length(self, length):
        if length < self.keep:
            raise ParameterError(f"cannot crop length {length} to {self.keep}")
        return self.keep

    def forward(self, x, train=False):
        length = x.shape[1]
        self.output_length(length)
        start = (length - self.keep) // 2
        self._ctx = (length, start)
        return x[:, start:start + self.keep, :]

    def backward(self, grad):
        length, start = self._ctx
        out = np.zeros((grad.shape[0], length, grad.shape[2]), dtype=grad.dtype)
        out[:, start:start + self.keep, :] = grad
        return out


class Residual(Layer):
    """``body(x) + shortcut(x)``; the shortcut is the identity or a 1x1 projection."""

    kind = "residual"

    def __init__(self, body: list[Layer], projection: Conv1D | None = None):
        super().__init__()
        self.body = body
        self.projection = projection
        self.out_channels = body[-1].out_channels if body else None

    def output_length(self, length):
        for layer in self.body:
            length = layer.output_length(length)
        return length

    def macs(self, length):
        total = 0
        cur = length
        for layer in self.body:
            total += layer.macs(cur)
            cur = layer.output_length(cur)
        if self.projection is not None:
            total += self.projection.macs(length)
        return total

    def forward(self, x, train=False):
        out = x
        for layer in self.body:
            out = layer.forward(out, train)
        short = x if self.projection is None else self.projection.forward(x, train)
        if out.shape != short.shape:
            raise ParameterError(f"residual branch shape {out.shape} != shortcut shape {short.shape}")
        return out + short

    def backward(self, grad):
        g = grad
        for layer in reversed(self.body):
            g = layer.backward(g)
        short = grad if self.projection is None else self.projection.backward(grad)
        return g + short

    def children(self):
        out = list(self.body)
        if self.projection is not None:
            out.append(self.projection)
        return out

    def zero_grad(self):
        for c in self.children():
            c.zero_grad()

    def named_params(self, prefix=""):
        for i, c in enumerate(self.body):
            yield from c.named_params(f"{prefix}body.{i}.")
        if self.projection is not None:
            yield from self.projection.named_params(f"{prefix}projection.")

    def named_buffers(self, prefix=""):
        for i, c in enumerate(self.body):
            yield from c.named_buffers(f"{prefix}body.{i}.")
        if self.projection is not None:
            yield from self.projection.named_buffers(f"{prefix}projection.")

    def astype(self, dtype):
        for c in self.children():
            c.astype(dtype)


def residual_add(block_input, block_output):
    """Identity skip connection; shapes must match."""
    if np.shape(block_input) != np.shape(block_output):
        raise ParameterError(f"cannot add shapes {np.shape(block_input)} and {np.shape(block_output)}")
    return np.asarray(block_input) + np.asarray(block_output)
