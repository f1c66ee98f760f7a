"""Layer specifications, the sequential Model container and reference architectures."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ParameterError
from .layers import BatchNorm, Conv1D, Crop, Dense, Layer, LeakyReLU, Residual

KINDS = ("conv1d", "batchnorm", "lrelu", "dense", "residual_begin", "residual_end", "crop")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int | None = None
    width: int | None = None
    padding: str | int = "same"
    alpha: float = 0.01
    units: int | None = None
    keep: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv1d" and (not self.filters or not self.width):
            raise ParameterError("conv1d spec needs filters and width")
        if self.kind == "dense" and not self.units:
            raise ParameterError("dense spec needs units")
        if self.kind == "crop" and not self.keep:
            raise ParameterError("crop spec needs keep")

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(**d)


def conv(filters, width, padding="same"):
    return LayerSpec("conv1d", filters=filters, width=width, padding=padding)


def bn():
    return LayerSpec("batchnorm")


def lrelu(alpha=0.01):
    return LayerSpec("lrelu", alpha=alpha)


def dense(units):
    return LayerSpec("dense", units=units)


def cnn_specs(n_s=50, m=2, width=32, kernel=9, blocks=2, alpha=0.01) -> list[LayerSpec]:
    """Conv1D stem, residual blocks of two convolutions, 1x1 LLR head, spatial crop to ``n_s``."""
    specs = [conv(width, kernel), bn(), lrelu(alpha)]
    for _ in range(blocks):
        specs += [LayerSpec("residual_begin"), conv(width, kernel), bn(), lrelu(alpha),
                  conv(width, kernel), bn(), LayerSpec("residual_end"), lrelu(alpha)]
    specs += [conv(m, 1), LayerSpec("crop", keep=n_s)]
    return specs


DNN_HIDDEN = (256, 512, 256, 320)


def dnn_specs(n_out=100, hidden=DNN_HIDDEN, alpha=0.01) -> list[LayerSpec]:
    """Fully connected equalizer: four LReLU hidden layers and a linear output."""
    if len(hidden) != 4:
        raise ParameterError("the DNN benchmark has exactly 4 hidden layers")
    specs = []
    for h in hidden:
        specs += [dense(h), lrelu(alpha)]
    specs.append(dense(n_out))
    return specs


class Model:
    """Sequential network built from :class:`LayerSpec` entries.

    ``input_shape`` is ``(length, channels)`` of one example.
    """

    def __init__(self, specs, input_shape, seed=0, dtype=np.float32, meta=None):
        self.specs = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in specs]
        self.input_shape = tuple(int(v) for v in input_shape)
        self.dtype = np.dtype(dtype)
        self.meta = dict(meta or {})
        self.mode = "inference"
        rng = np.random.default_rng(seed)
        self.layers, channels, length = self._build(self.specs, self.input_shape[1], self.input_shape[0], rng)
        self.output_shape = (length, channels)

    def _build(self, specs, channels, length, rng):
        stack = [[]]
        entry = []  # (channels, length) at each open residual
        for spec in specs:
            if spec.kind == "residual_begin":
                stack.append([])
                entry.append(channels)
                continue
            if spec.kind == "residual_end":
                if len(stack) < 2:
                    raise ParameterError("residual_end without residual_begin")
                body = stack.pop()
                in_ch = entry.pop()
                proj = None
                if in_ch != channels:
                    proj = Conv1D(in_ch, channels, 1, rng=rng, dtype=self.dtype)
                stack[-1].append(Residual(body, proj))
                continue
            layer = self._make(spec, channels, rng)
            length = layer.output_length(length)
            channels = layer.out_channels or channels
            stack[-1].append(layer)
        if len(stack) != 1:
            raise ParameterError("unterminated residual_begin")
        return stack[0], channels, length

    def _make(self, spec, channels, rng) -> Layer:
        if spec.kind == "conv1d":
            return Conv1D(channels, spec.filters, spec.width, spec.padding, rng=rng, dtype=self.dtype)
        if spec.kind == "batchnorm":
            return BatchNorm(channels, dtype=self.dtype)
        if spec.kind == "lrelu":
            return LeakyReLU(spec.alpha)
        if spec.kind == "dense":
            return Dense(channels, spec.units, rng=rng, dtype=self.dtype)
        if spec.kind == "crop":
            return Crop(spec.keep)
        raise ParameterError(f"cannot build layer {spec.kind!r}")

    # -- passes ---------------------------------------------------------------

    def forward(self, x, train: bool | None = None):
        train = (self.mode == "train") if train is None else train
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ParameterError(f"model expects input (batch, {self.input_shape[0]}, {self.input_shape[1]}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    __call__ = forward

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "inference"
        return self

    # -- parameters -----------------------------------------------------------

    def _walk(self, attr):
        for i, layer in enumerate(self.layers):
            yield from getattr(layer, attr)(f"{i}.{layer.kind}.")

    def parameters(self):
        """``(name, value, grad, is_weight)`` for every trainable array."""
        for name, layer, key in self._walk("named_params"):
            yield name, layer.params[key], layer.grads[key], key == "weight"

    def param_refs(self):
        return list(self._walk("named_params"))

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer, key in self._walk("named_params"):
            out[name] = layer.params[key].copy()
        for name, layer, key in self._walk("named_buffers"):
            out[name] = layer.buffers[key].copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]):
        refs = [(n, l.params, k) for n, l, k in self._walk("named_params")]
        refs += [(n, l.buffers, k) for n, l, k in self._walk("named_buffers")]
        names = {n for n, _, _ in refs}
        if set(state) != names:
            missing, extra = names - set(state), set(state) - names
            raise ParameterError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, store, key in refs:
            value = np.asarray(state[name])
            if value.shape != store[key].shape:
                raise ParameterError(f"{name}: shape {value.shape} != {store[key].shape}")
            store[key] = value.astype(self.dtype).copy()
        self.zero_grad()

    def n_params(self) -> int:
        return sum(p.size for _, p, _, _ in self.parameters())

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        for layer in self.layers:
            layer.astype(self.dtype)
        return self

    def copy(self) -> "Model":
        return copy.deepcopy(self)

    def mac_count(self, input_length: int | None = None) -> int:
        return mac_count(self, input_length)


def mac_count(model: Model, input_length: int | None = None) -> int:
    """Multiply-accumulates of one forward pass.

    Conv1D layers count ``L * D * W * N`` with ``L`` the output length;
    dense layers count ``L * in * out``; normalization and activations are
    free.
    """
    length = model.input_shape[0] if input_length is None else input_length
    total = 0
    for layer in model.layers:
        total += layer.macs(length)
        length = layer.output_length(length)
    return total
