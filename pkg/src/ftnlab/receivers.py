"""Receivers mapping FTN-rate samples to coded-bit LLRs: MED, FDE-MMSE, DNN and CNN.

Streams follow one layout: block ``b`` of a received stream starts at
``offset + b * n_s``, and CNN/DNN windows take ``n_pad`` extra samples on
each side from the neighboring blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import IsiTaps, NoiseSpec, apply_channel, draw_colored_noise
from .errors import ParameterError
from .modem import LlrBlock, med_demap, qpsk_modulate

__all__ = [
    "CnnInput",
    "FdeConfig",
    "DnnConfig",
    "cnn_preprocess",
    "cnn_windows",
    "cnn_receive",
    "cnn_receive_stream",
    "dnn_windows",
    "dnn_receive",
    "dnn_receive_stream",
    "med_receive",
    "add_cyclic_prefix",
    "fde_equalize",
    "fde_receive",
    "circulant_spectrum",
    "BlockSampler",
    "esn0_to_n0",
]


def esn0_to_n0(esn0_db, es: float = 1.0):
    return es * np.power(10.0, -np.asarray(esn0_db, dtype=float) / 10.0)


# -- CNN --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CnnInput:
    """``L_in x 2`` real matrix (real part, imaginary part) around one payload block."""

    matrix: np.ndarray
    payload: slice

    @property
    def length(self) -> int:
        return self.matrix.shape[0]


def _window_bounds(stream_len, block_index, n_s, n_pad, offset):
    start = offset + block_index * n_s - n_pad
    stop = offset + (block_index + 1) * n_s + n_pad
    if block_index < 0 or start < 0 or stop > stream_len:
        raise ParameterError(
            f"block {block_index} needs samples [{start}, {stop}) but the stream has {stream_len}"
        )
    return start, stop


def cnn_preprocess(stream, block_index: int, n_s: int = 50, n_pad: int = 12, offset: int | None = None) -> CnnInput:
    """Cut block ``block_index`` plus ``n_pad`` neighbor samples per side and split re/im.

    ``offset`` is the stream position of block 0's first payload sample
    (default ``n_pad``).
    """
    stream = np.asarray(stream)
    offset = n_pad if offset is None else offset
    start, stop = _window_bounds(len(stream), block_index, n_s, n_pad, offset)
    y = stream[start:stop]
    return CnnInput(np.stack([y.real, y.imag], axis=-1), slice(start + n_pad, stop - n_pad))


def cnn_windows(stream, n_blocks: int, n_s: int = 50, n_pad: int = 12, offset: int | None = None) -> np.ndarray:
    """All ``n_blocks`` CNN inputs of a stream as a ``(n_blocks, L_in, 2)`` batch."""
    stream = np.asarray(stream)
    offset = n_pad if offset is None else offset
    _window_bounds(len(stream), n_blocks - 1, n_s, n_pad, offset)
    _window_bounds(len(stream), 0, n_s, n_pad, offset)
    idx = offset - n_pad + np.arange(n_blocks)[:, None] * n_s + np.arange(n_s + 2 * n_pad)[None, :]
    y = stream[idx]
    return np.stack([y.real, y.imag], axis=-1)


def cnn_receive(inp, model) -> LlrBlock | list[LlrBlock]:
    """LLRs of the payload block(s); ``inp`` is a :class:`CnnInput` or a ``(B, L_in, 2)`` batch."""
    single = isinstance(inp, CnnInput)
    batch = inp.matrix[None] if single else np.asarray(inp)
    if batch.ndim != 3 or batch.shape[1:] != tuple(model.input_shape):
        raise ParameterError(f"CNN expects inputs of shape (*, {model.input_shape[0]}, {model.input_shape[1]}), got {batch.shape}")
    out = model.forward(batch, train=False).astype(np.float64)
    blocks = [LlrBlock(o) for o in out]
    return blocks[0] if single else blocks


def cnn_receive_stream(stream, n_blocks, model, n_s=50, n_pad=12, offset=None) -> np.ndarray:
    """LLRs of consecutive blocks, concatenated as ``(n_blocks * n_s, m)``."""
    x = cnn_windows(stream, n_blocks, n_s, n_pad, offset)
    out = model.forward(x, train=False).astype(np.float64)
    return out.reshape(n_blocks * n_s, -1)


# -- DNN --------------------------------------------------------------------

@dataclass(frozen=True)
class DnnConfig:
    input_symbols: int = 74
    output_symbols: int = 50
    hidden: tuple[int, int, int, int] = (256, 512, 256, 320)
    alpha: float = 0.01

    def __post_init__(self):
        if len(self.hidden) != 4:
            raise ParameterError("the DNN benchmark has exactly 4 hidden layers")
        if (self.input_symbols - self.output_symbols) % 2:
            raise ParameterError("input and output windows must differ by an even count")

    @property
    def n_pad(self) -> int:
        return (self.input_symbols - self.output_symbols) // 2


def dnn_windows(stream, n_blocks, n_s=50, n_pad=12, offset=None) -> np.ndarray:
    """``(n_blocks, 1, 2 L_in)`` inputs: real parts of the window, then imaginary parts."""
    w = cnn_windows(stream, n_blocks, n_s, n_pad, offset)
    return np.concatenate([w[..., 0], w[..., 1]], axis=-1)[:, None, :]


def _dnn_symbols(out):
    half = out.shape[-1] // 2
    return out[..., :half] + 1j * out[..., half:]


def dnn_receive(window, model, n0: float) -> LlrBlock:
    """Equalize one ``(1, 2 L_in)`` window with the DNN and MED-demap the result."""
    x = np.asarray(window)[None] if np.ndim(window) == 2 else np.asarray(window)
    out = model.forward(x, train=False).astype(np.float64)
    return med_demap(_dnn_symbols(out[0, 0]), n0)


def dnn_receive_stream(stream, n_blocks, model, n0, n_s=50, n_pad=12, offset=None) -> np.ndarray:
    x = dnn_windows(stream, n_blocks, n_s, n_pad, offset)
    out = model.forward(x, train=False).astype(np.float64)
    return med_demap(_dnn_symbols(out[:, 0, :]).reshape(-1), n0).llrs


# -- MED --------------------------------------------------------------------

def med_receive(payload, n0: float) -> LlrBlock:
    """Symbol-by-symbol AWGN demapping of the payload, ISI ignored."""
    return med_demap(payload, n0)


# -- FDE --------------------------------------------------------------------

@dataclass(frozen=True)
class FdeConfig:
    nu: int

    def __post_init__(self):
        if self.nu < 0:
            raise ParameterError("nu must be non-negative")

    @property
    def cp_len(self) -> int:
        return 2 * self.nu

    def gamma(self, n_s: int) -> float:
        return n_s / (n_s + self.cp_len)


def add_cyclic_prefix(x, nu: int) -> np.ndarray:
    """``[x[-nu:], x, x[:nu]]`` along the last axis: a two-sided cyclic extension of ``2 nu`` symbols."""
    x = np.asarray(x)
    if nu == 0:
        return x.copy()
    if nu > x.shape[-1]:
        raise ParameterError("cyclic extension longer than the block")
    return np.concatenate([x[..., -nu:], x, x[..., :nu]], axis=-1)


def circulant_spectrum(taps: IsiTaps, n: int) -> np.ndarray:
    """DFT of the taps wrapped onto ``n`` points (real for symmetric taps)."""
    h = np.zeros(n)
    for lag, g in zip(range(-taps.l_i, taps.l_i + 1), taps.taps):
        h[lag % n] += g
    return np.fft.fft(h).real


def fde_equalize(y, taps: IsiTaps, n0: float, cfg: FdeConfig, es: float = 1.0):
    """MMSE equalization of CP-stripped block(s) ``y`` (last axis has ``n_s`` samples).

    Returns ``(equalized symbols, effective noise variance per symbol)``.
    """
    if cfg.nu < taps.l_i:
        raise ParameterError(f"cyclic extension nu={cfg.nu} shorter than ISI span {taps.l_i}")
    y = np.asarray(y)
    n = y.shape[-1]
    lam = np.maximum(circulant_spectrum(taps, n), 0.0)
    denom = lam * lam + (n0 / es) * lam
    tiny = 1e-12 * max(1.0, float(lam.max()))
    w = np.where(denom > tiny * tiny, lam / np.where(denom > tiny * tiny, denom, 1.0), 0.0)
    z = np.fft.ifft(np.fft.fft(y, axis=-1) * w, axis=-1)
    resid = es * np.abs(1.0 - w * lam) ** 2 + n0 * lam * np.abs(w) ** 2
    return z, float(resid.mean())


def fde_receive(y_block, taps: IsiTaps, n0: float, cfg: FdeConfig, es: float = 1.0) -> LlrBlock:
    """Equalize one CP-stripped block and demap with the post-equalization noise variance."""
    z, n_eff = fde_equalize(y_block, taps, n0, cfg, es)
    return med_demap(z, max(n_eff, 1e-300))


# -- training data ----------------------------------------------------------

class BlockSampler:
    """Synthetic training batches following the FTN block model.

    Each example is an independent window of ``L_in = n_s + 2 n_pad``
    received samples whose transmitted symbols extend ``L_I`` further on
    both sides, so every sample sees two-sided ISI. Es/N0 is drawn
    uniformly in dB per example.
    """

    def __init__(self, taps: IsiTaps, n_s=50, n_pad=12, esn0_range_db=(0.0, 12.0), m=2):
        if m != 2:
            raise ParameterError("only QPSK (m=2) is supported")
        self.taps, self.n_s, self.n_pad, self.m = taps, n_s, n_pad, m
        self.esn0_range_db = tuple(esn0_range_db)
        self.l_in = n_s + 2 * n_pad

    def draw(self, batch, rng):
        """``(received (B, L_in) complex, payload bits (B, n_s, m), symbols (B, L_in + 2 L_I))``."""
        total = self.l_in + 2 * self.taps.l_i
        bits = rng.integers(0, 2, size=(batch, total * self.m), dtype=np.uint8)
        x = qpsk_modulate(bits)
        y = apply_channel(x, self.taps)
        lo, hi = self.esn0_range_db
        n0 = esn0_to_n0(rng.uniform(lo, hi, size=batch))
        unit = draw_colored_noise(NoiseSpec(2.0), self.taps, rng, order=self.l_in, size=batch)
        y = y + np.sqrt(n0 / 2.0)[:, None] * unit
        first = (self.taps.l_i + self.n_pad) * self.m
        payload_bits = bits[:, first:first + self.n_s * self.m].reshape(batch, self.n_s, self.m)
        return y, payload_bits, x

    def cnn_batch(self, batch, rng):
        y, bits, _ = self.draw(batch, rng)
        return np.stack([y.real, y.imag], axis=-1).astype(np.float32), bits

    def dnn_batch(self, batch, rng):
        y, _, x = self.draw(batch, rng)
        inputs = np.concatenate([y.real, y.imag], axis=-1)[:, None, :].astype(np.float32)
        start = self.taps.l_i + self.n_pad
        sym = x[:, start:start + self.n_s]
        targets = np.concatenate([sym.real, sym.imag], axis=-1)[:, None, :].astype(np.float32)
        return inputs, targets
