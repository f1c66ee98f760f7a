"""QPSK mapping, the MED soft demapper and AWGN reference curves.

LLR convention throughout ftnlab: natural log, ``ln P(b=0) / P(b=1)``, so a
positive value favors bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import ParameterError

__all__ = [
    "SymbolBlock",
    "LlrBlock",
    "qpsk_modulate",
    "qpsk_hard_demap",
    "med_demap",
    "hard_decision",
    "qfunc",
    "theoretical_qpsk_ber",
    "theoretical_bler",
]

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    """Payload symbols wrapped in CNN context padding and channel guards.

    Layout: ``guard | pad | payload | pad | guard``.
    """

    data: np.ndarray
    n_data: int
    n_pad: int = 0
    n_guard: int = 0

    def __post_init__(self):
        expected = self.n_data + 2 * (self.n_pad + self.n_guard)
        if len(self.data) != expected:
            raise ParameterError(f"block length {len(self.data)} != {expected}")

    @property
    def payload(self) -> np.ndarray:
        start = self.n_guard + self.n_pad
        return self.data[start:start + self.n_data]

    @classmethod
    def wrap(cls, payload: np.ndarray, context: np.ndarray, n_pad: int, n_guard: int) -> "SymbolBlock":
        """Surround ``payload`` with ``context`` symbols (split evenly, left half first)."""
        side = n_pad + n_guard
        if len(context) != 2 * side:
            raise ParameterError(f"need {2 * side} context symbols, got {len(context)}")
        data = np.concatenate([context[:side], payload, context[side:]])
        return cls(data=data, n_data=len(payload), n_pad=n_pad, n_guard=n_guard)


@dataclass(frozen=True, eq=False)
class LlrBlock:
    """``N_s x m`` matrix of bit LLRs; row ``i`` belongs to payload symbol ``i``."""

    llrs: np.ndarray

    def __post_init__(self):
        if self.llrs.ndim != 2:
            raise ParameterError("LLR block must be 2-D (symbols x bits)")
        if not np.all(np.isfinite(self.llrs)):
            raise ParameterError("LLRs must be finite")

    @property
    def n_symbols(self) -> int:
        return self.llrs.shape[0]

    def flat(self) -> np.ndarray:
        """LLRs in transmission bit order."""
        return self.llrs.reshape(-1)


def qpsk_modulate(bits) -> np.ndarray:
    """Gray QPSK: ``(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)``."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ParameterError("QPSK needs an even number of bits")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(float)
    return ((1.0 - 2.0 * pairs[..., 0]) + 1j * (1.0 - 2.0 * pairs[..., 1])) * _INV_SQRT2


def hard_decision(llrs) -> np.ndarray:
    """Bit decisions from LLRs; ties resolve to bit 0."""
    return (np.asarray(llrs) < 0).astype(np.uint8)


def qpsk_hard_demap(symbols) -> np.ndarray:
    y = np.asarray(symbols)
    out = np.stack([y.real < 0, y.imag < 0], axis=-1).astype(np.uint8)
    return out.reshape(y.shape[:-1] + (-1,))


def med_demap(y, n0: float) -> LlrBlock:
    """Exact per-symbol AWGN LLRs, ignoring any ISI."""
    if not n0 > 0:
        raise ParameterError(f"n0 must be positive, got {n0}")
    y = np.asarray(y).reshape(-1)
    scale = 2.0 * math.sqrt(2.0) / n0
    return LlrBlock(np.stack([scale * y.real, scale * y.imag], axis=-1))


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def theoretical_qpsk_ber(ebn0_db):
    """Gray QPSK bit error probability in AWGN, ``Q(sqrt(2 Eb/N0))``."""
    ebn0 = np.power(10.0, np.asarray(ebn0_db, dtype=float) / 10.0)
    out = qfunc(np.sqrt(2.0 * ebn0))
    return float(out) if np.ndim(out) == 0 else out


def theoretical_bler(ebn0_db=None, block_bits: int = 1, ber=None):
    """Uncoded block error probability ``1 - (1 - BER)^block_bits``.

    Pass either ``ebn0_db`` (BER from :func:`theoretical_qpsk_ber`) or
    ``ber`` directly. For coded blocks see :func:`ftnlab.coding.bitflip_bler`.
    """
    if block_bits < 1:
        raise ParameterError("block_bits must be >= 1")
    if ber is None:
        ber = theoretical_qpsk_ber(ebn0_db)
    ber = np.asarray(ber, dtype=float)
    with np.errstate(divide="ignore"):
        out = -np.expm1(block_bits * np.log1p(-ber))
    return float(out) if np.ndim(out) == 0 else out
