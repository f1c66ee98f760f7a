"""Pulse shaping, FTN intersymbol-interference taps and the symbol-rate channel.

The transmitter shapes symbols with a unit-energy SRRC pulse at spacing
``tau * T_N``; after the matched filter and FTN-rate sampling the link
reduces to a real symmetric FIR channel (the sampled pulse autocorrelation)
plus Gaussian noise whose covariance is that same autocorrelation scaled by
``N0/2`` per real dimension.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NumericalError, ParameterError

log = logging.getLogger(__name__)

__all__ = [
    "PulseSpec",
    "IsiTaps",
    "IsiMatrix",
    "NoiseSpec",
    "srrc_value",
    "srrc_pulse",
    "pulse_times",
    "autocorr_taps",
    "default_isi_span",
    "build_isi_matrix",
    "coloring_factor",
    "draw_colored_noise",
    "apply_channel",
    "ftn_taps",
]

_SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class PulseSpec:
    """SRRC pulse parameters.

    ``span`` is the one-sided truncation in units of ``T_N``. The default
    of 10 makes the pulse autocorrelation vanish exactly beyond
    ``floor(2 * span / tau)`` FTN lags, which yields the ISI spans 33 and 28
    for ``tau`` of 0.6 and 0.7. ``oversampling`` of 40 puts every FTN lag of
    those factors on the sample grid.
    """

    beta: float = 0.5
    nyquist_symbol_time: float = 1e-6
    oversampling: int = 40
    span: int = 10

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ParameterError(f"roll-off must lie in (0, 1], got {self.beta}")
        if int(self.oversampling) != self.oversampling or self.oversampling < 16:
            raise ParameterError(f"oversampling must be an integer >= 16, got {self.oversampling}")
        if int(self.span) != self.span or self.span < 4:
            raise ParameterError(f"span must be an integer >= 4, got {self.span}")
        if not self.nyquist_symbol_time > 0:
            raise ParameterError("nyquist_symbol_time must be positive")

    @property
    def dt(self) -> float:
        return self.nyquist_symbol_time / self.oversampling


def srrc_value(t_norm, beta: float) -> np.ndarray:
    """Closed-form SRRC pulse at times ``t_norm`` (in units of T_N).

    Returns ``h(t) * sqrt(T_N)``, i.e. the pulse for ``T_N = 1``. The
    removable singularities at ``t = 0`` and ``|t| = 1/(4 beta)`` use their
    limits.
    """
    t = np.atleast_1d(np.asarray(t_norm, dtype=float))
    out = np.empty_like(t)
    at_zero = np.abs(t) < _SINGULAR_TOL
    at_edge = np.abs(np.abs(4.0 * beta * t) - 1.0) < _SINGULAR_TOL
    regular = ~(at_zero | at_edge)

    tr = t[regular]
    num = np.sin(np.pi * tr * (1.0 - beta)) + 4.0 * beta * tr * np.cos(np.pi * tr * (1.0 + beta))
    den = np.pi * tr * (1.0 - (4.0 * beta * tr) ** 2)
    out[regular] = num / den
    out[at_zero] = 1.0 - beta + 4.0 * beta / np.pi
    out[at_edge] = (beta / math.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * math.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * math.cos(np.pi / (4.0 * beta))
    )
    return out


def pulse_times(spec: PulseSpec) -> np.ndarray:
    """Sample instants (in units of T_N) matching :func:`srrc_pulse`."""
    n = spec.span * spec.oversampling
    return np.arange(-n, n + 1) / spec.oversampling


def srrc_pulse(spec: PulseSpec) -> np.ndarray:
    """Sampled SRRC pulse in physical units, renormalized to unit discrete energy.

    The returned vector satisfies ``sum(h**2) * spec.dt == 1``.
    """
    h = srrc_value(pulse_times(spec), spec.beta)
    h /= math.sqrt(np.dot(h, h) * spec.dt)
    return h


@dataclass(frozen=True, eq=False)
class IsiTaps:
    """Sampled autocorrelation ``g_{-L_I} .. g_{L_I}`` normalized to ``g_0 = 1``."""

    taps: np.ndarray
    l_i: int
    tau: float

    def __post_init__(self):
        taps = np.array(self.taps, dtype=float)
        if self.l_i < 0:
            raise ParameterError("ISI span must be non-negative")
        if taps.shape != (2 * self.l_i + 1,):
            raise ParameterError(f"expected {2 * self.l_i + 1} taps, got shape {taps.shape}")
        if not 0.0 < self.tau <= 1.0:
            raise ParameterError(f"compression factor must lie in (0, 1], got {self.tau}")
        if abs(taps[self.l_i] - 1.0) > 1e-6:
            raise ParameterError("center tap must equal 1")
        if np.max(np.abs(taps - taps[::-1])) > 1e-9:
            raise ParameterError("taps must be symmetric")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def one_sided(self) -> np.ndarray:
        """``g_0 .. g_{L_I}``."""
        return self.taps[self.l_i:]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "value"])
            for lag, value in zip(range(-self.l_i, self.l_i + 1), self.taps):
                writer.writerow([lag, repr(float(value))])

    @classmethod
    def from_csv(cls, path, tau: float) -> "IsiTaps":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        taps = np.array([float(r["value"]) for r in rows])
        return cls(taps=taps, l_i=(len(taps) - 1) // 2, tau=tau)


def default_isi_span(spec: PulseSpec, tau: float) -> int:
    """Largest lag at which the truncated pulse autocorrelation is non-zero."""
    return int(math.floor(2 * spec.span / tau + 1e-9))


def _lag_correlation(h: np.ndarray, spec: PulseSpec, lag_norm: float) -> float:
    """Discrete correlation ``sum h(t) h(t - lag) dt`` at a lag given in T_N."""
    shift = lag_norm * spec.oversampling
    k = int(round(shift))
    if abs(shift - k) < 1e-9:
        if k >= len(h):
            return 0.0
        return float(np.dot(h[k:], h[: len(h) - k]) * spec.dt)
    # off-grid lag: evaluate the shifted factor from the closed form
    t = pulse_times(spec)
    ts = t - lag_norm
    shifted = srrc_value(ts, spec.beta)
    shifted[np.abs(ts) > spec.span + _SINGULAR_TOL] = 0.0
    scale = h[len(h) // 2] / srrc_value(0.0, spec.beta)[0]
    return float(np.dot(h, shifted * scale) * spec.dt)


def autocorr_taps(pulse: np.ndarray, spec: PulseSpec, tau: float, l_i: int | None = None) -> IsiTaps:
    """FTN-rate samples of the pulse autocorrelation.

    ``l_i`` defaults to the full autocorrelation support
    (:func:`default_isi_span`). Lags beyond the pulse support give zero taps;
    a warning is logged if truncating to ``l_i`` drops more than 1e-4 of
    absolute tap mass.
    """
    if not 0.0 < tau <= 1.0:
        raise ParameterError(f"compression factor must lie in (0, 1], got {tau}")
    support = default_isi_span(spec, tau)
    if l_i is None:
        l_i = support
    if l_i < 0:
        raise ParameterError("ISI span must be non-negative")
    pulse = np.asarray(pulse, dtype=float)

    g0 = _lag_correlation(pulse, spec, 0.0)
    one_sided = np.array([_lag_correlation(pulse, spec, n * tau) for n in range(l_i + 1)]) / g0
    one_sided[0] = 1.0
    if l_i < support:
        dropped = sum(abs(_lag_correlation(pulse, spec, n * tau)) for n in range(l_i + 1, support + 1)) / g0
        if 2 * dropped > 1e-4:
            log.warning("truncating ISI taps at L_I=%d drops %.3g of tap mass", l_i, 2 * dropped)
    taps = np.concatenate([one_sided[:0:-1], one_sided])
    return IsiTaps(taps=taps, l_i=l_i, tau=tau)


def ftn_taps(tau: float, l_i: int | None = None, spec: PulseSpec | None = None) -> IsiTaps:
    """Convenience wrapper: synthesize the pulse and return its FTN taps."""
    spec = spec or PulseSpec()
    if tau == 1.0 and l_i == 0:
        return IsiTaps(taps=np.ones(1), l_i=0, tau=1.0)
    return _cached_taps(float(tau), l_i, spec)


@functools.lru_cache(maxsize=32)
def _cached_taps(tau, l_i, spec):
    return autocorr_taps(srrc_pulse(spec), spec, tau, l_i)


@dataclass(frozen=True, eq=False)
class IsiMatrix:
    """Banded symmetric Toeplitz channel matrix of a block of ``order`` symbols."""

    order: int
    entries: np.ndarray

    def zero_diagonal_count(self) -> int:
        n = self.order
        return sum(
            1 for k in range(-(n - 1), n) if not np.any(np.diagonal(self.entries, offset=k))
        )


def build_isi_matrix(taps: IsiTaps, order: int) -> IsiMatrix:
    """``G[i, j] = g_{i-j}`` for ``|i-j| <= L_I`` and zero elsewhere.

    Taps at lags ``>= order`` do not fit in the matrix and are ignored.
    """
    if order < 2:
        raise ParameterError("matrix order must be >= 2")
    col = np.zeros(order)
    k = min(taps.l_i, order - 1)
    col[: k + 1] = taps.one_sided[: k + 1]
    idx = np.arange(order)
    entries = col[np.abs(idx[:, None] - idx[None, :])]
    entries.setflags(write=False)
    return IsiMatrix(order=order, entries=entries)


@dataclass(frozen=True)
class NoiseSpec:
    """Matched-filter noise level: ``n0`` is the one-sided noise PSD."""

    n0: float

    def __post_init__(self):
        if not self.n0 >= 0:
            raise ParameterError(f"n0 must be non-negative, got {self.n0}")


_EPS_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@functools.lru_cache(maxsize=64)
def _cholesky_cached(one_sided: tuple, order: int) -> np.ndarray:
    col = np.zeros(order)
    k = min(len(one_sided), order)
    col[:k] = one_sided[:k]
    idx = np.arange(order)
    g = col[np.abs(idx[:, None] - idx[None, :])]
    if k == 1:
        factor = np.eye(order)
        factor.setflags(write=False)
        return factor
    for eps in _EPS_LADDER:
        try:
            factor = np.linalg.cholesky(g + eps * np.eye(order))
        except np.linalg.LinAlgError:
            continue
        if eps > _EPS_LADDER[0]:
            log.debug("Cholesky of G (order %d) needed eps=%g", order, eps)
        factor.setflags(write=False)
        return factor
    raise NumericalError(
        f"G of order {order} is not positive definite even with eps={_EPS_LADDER[-1]}; "
        "the ISI taps are badly conditioned (truncated too aggressively?)"
    )


def coloring_factor(taps: IsiTaps, order: int) -> np.ndarray:
    """Lower Cholesky factor of ``G + eps I`` (cached per taps and order)."""
    return _cholesky_cached(tuple(np.round(taps.one_sided, 15)), int(order))


def draw_colored_noise(noise: NoiseSpec, matrix_or_taps, rng: np.random.Generator,
                       order: int | None = None, size: int | None = None) -> np.ndarray:
    """Complex noise whose real and imaginary parts are each ``N(0, n0/2 G)``.

    ``matrix_or_taps`` is either an :class:`IsiMatrix` or :class:`IsiTaps`
    (the latter with ``order``). With ``size`` a ``(size, order)`` batch is
    returned.
    """
    if isinstance(matrix_or_taps, IsiMatrix):
        order = matrix_or_taps.order
        factor = _factor_from_matrix(matrix_or_taps)
    else:
        if order is None:
            raise ParameterError("order is required when passing taps")
        factor = coloring_factor(matrix_or_taps, order)
    shape = (order,) if size is None else (size, order)
    if noise.n0 == 0:
        return np.zeros(shape, dtype=complex)
    z = rng.standard_normal(shape + (2,))
    white = z[..., 0] + 1j * z[..., 1]
    return math.sqrt(noise.n0 / 2.0) * (white @ factor.T)


def _factor_from_matrix(matrix: IsiMatrix) -> np.ndarray:
    col = matrix.entries[:, 0]
    nz = np.nonzero(col)[0]
    last = int(nz[-1]) if len(nz) else 0
    return _cholesky_cached(tuple(np.round(col[: last + 1], 15)), matrix.order)


def apply_channel(x, taps: IsiTaps, noise: NoiseSpec | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Pass guard-padded symbols through the FTN channel.

    ``x`` holds ``L_I`` guard symbols on each side of the region whose
    outputs are returned (a :class:`~ftnlab.modem.SymbolBlock` or a 1-D/2-D
    array; 2-D input is a batch of rows). The output has
    ``len(x) - 2 L_I`` samples per row, ``y_k = sum_n x_n g_{k-n} + eta_k``.
    """
    n_guard = getattr(x, "n_guard", None)
    data = np.asarray(getattr(x, "data", x))
    if n_guard is not None and n_guard < taps.l_i:
        raise ParameterError(f"block carries {n_guard} guard symbols, channel needs {taps.l_i}")
    length = data.shape[-1]
    out_len = length - 2 * taps.l_i
    if out_len < 1:
        raise ParameterError(f"need more than {2 * taps.l_i} symbols for L_I={taps.l_i}, got {length}")

    if taps.l_i == 0:
        y = data.astype(complex, copy=True)
    else:
        windows = np.lib.stride_tricks.sliding_window_view(data, 2 * taps.l_i + 1, axis=-1)
        # y_k = sum_j x_{k+j} g_{L_I - j}; taps are symmetric but keep the orientation explicit
        y = windows @ taps.taps[::-1].astype(complex)
    if noise is not None and noise.n0 > 0:
        if rng is None:
            raise ParameterError("an RNG is required to draw noise")
        size = None if y.ndim == 1 else y.shape[0]
        y = y + draw_colored_noise(noise, taps, rng, order=out_len, size=size)
    return y
