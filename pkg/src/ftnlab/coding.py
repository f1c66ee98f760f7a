"""Bit source, LDPC codes (alist I/O, systematic encoding, min-sum decoding) and interleaving."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import FormatError, ParameterError

__all__ = [
    "LdpcCode",
    "Interleaver",
    "DecodeResult",
    "generate_bits",
    "read_alist",
    "write_alist",
    "load_code",
    "ldpc_encode",
    "ldpc_decode",
    "ldpc_decode_batch",
    "interleave",
    "deinterleave",
    "bitflip_bler",
    "SHIPPED_RATES",
]

SHIPPED_RATES = {"1/2": "qc_n1200_r12.alist", "3/4": "qc_n1200_r34.alist"}
LLR_CLAMP = 50.0


def generate_bits(count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. uniform bits as ``uint8``."""
    if count < 0:
        raise ParameterError("bit count must be non-negative")
    return rng.integers(0, 2, size=int(count), dtype=np.uint8)


# -- alist ------------------------------------------------------------------

def read_alist(path) -> np.ndarray:
    """Parse a parity-check matrix in MacKay's alist format (dense ``uint8``)."""
    try:
        tokens = [int(t) for t in Path(path).read_text().split()]
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer token in alist file") from exc
    try:
        it = iter(tokens)
        n, m = next(it), next(it)
        max_cw, max_rw = next(it), next(it)
        col_w = [next(it) for _ in range(n)]
        row_w = [next(it) for _ in range(m)]
        rest = list(it)
    except StopIteration as exc:
        raise FormatError(f"{path}: truncated alist header") from exc

    h = np.zeros((m, n), dtype=np.uint8)
    padded = len(rest) == n * max_cw + m * max_rw
    pos = 0
    for j in range(n):
        width = max_cw if padded else col_w[j]
        entries = rest[pos:pos + width]
        pos += width
        if len(entries) < col_w[j]:
            raise FormatError(f"{path}: truncated column list")
        for r in entries[: col_w[j]]:
            if not 1 <= r <= m:
                raise FormatError(f"{path}: row index {r} out of range")
            h[r - 1, j] = 1
    for i in range(m):
        width = max_rw if padded else row_w[i]
        entries = rest[pos:pos + width]
        pos += width
        if len(entries) < row_w[i]:
            raise FormatError(f"{path}: truncated row list")
        cols = sorted(c - 1 for c in entries[: row_w[i]])
        if cols != sorted(np.flatnonzero(h[i]).tolist()):
            raise FormatError(f"{path}: row and column lists disagree at row {i + 1}")
    return h


def write_alist(h: np.ndarray, path) -> None:
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    cols = [np.flatnonzero(h[:, j]) + 1 for j in range(n)]
    rows = [np.flatnonzero(h[i]) + 1 for i in range(m)]
    max_cw = max(len(c) for c in cols)
    max_rw = max(len(r) for r in rows)

    def line(vals, width):
        vals = list(vals) + [0] * (width - len(vals))
        return " ".join(str(int(v)) for v in vals)

    out = [f"{n} {m}", f"{max_cw} {max_rw}",
           " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    out += [line(c, max_cw) for c in cols]
    out += [line(r, max_rw) for r in rows]
    Path(path).write_text("\n".join(out) + "\n")


# -- code -------------------------------------------------------------------

def _gf2_rref(h: np.ndarray, column_order: np.ndarray):
    """Row-reduce ``h`` over GF(2), choosing pivots in ``column_order``.

    Returns the reduced matrix (rank rows) and the pivot columns.
    """
    a = h.copy().astype(np.uint8)
    m = a.shape[0]
    pivots = []
    row = 0
    for col in column_order:
        if row == m:
            break
        hits = np.flatnonzero(a[row:, col])
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        others = np.flatnonzero(a[:, col])
        others = others[others != row]
        a[others] ^= a[row]
        pivots.append(col)
        row += 1
    return a[:row], np.array(pivots, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Binary LDPC code with a systematic encoder derived from its parity matrix."""

    h: np.ndarray
    name: str = ""
    n: int = field(init=False)
    k: int = field(init=False)
    info_positions: np.ndarray = field(init=False, repr=False)
    parity_positions: np.ndarray = field(init=False, repr=False)
    _parity_map: np.ndarray = field(init=False, repr=False)
    graph: kernels.TannerGraph = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.uint8)
        if h.ndim != 2 or not np.all(h <= 1):
            raise ParameterError("parity matrix must be a binary 2-D array")
        m, n = h.shape
        # prefer parity pivots on the rightmost columns, leaving the left block systematic
        reduced, pivots = _gf2_rref(h, np.arange(n)[::-1])
        info = np.setdiff1d(np.arange(n), pivots)
        # c[pivots[i]] = sum_f reduced[i, f] c[f] over GF(2)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", n - len(pivots))
        object.__setattr__(self, "info_positions", info)
        object.__setattr__(self, "parity_positions", pivots)
        object.__setattr__(self, "_parity_map", reduced[:, info].astype(np.uint8))
        object.__setattr__(self, "graph", kernels.TannerGraph.from_dense(h))

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def syndrome(self, codeword) -> np.ndarray:
        c = np.asarray(codeword, dtype=np.int64)
        return (c @ self.h.T.astype(np.int64)) % 2

    @classmethod
    def from_alist(cls, path, name: str | None = None) -> "LdpcCode":
        return cls(read_alist(path), name=name or Path(path).stem)


@functools.lru_cache(maxsize=8)
def load_code(rate: str = "1/2") -> LdpcCode:
    """One of the shipped quasi-cyclic codes (n = 1200), keyed ``"1/2"`` or ``"3/4"``."""
    key = _rate_key(rate)
    try:
        fname = SHIPPED_RATES[key]
    except KeyError:
        raise ParameterError(f"no shipped code for rate {rate!r}; have {sorted(SHIPPED_RATES)}") from None
    ref = resources.files("ftnlab").joinpath("assets", "codes", fname)
    with resources.as_file(ref) as path:
        return LdpcCode.from_alist(path, name=f"qc1200-{key}")


def _rate_key(rate) -> str:
    if isinstance(rate, str):
        return rate.strip()
    for key in SHIPPED_RATES:
        num, den = key.split("/")
        if abs(float(rate) - int(num) / int(den)) < 1e-9:
            return key
    return str(rate)


def ldpc_encode(info_bits, code: LdpcCode) -> np.ndarray:
    """Systematic encoding; ``info_bits`` may be 1-D (k) or 2-D (batch, k)."""
    u = np.asarray(info_bits, dtype=np.uint8)
    if u.shape[-1] != code.k:
        raise ParameterError(f"expected {code.k} info bits, got {u.shape[-1]}")
    c = np.zeros(u.shape[:-1] + (code.n,), dtype=np.uint8)
    c[..., code.info_positions] = u
    parity = (u.astype(np.int64) @ code._parity_map.T.astype(np.int64)) % 2
    c[..., code.parity_positions] = parity
    return c


@dataclass(frozen=True)
class DecodeResult:
    info_bits: np.ndarray
    converged: bool
    iterations: int
    codeword: np.ndarray
    posterior: np.ndarray


def ldpc_decode(llrs, code: LdpcCode, max_iter: int = 50, alpha: float = 0.75) -> DecodeResult:
    """Normalized min-sum decoding of one codeword.

    Converged means the hard decisions satisfy every parity check and no
    posterior LLR is exactly zero. Input LLRs are clamped to +-50.
    """
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (code.n,):
        raise ParameterError(f"expected {code.n} LLRs, got shape {llrs.shape}")
    res = ldpc_decode_batch(llrs[None, :], code, max_iter=max_iter, alpha=alpha)
    return DecodeResult(
        info_bits=res.info_bits[0], converged=bool(res.converged[0]),
        iterations=int(res.iterations[0]), codeword=res.codeword[0], posterior=res.posterior[0],
    )


def ldpc_decode_batch(llrs, code: LdpcCode, max_iter: int = 50, alpha: float = 0.75) -> DecodeResult:
    """Decode a ``(batch, n)`` array of LLRs; fields of the result are batched."""
    llrs = np.asarray(llrs, dtype=float)
    if llrs.ndim != 2 or llrs.shape[1] != code.n:
        raise ParameterError(f"expected LLRs of shape (batch, {code.n}), got {llrs.shape}")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    if not np.all(np.isfinite(llrs)):
        raise ParameterError("LLRs must be finite")
    clamped = np.ascontiguousarray(np.clip(llrs, -LLR_CLAMP, LLR_CLAMP))
    hard, converged, iters, post = kernels.minsum_decode(clamped, code.graph, float(alpha), int(max_iter))
    return DecodeResult(
        info_bits=hard[:, code.info_positions], converged=converged.astype(bool),
        iterations=iters, codeword=hard, posterior=post,
    )


# -- interleaving -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Interleaver:
    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        n = len(perm)
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ParameterError("interleaver permutation must be a bijection on [0, n)")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    @property
    def n(self) -> int:
        return len(self.permutation)

    @classmethod
    def from_seed(cls, n: int, seed: int) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(n), seed=seed)

    @classmethod
    def identity(cls, n: int) -> "Interleaver":
        return cls(np.arange(n))


def interleave(x, il: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != il.n:
        raise ParameterError(f"interleaver length {il.n} != data length {x.shape[-1]}")
    return x[..., il.permutation]


def deinterleave(x, il: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != il.n:
        raise ParameterError(f"interleaver length {il.n} != data length {x.shape[-1]}")
    out = np.empty_like(x)
    out[..., il.permutation] = x
    return out


def bitflip_bler(ber: float, code: LdpcCode, n_frames: int, rng: np.random.Generator,
                 max_iter: int = 50, alpha: float = 0.75) -> tuple[float, float]:
    """Coded reference curve: flip codeword bits independently with probability ``ber``.

    Each received bit gets the BSC LLR ``+-ln((1 - ber) / ber)``. Returns
    ``(post-decoding info BER, BLER)``.
    """
    if ber <= 0:
        return 0.0, 0.0
    ber = min(ber, 0.5)
    mag = np.log((1 - ber) / ber) if ber < 0.5 else 0.0
    info = rng.integers(0, 2, size=(n_frames, code.k), dtype=np.uint8)
    cw = ldpc_encode(info, code)
    flips = rng.random(cw.shape) < ber
    rx = cw ^ flips
    llrs = mag * (1.0 - 2.0 * rx)
    res = ldpc_decode_batch(llrs, code, max_iter=max_iter, alpha=alpha)
    errs = res.info_bits != info
    return float(errs.mean()), float(errs.any(axis=1).mean())
