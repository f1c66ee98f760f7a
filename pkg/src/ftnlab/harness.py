"""Monte Carlo link simulation over Eb/N0 grids: BER, BLER, throughput and CSV tables."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import coding, dsp, modem
from . import receivers as rx
from .errors import ConfigError, ParameterError

log = logging.getLogger(__name__)

__all__ = [
    "LinkConfig",
    "MetricRecord",
    "PAPER_MODES",
    "RECEIVERS",
    "ebn0_to_n0",
    "n0_to_ebn0",
    "throughput",
    "simulate_frames",
    "run_point",
    "run_paired",
    "run_sweep",
    "theory_record",
    "write_csv",
    "read_csv",
]

PAPER_MODES = {0.6: 33, 0.7: 28, 1.0: 0}
RECEIVERS = ("med", "fde", "dnn", "cnn")
THEORY = "awgn_theory"


def ebn0_to_n0(ebn0_db, m: int = 2):
    """Noise density for unit symbol energy, with ``E_b = E_s / m``."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    return 1.0 / (m * np.power(10.0, np.asarray(ebn0_db, dtype=float) / 10.0))


def n0_to_ebn0(n0, m: int = 2):
    return -10.0 * np.log10(m * np.asarray(n0, dtype=float))


def throughput(m: int, r_c: float, tau: float, t_n: float, gamma: float, bler: float) -> float:
    """Delivered information bits per second: ``m r_c / (tau t_n) * gamma * (1 - bler)``."""
    if not (0.0 <= bler <= 1.0) or tau <= 0 or t_n <= 0 or not (0.0 < gamma <= 1.0):
        raise ParameterError("throughput inputs out of range")
    return m * r_c / (tau * t_n) * gamma * (1.0 - bler)


@dataclass(frozen=True)
class LinkConfig:
    """Link and Monte Carlo parameters of one simulation campaign.

    ``l_i=None`` derives the ISI span from the pulse (0 at ``tau=1``);
    ``fde_nu=None`` uses ``l_i``. ``max_mc_iterations`` caps the simulated
    blocks per point (codewords when coded, ``n_s``-symbol blocks when not);
    ``min_block_errors=0`` disables early stopping.
    """

    tau: float = 0.7
    l_i: int | None = None
    n_s: int = 50
    n_pad: int = 12
    m: int = 2
    rate: str = "1/2"
    t_n: float = 1e-6
    ebn0_grid_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    max_mc_iterations: int = 100_000
    min_block_errors: int = 100
    receivers: tuple[str, ...] = ("med",)
    seed: int = 0
    coded: bool = True
    frame_blocks: int = 12
    fde_nu: int | None = None
    decoder_max_iter: int = 50
    decoder_alpha: float = 0.75
    interleaver_seed: int = 1
    chunk_frames: int = 16
    theory_frames: int = 1000
    paper_mode: bool = False
    pulse: dsp.PulseSpec = field(default_factory=dsp.PulseSpec)

    def __post_init__(self):
        if not self.ebn0_grid_db:
            raise ConfigError("Eb/N0 grid is empty")
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must lie in (0, 1]")
        if self.m != 2:
            raise ConfigError("only QPSK (m=2) is supported")
        for r in self.receivers:
            if r not in RECEIVERS:
                raise ConfigError(f"unknown receiver {r!r}; choose from {RECEIVERS}")
        if self.max_mc_iterations < 1 or self.min_block_errors < 0 or self.chunk_frames < 1:
            raise ConfigError("Monte Carlo limits must be positive")
        if self.paper_mode:
            want = PAPER_MODES.get(round(self.tau, 6))
            if want is None or self.span != want:
                raise ConfigError(f"(tau, L_I) = ({self.tau}, {self.span}) is not one of the reference pairs {PAPER_MODES}")

    @property
    def span(self) -> int:
        if self.l_i is not None:
            return self.l_i
        return 0 if self.tau == 1.0 else dsp.default_isi_span(self.pulse, self.tau)

    @property
    def nu(self) -> int:
        return self.span if self.fde_nu is None else self.fde_nu

    @property
    def r_c(self) -> float:
        if not self.coded:
            return 1.0
        num, den = self.rate.split("/")
        return int(num) / int(den)

    def taps(self) -> dsp.IsiTaps:
        return dsp.ftn_taps(self.tau, self.span, self.pulse)

    def gamma(self, receiver: str) -> float:
        return rx.FdeConfig(self.nu).gamma(self.n_s) if receiver == "fde" else 1.0


@dataclass(frozen=True)
class MetricRecord:
    receiver: str
    tau: float
    rc: float
    ebn0_db: float
    ber: float
    bler: float
    throughput_bps: float
    blocks: int
    bit_errors: int
    block_errors: int
    stopped_early: bool

    @property
    def blocks_simulated(self) -> int:
        return self.blocks


CSV_COLUMNS = [f.name for f in fields(MetricRecord)]


# -- one frame batch --------------------------------------------------------

class _Link:
    """Immutable per-campaign state shared by all frames."""

    def __init__(self, cfg: LinkConfig, models: dict | None):
        self.cfg = cfg
        self.taps = cfg.taps()
        self.models = dict(models or {})
        self.code = coding.load_code(cfg.rate) if cfg.coded else None
        if self.code is not None:
            per_frame = self.code.n / (cfg.m * cfg.n_s)
            if per_frame != int(per_frame):
                raise ConfigError(f"codeword of {self.code.n} bits does not fill whole {cfg.n_s}-symbol blocks")
            self.n_blocks = int(per_frame)
            self.interleaver = coding.Interleaver.from_seed(self.code.n, cfg.interleaver_seed)
        else:
            self.n_blocks = cfg.frame_blocks
        self.n_sym = self.n_blocks * cfg.n_s
        self.fde = rx.FdeConfig(cfg.nu)

    def check_models(self, receivers):
        for name in receivers:
            if name not in ("cnn", "dnn"):
                continue
            model = self.models.get(name)
            if model is None:
                raise ConfigError(f"receiver {name!r} at tau={self.cfg.tau} needs a trained model")
            tau = model.meta.get("tau")
            if tau is None or abs(float(tau) - self.cfg.tau) > 1e-9:
                raise ConfigError(f"{name} model was trained for tau={tau}, link uses tau={self.cfg.tau}")
            for key in ("n_s", "n_pad"):
                if key in model.meta and int(model.meta[key]) != getattr(self.cfg, key):
                    raise ConfigError(f"{name} model has {key}={model.meta[key]}, link uses {getattr(self.cfg, key)}")

    def draw_frame(self, key, frame, n0, want_fde):
        """Bits and received streams of one frame from its own RNG stream."""
        cfg, taps = self.cfg, self.taps
        main, extra = (np.random.default_rng(s) for s in np.random.SeedSequence([cfg.seed, key, frame]).spawn(2))
        if self.code is not None:
            info = coding.generate_bits(self.code.k, main)
            tx_bits = coding.interleave(coding.ldpc_encode(info, self.code), self.interleaver)
        else:
            info = coding.generate_bits(self.n_sym * cfg.m, main)
            tx_bits = info
        payload = modem.qpsk_modulate(tx_bits)
        guard = taps.l_i + cfg.n_pad
        g = modem.qpsk_modulate(coding.generate_bits(4 * guard, main))
        stream = np.concatenate([g[:guard], payload, g[guard:]])
        y = dsp.apply_channel(stream, taps, dsp.NoiseSpec(n0), main)
        y_fde = None
        if want_fde:
            blocks = payload.reshape(self.n_blocks, cfg.n_s)
            gf = modem.qpsk_modulate(coding.generate_bits(4 * taps.l_i, extra))
            body = rx.add_cyclic_prefix(blocks, self.fde.nu).reshape(-1)
            y_fde = dsp.apply_channel(np.concatenate([gf[:taps.l_i], body, gf[taps.l_i:]]), taps,
                                      dsp.NoiseSpec(n0), extra)
        return info, y, y_fde

    def llrs(self, name, ys, n0):
        """Coded-bit LLRs ``(frames, n_sym * m)`` of one receiver."""
        cfg = self.cfg
        if name == "med":
            pay = ys[:, cfg.n_pad:cfg.n_pad + self.n_sym]
            return modem.med_demap(pay.reshape(-1), n0).llrs.reshape(len(ys), -1)
        if name == "fde":
            seg = ys.reshape(len(ys), self.n_blocks, cfg.n_s + self.fde.cp_len)[..., self.fde.nu:self.fde.nu + cfg.n_s]
            z, n_eff = rx.fde_equalize(seg, self.taps, n0, self.fde)
            return modem.med_demap(z.reshape(-1), max(n_eff, 1e-300)).llrs.reshape(len(ys), -1)
        model = self.models[name]
        if name == "cnn":
            x = np.concatenate([rx.cnn_windows(y, self.n_blocks, cfg.n_s, cfg.n_pad) for y in ys])
            out = model.forward(x, train=False).astype(np.float64)
            return out.reshape(len(ys), -1)
        x = np.concatenate([rx.dnn_windows(y, self.n_blocks, cfg.n_s, cfg.n_pad) for y in ys])
        out = model.forward(x, train=False).astype(np.float64)[:, 0, :]
        half = out.shape[-1] // 2
        sym = out[:, :half] + 1j * out[:, half:]
        return modem.med_demap(sym.reshape(-1), n0).llrs.reshape(len(ys), -1)

    def errors(self, info, llr):
        """Per-frame ``(bit errors, block errors)`` after decoding (or hard decisions)."""
        if self.code is not None:
            res = coding.ldpc_decode_batch(coding.deinterleave(llr, self.interleaver), self.code,
                                           max_iter=self.cfg.decoder_max_iter, alpha=self.cfg.decoder_alpha)
            wrong = res.info_bits != info
            return wrong.sum(axis=1), wrong.any(axis=1).astype(np.int64)
        wrong = (llr < 0).astype(np.uint8) != info
        per_block = wrong.reshape(len(info), self.n_blocks, -1).any(axis=2)
        return wrong.sum(axis=1), per_block.sum(axis=1)

    @property
    def bits_per_frame(self) -> int:
        return self.code.k if self.code is not None else self.n_sym * self.cfg.m

    @property
    def blocks_per_frame(self) -> int:
        return 1 if self.code is not None else self.n_blocks


def _point_key(ebn0_db: float) -> int:
    return int(round(float(ebn0_db) * 1000)) + 1_000_000


def simulate_frames(link: _Link, ebn0_db: float, receivers, frames) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-frame bit and block error counts for each receiver on shared realizations."""
    n0 = float(ebn0_to_n0(ebn0_db, link.cfg.m))
    key = _point_key(ebn0_db)
    want_fde = "fde" in receivers
    drawn = [link.draw_frame(key, f, n0, want_fde) for f in frames]
    info = np.stack([d[0] for d in drawn])
    y = np.stack([d[1] for d in drawn])
    out = {}
    for name in receivers:
        ys = np.stack([d[2] for d in drawn]) if name == "fde" else y
        out[name] = link.errors(info, link.llrs(name, ys, n0))
    return out


def _chunks(n_frames, size):
    return [range(s, min(s + size, n_frames)) for s in range(0, n_frames, size)]


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_point(cfg: LinkConfig, ebn0_db: float, receiver: str, models: dict | None = None,
              threads: int = 1) -> MetricRecord:
    """Simulate one (receiver, Eb/N0) point until the error target or the block cap.

    Frames draw from ``SeedSequence([seed, point, frame])`` so the result is
    independent of ``threads`` and receivers evaluated separately at the
    same point see identical bits and noise.
    """
    if receiver not in RECEIVERS:
        raise ConfigError(f"unknown receiver {receiver!r}")
    link = _Link(cfg, models)
    link.check_models([receiver])
    max_frames = max(1, math.ceil(cfg.max_mc_iterations / link.blocks_per_frame))
    bit_err = blk_err = frames_done = 0
    stopped = False
    # enough chunks in flight to keep every thread busy
    wave = cfg.chunk_frames * max(1, threads)
    while frames_done < max_frames and not stopped:
        todo = min(wave, max_frames - frames_done)
        chunks = _chunks(todo, cfg.chunk_frames)
        results = _map(lambda r: simulate_frames(link, ebn0_db, [receiver],
                                                 range(frames_done + r.start, frames_done + r.stop))[receiver],
                       chunks, threads)
        for be, ke in results:
            # stop at the first chunk boundary that reaches the target, independent of threads
            bit_err += int(be.sum())
            blk_err += int(ke.sum())
            frames_done += len(be)
            if cfg.min_block_errors and blk_err >= cfg.min_block_errors:
                stopped = True
                break
    blocks = frames_done * link.blocks_per_frame
    ber = bit_err / (frames_done * link.bits_per_frame)
    bler = blk_err / blocks
    return MetricRecord(
        receiver=receiver, tau=cfg.tau, rc=cfg.r_c, ebn0_db=float(ebn0_db), ber=ber, bler=bler,
        throughput_bps=throughput(cfg.m, cfg.r_c, cfg.tau, cfg.t_n, cfg.gamma(receiver), bler),
        blocks=blocks, bit_errors=bit_err, block_errors=blk_err, stopped_early=stopped,
    )


def run_paired(cfg: LinkConfig, ebn0_db: float, receivers, models: dict | None = None,
               n_frames: int = 100, threads: int = 1) -> dict[str, np.ndarray]:
    """Per-frame bit error counts of several receivers on the same realizations."""
    link = _Link(cfg, models)
    link.check_models(receivers)
    parts = _map(lambda r: simulate_frames(link, ebn0_db, list(receivers), r),
                 _chunks(n_frames, cfg.chunk_frames), threads)
    return {name: np.concatenate([p[name][0] for p in parts]) for name in receivers}


def theory_record(cfg: LinkConfig, ebn0_db: float) -> MetricRecord:
    """QPSK over AWGN at ``tau=1``; coded points decode a bit-flip channel of that BER."""
    p = float(modem.theoretical_qpsk_ber(ebn0_db))
    if cfg.coded:
        code = coding.load_code(cfg.rate)
        rng = np.random.default_rng([cfg.seed, _point_key(ebn0_db), 7])
        frames = cfg.theory_frames
        info = rng.integers(0, 2, size=(frames, code.k), dtype=np.uint8)
        cw = coding.ldpc_encode(info, code)
        rx_bits = cw ^ (rng.random(cw.shape) < p)
        mag = math.log((1 - p) / p) if 0 < p < 0.5 else (coding.LLR_CLAMP if p == 0 else 0.0)
        res = coding.ldpc_decode_batch(mag * (1.0 - 2.0 * rx_bits), code, cfg.decoder_max_iter, cfg.decoder_alpha)
        wrong = res.info_bits != info
        bit_err, blk_err = int(wrong.sum()), int(wrong.any(axis=1).sum())
        ber, bler, blocks = bit_err / wrong.size, blk_err / frames, frames
    else:
        ber = p
        bler = float(modem.theoretical_bler(ber=p, block_bits=cfg.n_s * cfg.m))
        bit_err = blk_err = blocks = 0
    return MetricRecord(
        receiver=THEORY, tau=1.0, rc=cfg.r_c, ebn0_db=float(ebn0_db), ber=ber, bler=bler,
        throughput_bps=throughput(cfg.m, cfg.r_c, 1.0, cfg.t_n, 1.0, bler),
        blocks=blocks, bit_errors=bit_err, block_errors=blk_err, stopped_early=False,
    )


def _failed(cfg, receiver, ebn0_db):
    nan = float("nan")
    return MetricRecord(receiver, cfg.tau, cfg.r_c, float(ebn0_db), nan, nan, nan, 0, 0, 0, False)


def run_sweep(cfg: LinkConfig, receivers=None, models: dict | None = None, threads: int = 1,
              theory: bool = True, progress=None) -> list[MetricRecord]:
    """One record per (receiver, grid point) plus the AWGN reference rows.

    A point that raises is logged and recorded with NaN metrics; the sweep
    continues. Model/config mismatches are raised before any simulation.
    """
    receivers = list(cfg.receivers if receivers is None else receivers)
    _Link(cfg, models).check_models(receivers)
    rows = []
    for name in receivers:
        for ebn0 in cfg.ebn0_grid_db:
            try:
                rec = run_point(cfg, ebn0, name, models, threads)
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                log.error("point %s @ %.2f dB failed: %s", name, ebn0, exc)
                rec = _failed(cfg, name, ebn0)
            rows.append(rec)
            if progress:
                progress(rec)
    if theory:
        rows += [theory_record(cfg, e) for e in cfg.ebn0_grid_db]
    return rows


# -- CSV --------------------------------------------------------------------

def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_csv(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_csv(path) -> list[MetricRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ParameterError(f"{path}: unexpected columns {reader.fieldnames}")
        out = []
        for row in reader:
            vals = {}
            for f in fields(MetricRecord):
                raw = row[f.name]
                if f.type == "bool":
                    vals[f.name] = raw == "True"
                elif f.type == "int":
                    vals[f.name] = int(raw)
                elif f.type == "float":
                    vals[f.name] = float(raw)
                else:
                    vals[f.name] = raw
            out.append(MetricRecord(**vals))
        return out
