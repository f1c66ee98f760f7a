"""One check per primary acceptance criterion; each prints a PASS/FAIL line."""

import math
import time

import mpmath
import numpy as np
import pytest

from conftest import SMOKE_TAU, paired_z
from ftnlab import coding, dsp, harness, modem
from ftnlab.harness import LinkConfig
from ftnlab.neural import Model, cnn_specs, dnn_specs, gradcheck, lbce_loss, mac_count
from ftnlab.receivers import FdeConfig


def test_awgn_oracle(record):
    t0 = time.perf_counter()
    cfg = LinkConfig(tau=1.0, coded=False, min_block_errors=0, max_mc_iterations=10_000, chunk_frames=64)
    worst = 0.0
    for db in (0.0, 4.0, 8.0):
        rec = harness.run_point(cfg, db, "med")
        bits = rec.blocks * 100
        assert bits >= 1_000_000
        p = modem.theoretical_qpsk_ber(db)
        worst = max(worst, abs(rec.ber - p) / math.sqrt(p * (1 - p) / bits))
    elapsed = time.perf_counter() - t0
    ok = worst < 3 and elapsed < 120
    record("AWGN oracle", ok, f"max deviation {worst:.2f} sigma over 1e6 bits/point, {elapsed:.1f} s")
    assert ok


def test_nyquist_taps(record):
    taps = dsp.ftn_taps(1.0, 20)
    off = np.max(np.abs(np.delete(taps.taps, taps.l_i)))
    g0 = taps.taps[taps.l_i]
    ok = off < 1e-3 and abs(g0 - 1) <= 1e-6
    record("Nyquist taps", ok, f"max |g_n|, n != 0: {off:.2e}; g_0 = {g0:.9f}")
    assert ok


def test_isi_matrix_structure(record):
    taps = dsp.ftn_taps(0.6)
    g = dsp.build_isi_matrix(taps, 50)
    zeros = g.zero_diagonal_count()
    sym = np.array_equal(g.entries, g.entries.T)
    lam = np.linalg.eigvalsh(g.entries).min()
    ok = taps.l_i == 33 and zeros == 32 and sym and lam > -1e-8
    record("ISI matrix structure", ok, f"L_I={taps.l_i}, zero diagonals {zeros}, symmetric {sym}, min eig {lam:.3e}")
    assert ok


def test_colored_noise(record):
    taps = dsp.ftn_taps(0.7)
    n0 = 0.5
    eta = dsp.draw_colored_noise(dsp.NoiseSpec(n0), taps, np.random.default_rng(2024), order=16, size=100_000)
    target = n0 / 2 * dsp.build_isi_matrix(taps, 16).entries
    tol = np.maximum(0.05 * np.abs(target), 0.01 * n0)
    worst = 0.0
    for part in (eta.real, eta.imag):
        emp = part.T @ part / len(part)
        worst = max(worst, float(np.max(np.abs(emp - target) / tol)))
    ok = worst <= 1.0
    record("Colored noise", ok, f"worst entry uses {worst:.0%} of its tolerance")
    assert ok


def test_gradient_suite(record):
    t0 = time.perf_counter()
    results = gradcheck.default_suite()
    elapsed = time.perf_counter() - t0
    worst = max(results, key=lambda r: r.max_rel_error)
    ok = all(r.max_rel_error < 1e-5 for r in results) and elapsed < 60
    names = ", ".join(r.name for r in results)
    record("Gradient suite", ok, f"{names}; worst {worst.name} {worst.max_rel_error:.2e}; {elapsed:.2f} s")
    assert ok


def test_lbce_anchor(record):
    at_zero = lbce_loss(np.array([0.0]), np.array([1]))[0]
    with np.errstate(over="raise", invalid="raise"):
        sat = [lbce_loss(np.array([s * 50.0]), np.array([b]))[0] for s in (-1, 1) for b in (0, 1)]
    mpmath.mp.dps = 60
    worst = 0.0
    for lam in np.linspace(-30, 30, 61):
        for b in (0, 1):
            ref = mpmath.log(1 + mpmath.exp(-lam if b == 0 else lam))
            worst = max(worst, abs(lbce_loss(np.array([lam]), np.array([b]))[0] - float(ref)))
    ok = abs(at_zero - math.log(2)) <= 1e-6 and all(map(math.isfinite, sat)) and worst <= 1e-9
    record("L-BCE anchor", ok, f"loss(0) - ln2 = {at_zero - math.log(2):.1e}; |lambda|=50 finite; "
                               f"max error vs 60-digit reference {worst:.1e}")
    assert ok


def test_throughput_formula(record):
    tp = harness.throughput(2, 3 / 4, 0.6, 1e-6, 1.0, 0.0)
    gamma = FdeConfig(28).gamma(50)
    ok = tp == 2_500_000 and gamma == 50 / 106
    record("Throughput formula", ok, f"TP = {tp!r} bps; FDE gamma = {gamma!r}")
    assert ok


def test_mac_budget(record):
    cnn = mac_count(Model(cnn_specs(), (74, 2)))
    dnn = mac_count(Model(dnn_specs(), (1, 148))) / 50
    ok = abs(cnn - 2.67e6) / 2.67e6 < 0.05 and abs(cnn / 50 - 53.5e3) / 53.5e3 < 0.05 \
        and abs(dnn - 8196) / 8196 < 0.05
    record("MAC budget", ok, f"CNN {cnn} MACs ({cnn / 50:.0f}/symbol, {cnn / 2.67e6 - 1:+.1%}); "
                             f"DNN {dnn:.0f}/symbol ({dnn / 8196 - 1:+.1%})")
    assert ok


def test_ldpc_sanity(record):
    rng = np.random.default_rng(7)
    exact = True
    for rate in ("1/2", "3/4"):
        code = coding.load_code(rate)
        info = rng.integers(0, 2, size=(20, code.k), dtype=np.uint8)
        res = coding.ldpc_decode_batch(6.0 * (1.0 - 2.0 * coding.ldpc_encode(info, code)), code)
        exact &= bool(np.array_equal(res.info_bits, info))
    code = coding.load_code("1/2")
    n0 = float(harness.ebn0_to_n0(4.0))
    info = rng.integers(0, 2, size=(400, code.k), dtype=np.uint8)
    x = modem.qpsk_modulate(coding.ldpc_encode(info, code))
    y = x + math.sqrt(n0 / 2) * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    llr = modem.med_demap(y.reshape(-1), n0).llrs.reshape(len(info), -1)
    cw = coding.ldpc_encode(info, code)
    uncoded = float(np.mean(modem.hard_decision(llr) != cw))
    coded = float(np.mean(coding.ldpc_decode_batch(llr, code).info_bits != info))
    ok = exact and coded < uncoded
    record("LDPC sanity", ok, f"noiseless roundtrip exact {exact}; 4 dB tau=1 R=1/2: "
                              f"coded BER {coded:.2e} < uncoded {uncoded:.2e}")
    assert ok


def test_smoke_training(record, trained_cnn):
    model, seconds = trained_cnn
    cfg = LinkConfig(tau=SMOKE_TAU, coded=False, chunk_frames=25)
    errs = harness.run_paired(cfg, 8.5, ["med", "cnn"], {"cnn": model}, n_frames=400)
    bits = 400 * 1200
    ber = errs["cnn"].sum() / bits
    med = errs["med"].sum() / bits
    z = paired_z(errs["cnn"], errs["med"])
    ok = ber <= 1e-2 and z < -3 and seconds <= 3600
    record("Smoke training", ok, f"CNN BER {ber:.2e} vs MED {med:.2e} at 8.5 dB (paired z = {z:.1f}); "
                                 f"trained in {seconds:.0f} s")
    assert ok


def test_receiver_ordering(record, trained_cnn, trained_dnn):
    cfg = LinkConfig(tau=SMOKE_TAU, coded=False, chunk_frames=25)
    models = {"cnn": trained_cnn[0], "dnn": trained_dnn[0]}
    n = 600
    errs = harness.run_paired(cfg, 10.0, ["cnn", "dnn", "fde", "med"], models, n_frames=n)
    bers = {k: v.sum() / (n * 1200) for k, v in errs.items()}
    pairs = [("cnn", "dnn"), ("dnn", "fde"), ("fde", "med")]
    zs = {f"{a}<{b}": paired_z(errs[a], errs[b]) for a, b in pairs}
    order_ok = all(z < -3 for z in zs.values())

    plateau_cfg = LinkConfig(tau=0.6, coded=False, min_block_errors=0, max_mc_iterations=2400, chunk_frames=50)
    plateau = [harness.run_point(plateau_cfg, db, "med").ber for db in (12.0, 14.0, 16.0)]
    plateau_ok = all(0.05 <= p <= 0.15 for p in plateau)
    ok = order_ok and plateau_ok
    detail = ", ".join(f"{k} {v:.2e}" for k, v in bers.items())
    detail += "; z " + ", ".join(f"{k} {v:.1f}" for k, v in zs.items())
    detail += "; MED tau=0.6 at 12/14/16 dB " + "/".join(f"{p:.3f}" for p in plateau)
    record("Receiver ordering", ok, detail)
    assert ok
