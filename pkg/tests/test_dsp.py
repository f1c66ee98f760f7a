import math

import numpy as np
import pytest
from scipy import integrate

from ftnlab import dsp
from ftnlab.errors import NumericalError, ParameterError


def raised_cosine(t, beta):
    """Autocorrelation of the untruncated SRRC pulse."""
    t = np.asarray(t, dtype=float)
    out = np.sinc(t) * np.cos(np.pi * beta * t)
    den = 1.0 - (2.0 * beta * t) ** 2
    edge = np.abs(den) < 1e-12
    out = np.where(edge, np.pi / 4 * np.sinc(1.0 / (2.0 * beta)), out / np.where(edge, 1.0, den))
    return out


class TestPulse:
    def test_srrc_center_and_edge_limits(self):
        beta = 0.5
        assert dsp.srrc_value(0.0, beta)[0] == pytest.approx(1 - beta + 4 * beta / math.pi)
        edge = 1 / (4 * beta)
        near = dsp.srrc_value([edge - 1e-6, edge + 1e-6], beta)
        assert dsp.srrc_value(edge, beta)[0] == pytest.approx(near.mean(), rel=1e-5)

    def test_unit_energy(self):
        spec = dsp.PulseSpec()
        h = dsp.srrc_pulse(spec)
        assert np.sum(h * h) * spec.dt == pytest.approx(1.0, abs=1e-12)
        assert len(h) == 2 * spec.span * spec.oversampling + 1

    @pytest.mark.parametrize("kwargs", [{"beta": 0.0}, {"beta": 1.5}, {"oversampling": 8}, {"span": 2}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ParameterError):
            dsp.PulseSpec(**kwargs)


class TestTaps:
    def test_nyquist_taps(self):
        taps = dsp.ftn_taps(1.0, 20)
        off = np.delete(taps.taps, taps.l_i)
        assert taps.taps[taps.l_i] == pytest.approx(1.0, abs=1e-6)
        assert np.max(np.abs(off)) < 1e-3

    @pytest.mark.parametrize("tau,l_i", [(0.6, 33), (0.7, 28)])
    def test_default_span_matches_reference_table(self, tau, l_i):
        assert dsp.ftn_taps(tau).l_i == l_i

    def test_quadrature_oracle_tau07(self):
        # continuous correlation of the truncated pulse by adaptive quadrature
        spec = dsp.PulseSpec()
        beta, span = spec.beta, spec.span
        h = lambda t: dsp.srrc_value(t, beta)[0]
        e0 = integrate.quad(lambda t: h(t) ** 2, -span, span, limit=400)[0]
        taps = dsp.ftn_taps(0.7)
        for n in (1, 2, 3, 5, 8, 13):
            lag = n * 0.7
            ref = integrate.quad(lambda t: h(t) * h(t - lag), -span + lag, span, limit=400)[0] / e0
            assert taps.one_sided[n] == pytest.approx(ref, abs=1e-4)
            # and close to the raised cosine of the ideal pulse
            assert taps.one_sided[n] == pytest.approx(raised_cosine(lag, beta), abs=5e-4)

    def test_truncation_and_symmetry(self):
        full = dsp.ftn_taps(0.7)
        short = dsp.ftn_taps(0.7, 10)
        np.testing.assert_allclose(short.one_sided, full.one_sided[:11])
        np.testing.assert_array_equal(short.taps, short.taps[::-1])

    def test_csv_roundtrip(self, tmp_path):
        taps = dsp.ftn_taps(0.6)
        taps.to_csv(tmp_path / "t.csv")
        back = dsp.IsiTaps.from_csv(tmp_path / "t.csv", 0.6)
        np.testing.assert_array_equal(back.taps, taps.taps)

    def test_invalid_taps(self):
        with pytest.raises(ParameterError):
            dsp.IsiTaps(np.array([0.5, 1.0, 0.2]), 1, 0.7)
        with pytest.raises(ParameterError):
            dsp.IsiTaps(np.array([0.5, 0.9, 0.5]), 1, 0.7)
        with pytest.raises(ParameterError):
            dsp.ftn_taps(1.2)


class TestIsiMatrix:
    def test_zero_diagonals_tau06(self):
        g = dsp.build_isi_matrix(dsp.ftn_taps(0.6), 50)
        assert g.zero_diagonal_count() == 2 * (50 - 33 - 1)
        np.testing.assert_array_equal(g.entries, g.entries.T)
        assert np.linalg.eigvalsh(g.entries).min() > -1e-8

    @pytest.mark.parametrize("tau", [0.6, 0.7])
    @pytest.mark.parametrize("order", [74, 200, 624])
    def test_psd_for_long_blocks(self, tau, order):
        g = dsp.build_isi_matrix(dsp.ftn_taps(tau), order)
        assert np.linalg.eigvalsh(g.entries).min() > -1e-8

    def test_short_block_truncates(self):
        g = dsp.build_isi_matrix(dsp.ftn_taps(0.7), 10)
        assert g.entries[0, 9] == pytest.approx(dsp.ftn_taps(0.7).one_sided[9])


class TestChannel:
    def test_matches_dense_convolution(self):
        rng = np.random.default_rng(0)
        taps = dsp.ftn_taps(0.7)
        x = rng.standard_normal(120) + 1j * rng.standard_normal(120)
        n = len(x)
        g = dsp.build_isi_matrix(taps, n).entries
        full = g @ x
        y = dsp.apply_channel(x, taps)
        np.testing.assert_allclose(y, full[taps.l_i:n - taps.l_i], atol=1e-12)

    def test_batch_rows_independent(self):
        rng = np.random.default_rng(1)
        taps = dsp.ftn_taps(0.6)
        x = rng.standard_normal((3, 100)) + 0j
        y = dsp.apply_channel(x, taps)
        for row in range(3):
            np.testing.assert_allclose(y[row], dsp.apply_channel(x[row], taps))

    def test_guard_check(self):
        from ftnlab.modem import SymbolBlock
        taps = dsp.ftn_taps(0.7)
        blk = SymbolBlock(np.ones(80, complex), n_data=50, n_pad=5, n_guard=10)
        with pytest.raises(ParameterError):
            dsp.apply_channel(blk, taps)
        with pytest.raises(ParameterError):
            dsp.apply_channel(np.ones(40), taps)

    def test_noise_requires_rng(self):
        with pytest.raises(ParameterError):
            dsp.apply_channel(np.ones(100), dsp.ftn_taps(0.7), dsp.NoiseSpec(0.1))


class TestColoredNoise:
    def test_covariance(self):
        taps = dsp.ftn_taps(0.7)
        n0 = 0.3
        rng = np.random.default_rng(5)
        eta = dsp.draw_colored_noise(dsp.NoiseSpec(n0), taps, rng, order=16, size=100_000)
        g = dsp.build_isi_matrix(taps, 16).entries
        for part in (eta.real, eta.imag):
            emp = part.T @ part / len(part)
            tol = np.maximum(0.05 * np.abs(n0 / 2 * g), 0.01 * n0)
            assert np.all(np.abs(emp - n0 / 2 * g) <= tol)

    def test_matrix_and_taps_agree(self):
        taps = dsp.ftn_taps(0.6)
        g = dsp.build_isi_matrix(taps, 40)
        a = dsp.draw_colored_noise(dsp.NoiseSpec(1.0), g, np.random.default_rng(3))
        b = dsp.draw_colored_noise(dsp.NoiseSpec(1.0), taps, np.random.default_rng(3), order=40)
        np.testing.assert_allclose(a, b)

    def test_zero_noise(self):
        out = dsp.draw_colored_noise(dsp.NoiseSpec(0.0), dsp.ftn_taps(0.7), np.random.default_rng(0), order=8)
        assert not np.any(out)

    def test_indefinite_matrix_raises(self):
        bad = dsp.IsiTaps(np.array([0.9, 1.0, 0.9]), 1, 0.5)
        with pytest.raises(NumericalError):
            dsp.coloring_factor(bad, 30)

    def test_negative_n0(self):
        with pytest.raises(ParameterError):
            dsp.NoiseSpec(-1.0)
