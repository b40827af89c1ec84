import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoscomm.analytic import single_path_lower_bound
from chaoscomm.baseline import (ChannelEstimate, bpsk_detect, bpsk_receive, bpsk_transmit,
                                channel_response, equalize, filtered_channel_response,
                                ls_estimate, mmse_design, mmse_for_filtered, mmse_for_paths)
from chaoscomm.channel import ChannelModel, exponential_channel
from chaoscomm.matched_filter import build_correlation_table, symbol_level_output
from chaoscomm.waveform import WaveformParams

from conftest import random_symbols

P = WaveformParams()


def _mse(g, w, delay, noise_var):
    combined = np.convolve(g, w)
    target = np.zeros(combined.size)
    target[delay] = 1.0
    return float(np.sum((combined - target) ** 2) + noise_var * np.sum(w ** 2))


class TestMmse:
    @pytest.mark.parametrize("var", [0.0, 0.1, 1.0])
    def test_identity_channel(self, var):
        eq = mmse_design([1.0], var, 15, 7)
        expect = np.zeros(15)
        expect[7] = 1.0 / (1.0 + var)
        assert np.allclose(eq.weights, expect, atol=1e-14)

    def test_zero_forcing_limit(self):
        g = np.array([1.0, 0.5])
        eq = mmse_design(g, 0.0, 31, 5)
        combined = np.convolve(g, eq.weights)
        assert combined[5] == pytest.approx(1.0, abs=1e-6)
        combined[5] = 0.0
        assert np.max(np.abs(combined)) < 1e-6

    @given(st.integers(0, 10 ** 6))
    def test_local_minimum(self, seed):
        g = channel_response(exponential_channel([0, 1, 2], 0.6))
        var = 0.05
        eq = mmse_design(g, var, 11, 4)
        best = _mse(g, eq.weights, 4, var)
        rng = np.random.default_rng(seed)
        for _ in range(5):
            w = eq.weights + 1e-3 * rng.standard_normal(eq.weights.size)
            assert _mse(g, w, 4, var) > best

    def test_alignment(self):
        ch = exponential_channel([0, 1], 0.6)
        s = random_symbols(500, 1)
        z = equalize(bpsk_transmit(s, ch), mmse_design(ch, 1e-6, 21, 7))
        assert np.array_equal(bpsk_detect(z[:480]), s[:480])

    @given(st.lists(st.floats(-3, 3), min_size=20, max_size=40))
    def test_equalize_is_odd(self, u):
        eq = mmse_design([1.0, 0.4], 0.1, 7, 3)
        assert np.allclose(equalize(np.negative(u), eq), -equalize(u, eq))

    def test_errors(self):
        with pytest.raises(ValueError):
            mmse_design([1.0], -0.1)
        with pytest.raises(ValueError):
            mmse_design([1.0], 0.1, num_taps=0)
        with pytest.raises(ValueError):
            mmse_design([1.0], 0.1, 5, 9)
        with pytest.raises(ValueError):
            channel_response(ChannelModel(((0.0, 1.0), (0.5, 0.3))))


class TestFilteredResponse:
    @pytest.mark.parametrize("delays", [[0], [0, 1], [0, 1, 2]])
    def test_reconstructs_filtered_output(self, delays):
        t = build_correlation_table(exponential_channel(delays, 0.6), P)
        g, cursor = filtered_channel_response(t, rel_floor=0.0)
        s = random_symbols(400, 2)
        y = symbol_level_output(s, t).y
        conv = np.convolve(s, g)
        n = np.arange(100, 300)
        assert np.allclose(conv[n + cursor], y[n], atol=1e-12)

    def test_full_response_mmse_noiseless(self):
        t = build_correlation_table(exponential_channel([0, 1, 2], 0.6), P)
        s = random_symbols(2000, 3)
        y = symbol_level_output(s, t).y
        z = equalize(y, mmse_for_filtered(t, 1e-3, 31, 15))
        assert np.array_equal(bpsk_detect(z[100:1900]), s[100:1900])

    def test_path_mmse_scaling(self):
        ch = exponential_channel([0, 1], 0.6)
        t = build_correlation_table(ch, P)
        a = mmse_for_paths(ch, t, 0.3)
        b = mmse_design(ch, (0.3 / t.e_p) ** 2)
        assert np.array_equal(a.weights, b.weights)


class TestLeastSquares:
    def test_noiseless_bpsk(self):
        ch = exponential_channel([0, 1, 2], 0.6)
        s = random_symbols(256, 4)
        est = ls_estimate(s, bpsk_transmit(s, ch), ch.delays)
        assert np.allclose(est.gains, ch.alphas, atol=1e-12)
        assert est.residual < 1e-9

    def test_noiseless_chaotic(self):
        ch = exponential_channel([0, 1, 2], 0.6)
        t = build_correlation_table(ch, P, 60)
        s = random_symbols(512, 5)
        y = symbol_level_output(s, t).y
        est = ls_estimate(s, y, ch.delays, P)
        assert np.allclose(est.gains, ch.alphas, atol=1e-9)
        assert est.residual < 1e-9

    def test_unbiased_with_expected_variance(self):
        ch = exponential_channel([0, 1], 0.6)
        sigma2 = 0.5
        gains = []
        rows = None
        for k in range(400):
            s = random_symbols(200, 100 + k)
            r = bpsk_transmit(s, ch) + math.sqrt(sigma2) * np.random.default_rng(k).standard_normal(200)
            est = ls_estimate(s, r, ch.delays)
            gains.append(est.gains)
            rows = est.rows
        gains = np.array(gains)
        spread = gains.std(axis=0, ddof=1)
        assert np.all(np.abs(gains.mean(axis=0) - ch.alphas) < 4 * spread / math.sqrt(400))
        assert np.allclose(spread ** 2, sigma2 / rows, rtol=0.2)

    def test_sign_symmetry(self):
        ch = exponential_channel([0, 1], 0.6)
        s = random_symbols(100, 6)
        r = bpsk_receive(s, ch, 0.3, seed=1)
        a = ls_estimate(s, r, ch.delays)
        b = ls_estimate(-s, -r, ch.delays)
        assert np.allclose(a.gains, b.gains, atol=1e-12)

    def test_noise_var(self):
        est = ChannelEstimate(((0.0, 1.0),), residual=3.0, rows=10)
        assert est.noise_var == pytest.approx(1.0)
        assert est.as_channel().alphas[0] == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            ls_estimate([1, -1, 1], [0.1, 0.2, 0.3], [0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            ls_estimate(np.ones(50), np.ones(50), [0.0, 1.0])
        with pytest.raises(ValueError):
            ls_estimate(random_symbols(50, 0), np.ones(50), [0.0, 0.5])


class TestBpsk:
    @pytest.mark.parametrize("ebn0_db", [2.0, 5.0])
    def test_single_path_ber(self, ebn0_db):
        n = 400_000
        s = random_symbols(n, 7)
        n0 = 10 ** (-ebn0_db / 10)
        r = bpsk_receive(s, ChannelModel(((0.0, 1.0),)), n0, seed=8)
        errs = int(np.sum(bpsk_detect(r) != s))
        p = single_path_lower_bound(ebn0_db)
        assert abs(errs - n * p) < 3 * math.sqrt(n * p * (1 - p))

    def test_two_path_without_equalizer_floor(self):
        ch = exponential_channel([0, 1], 0.6)
        n = 100_000
        s = random_symbols(n, 9)
        n0 = 10 ** (-1.2)
        r = bpsk_receive(s, ch, n0, seed=10)
        raw = np.sum(bpsk_detect(r[20:-20]) != s[20:-20])
        eq = equalize(r, mmse_design(ch, n0 / 2, 15, 7))
        fixed = np.sum(bpsk_detect(eq[20:-20]) != s[20:-20])
        assert raw > 10 * max(fixed, 1)

    def test_detect_ties(self):
        assert bpsk_detect([0.0, 1e-9, -1e-9]).tolist() == [-1.0, 1.0, -1.0]
