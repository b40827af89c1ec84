import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoscomm.channel import (ChannelModel, NoiseSpec, add_awgn, draw_gamma, ebn0_to_n0,
                               exponential_channel, perturb_channel, propagate,
                               quasi_static_channel, read_channel_file, received_symbol_rate,
                               write_channel_file)
from chaoscomm.waveform import SampledSignal, WaveformParams, synthesize

from conftest import random_symbols


class TestChannelModel:
    def test_single_path(self):
        ch = exponential_channel([0], 0.7)
        assert ch.taps == ((0.0, 1.0),)

    def test_two_path_gamma_09(self):
        ch = exponential_channel([0, 1], 0.9)
        assert ch.alphas[1] == pytest.approx(0.4065696597, abs=1e-10)

    def test_three_path(self):
        ch = exponential_channel([0, 1, 2], 0.6)
        assert np.array_equal(ch.alphas, [1.0, math.exp(-0.6), math.exp(-1.2)])
        assert ch.gamma == 0.6

    @pytest.mark.parametrize("delays", [[1, 2], [0, 2, 1], [0, 0], [0, -1]])
    def test_bad_delays(self, delays):
        with pytest.raises(ValueError):
            exponential_channel(delays, 0.5)

    def test_bad_gain(self):
        with pytest.raises(ValueError):
            ChannelModel(((0, 1.0), (1, -0.2)))

    def test_symbol_delays(self):
        assert exponential_channel([0, 1, 2], 0.1).symbol_delays(1.0).tolist() == [0, 1, 2]
        with pytest.raises(ValueError):
            exponential_channel([0, 0.5], 0.1).symbol_delays(1.0)


class TestPropagate:
    def test_identity(self):
        x = SampledSignal(np.arange(5.0), 0.25)
        assert np.array_equal(propagate(x, exponential_channel([0], 1)).samples, x.samples)

    def test_impulse_response(self):
        ch = exponential_channel([0, 1], 0.6)
        x = SampledSignal(np.eye(1, 8).ravel(), 0.25)
        y = propagate(x, ch).samples
        assert y.size == 12
        assert y[0] == 1.0 and y[4] == pytest.approx(math.exp(-0.6))
        assert np.count_nonzero(y) == 2

    def test_off_grid_delay(self):
        x = SampledSignal(np.zeros(8), 0.25)
        with pytest.raises(ValueError, match="oversampling"):
            propagate(x, exponential_channel([0, 0.1], 0.6))

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        x, z = rng.standard_normal(32), rng.standard_normal(32)
        ch = exponential_channel([0, 0.5, 1], 0.6)
        lhs = propagate(SampledSignal(a * x + b * z, 0.125), ch).samples
        rhs = (a * propagate(SampledSignal(x, 0.125), ch).samples
               + b * propagate(SampledSignal(z, 0.125), ch).samples)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_two_path_return_map_recursion(self):
        p = WaveformParams()
        ch = exponential_channel([0, 1], 0.9)
        s = random_symbols(400, 0)
        r = propagate(synthesize(s, p, 40), ch)
        rn = np.array([r.samples[r.index_of(n)] for n in range(s.size)])
        g = math.exp(0.65)
        n = np.arange(1, s.size - 1)
        pred = g * rn[n] - (g - 1) * (s[n] + math.exp(-0.9) * s[n - 1])
        assert np.max(np.abs(rn[n + 1] - pred)) < 1e-9

    def test_symbol_rate_shortcut(self):
        p = WaveformParams()
        ch = exponential_channel([0, 1, 2], 0.6)
        s = random_symbols(200, 1)
        r = propagate(synthesize(s, p, 40), ch)
        rn = np.array([r.samples[r.index_of(n)] for n in range(s.size)])
        assert np.max(np.abs(rn - received_symbol_rate(s, ch, p))) < 1e-12


class TestNoise:
    def test_zero_noise(self):
        x = SampledSignal(np.linspace(-1, 1, 50), 0.1)
        assert np.array_equal(add_awgn(x, NoiseSpec(10.0, 0.0, 3)).samples, x.samples)

    def test_variance_and_whiteness(self):
        x = SampledSignal(np.zeros(10 ** 6), 1 / 16)
        w = add_awgn(x, NoiseSpec(0.0, 0.3, 7)).samples
        assert w.var() == pytest.approx(0.3 / (2 / 16), rel=0.01)
        lag1 = np.corrcoef(w[:-1], w[1:])[0, 1]
        assert abs(lag1) < 0.01

    def test_seeded(self):
        x = SampledSignal(np.zeros(100), 0.1)
        a = add_awgn(x, NoiseSpec(0.0, 1.0, 11)).samples
        b = add_awgn(x, NoiseSpec(0.0, 1.0, 11)).samples
        assert np.array_equal(a, b)

    def test_from_ebn0(self):
        spec = NoiseSpec.from_ebn0(10.0, 2.0, seed=1)
        assert spec.n0 == pytest.approx(0.2)
        assert ebn0_to_n0(0.0, 1.3) == pytest.approx(1.3)
        with pytest.raises(ValueError):
            NoiseSpec(0.0, -1.0)


class TestPerturb:
    def test_zero_epsilon(self):
        ch = exponential_channel([0, 1], 0.6)
        assert perturb_channel(ch, 0.0, 5) == ch

    @given(st.integers(0, 10 ** 6), st.floats(0, 0.99))
    def test_support_and_structure(self, seed, eps):
        ch = exponential_channel([0, 1, 2], 0.6)
        hat = perturb_channel(ch, eps, seed)
        assert np.array_equal(hat.delays, ch.delays)
        assert np.all(np.abs(hat.alphas - ch.alphas) <= eps * ch.alphas + 1e-15)

    def test_mean(self):
        ch = exponential_channel([0, 1], 0.6)
        draws = np.array([perturb_channel(ch, 0.3, k).alphas for k in range(100_000)])
        assert np.allclose(draws.mean(axis=0), ch.alphas, rtol=0.005)

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            perturb_channel(exponential_channel([0], 1), 1.0)


class TestQuasiStatic:
    def test_degenerate_range(self):
        assert quasi_static_channel([0, 1], (0.6, 0.6), 3, 0) == exponential_channel([0, 1], 0.6)

    def test_mean_gamma(self):
        g = [draw_gamma((0.3, 0.9), k, 0) for k in range(2000)]
        assert abs(np.mean(g) - 0.6) < 0.01
        assert 0.3 <= min(g) and max(g) <= 0.9

    def test_keyed_by_frame(self):
        a = quasi_static_channel([0, 1], (0.3, 0.9), 17, 4)
        assert a == quasi_static_channel([0, 1], (0.3, 0.9), 17, 4)
        assert a != quasi_static_channel([0, 1], (0.3, 0.9), 18, 4)

    def test_reversed_range(self):
        with pytest.raises(ValueError):
            draw_gamma((0.9, 0.3), 0, 0)


def test_channel_file_round_trip(tmp_path):
    ch = exponential_channel([0, 1, 2], 0.6)
    path = tmp_path / "ch.txt"
    write_channel_file(ch, path)
    back = read_channel_file(path)
    assert np.array_equal(back.delays, ch.delays)
    assert np.array_equal(back.alphas, ch.alphas)


def test_channel_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1 2\n")
    with pytest.raises(ValueError):
        read_channel_file(path)
