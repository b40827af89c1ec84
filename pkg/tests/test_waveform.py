import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoscomm.waveform import (SampledSignal, SymbolSequence, WaveformParams, basis_pulse,
                                encode_initial_condition, pulse_samples, sampled_closed_form,
                                symbol_map_iterate, synthesize, synthesize_blocked)

from conftest import bipolar_lists, random_symbols


class TestParams:
    def test_omega_is_two_pi_f(self):
        p = WaveformParams(f=2.5, beta=1.0)
        assert p.omega == 2 * math.pi * 2.5

    @pytest.mark.parametrize("beta", [0.0, -0.1, math.log(2) + 1e-9])
    def test_beta_range(self, beta):
        with pytest.raises(ValueError):
            WaveformParams(f=1.0, beta=beta)

    def test_upper_beta_allowed(self):
        WaveformParams(f=1.0, beta=math.log(2))

    def test_oversampling_at_least_two(self):
        with pytest.raises(ValueError):
            WaveformParams(oversampling=1)


def test_symbol_sequence_mapping():
    seq = SymbolSequence([0, 1, 1, 0])
    assert seq.symbols.tolist() == [-1, 1, 1, -1]
    assert len(seq) == 4 == seq.length
    assert SymbolSequence.from_symbols([1, -1]).bits.tolist() == [1, 0]
    with pytest.raises(ValueError):
        SymbolSequence([])
    with pytest.raises(ValueError):
        SymbolSequence([0, 2])


@given(st.lists(st.integers(0, 1), min_size=1, max_size=50))
def test_bits_to_symbols(bits):
    seq = SymbolSequence(bits)
    assert np.array_equal(seq.symbols, 2 * np.asarray(bits) - 1)


class TestBasisPulse:
    def test_zero_at_end_of_symbol(self, params):
        assert basis_pulse(1.0, params) == 0.0
        assert basis_pulse(3.7, params) == 0.0

    def test_value_at_origin(self, params):
        assert basis_pulse(0.0, params) == pytest.approx(0.477954223239, abs=1e-12)

    def test_continuous_at_origin_and_end(self, params):
        h = 1e-13
        assert abs(basis_pulse(-h, params) - basis_pulse(0.0, params)) < 1e-12
        assert abs(basis_pulse(1.0 - h, params) - basis_pulse(1.0, params)) < 1e-12

    def test_envelope_far_in_the_past(self, params):
        assert abs(basis_pulse(-10.0, params)) < (1 - math.exp(-0.65)) * math.exp(-6.5)

    def test_rejects_non_finite(self, params):
        with pytest.raises(ValueError):
            basis_pulse(float("nan"), params)
        with pytest.raises(ValueError):
            basis_pulse(np.array([0.0, np.inf]), params)

    def test_array_matches_scalar(self, params):
        t = np.linspace(-3, 2, 41)
        assert np.array_equal(basis_pulse(t, params), [basis_pulse(v, params) for v in t])


class TestEncoding:
    def test_all_ones_tends_to_one(self, params):
        x = encode_initial_condition(np.ones(200), 0, 200, params)
        assert x == pytest.approx(1.0, abs=1e-12)

    def test_alternating_block(self, params):
        s = [1, -1] * 4
        assert encode_initial_condition(s, 0, 8, params) == pytest.approx(0.312288608682854, abs=1e-14)

    def test_later_block_uses_its_own_symbols(self, params):
        s = np.concatenate([np.ones(8), [1, -1] * 4])
        assert encode_initial_condition(s, 1, 8, params) == pytest.approx(0.312288608682854, abs=1e-14)

    def test_short_sequence(self, params):
        with pytest.raises(IndexError):
            encode_initial_condition([1, 1, 1], 1, 2, params)

    @given(bipolar_lists(1, 40))
    def test_odd_and_bounded(self, s):
        p = WaveformParams()
        x = encode_initial_condition(s, 0, len(s), p)
        assert abs(x) < 1
        assert encode_initial_condition([-v for v in s], 0, len(s), p) == -x


class TestMap:
    def test_fixed_point(self, params):
        assert np.allclose(symbol_map_iterate(1.0, np.ones(30), params), 1.0)

    def test_encoded_block_stays_bounded(self, params):
        s = np.array([1.0, -1.0] * 8)
        xs = symbol_map_iterate(encode_initial_condition(s, 0, 16, params), s, params)
        assert np.all(np.abs(xs) <= 1 + 1e-9)

    def test_perturbation_escapes(self, params):
        s = np.array([1.0, -1.0] * 20)
        x0 = encode_initial_condition(s, 0, 40, params) + 1e-3
        xs = symbol_map_iterate(x0, s, params)
        first_exit = int(np.argmax(np.abs(xs) > 1))
        assert first_exit > 0
        assert abs(first_exit - math.log(1e3) / 0.65) <= 2

    def test_initial_condition_bounded(self, params):
        with pytest.raises(ValueError):
            symbol_map_iterate(1.5, [1], params)


class TestSynthesize:
    def test_grid(self, params):
        x = synthesize(random_symbols(10, 0), params, 5)
        assert x.dt == pytest.approx(1 / 16)
        assert x.t0 == -5.0
        assert len(x) == (10 + 5) * 16

    def test_constant_symbols(self, params):
        x = synthesize(np.ones(120), params, 40)
        # after the leading transient and before the trailing one
        core = x.samples[(40 + 40) * 16:(40 + 60) * 16]
        assert np.max(np.abs(core - 1)) < 1e-6

    def test_single_pulse(self, params):
        x = synthesize([1.0], params, 8)
        assert np.allclose(x.samples, basis_pulse(x.times, params), atol=1e-15)

    def test_matches_sampled_closed_form(self, params):
        s = random_symbols(300, 1)
        x = synthesize(s, params, 40)
        idx = [x.index_of(n) for n in range(s.size)]
        assert np.max(np.abs(x.samples[idx] - sampled_closed_form(s, params, 40))) < 1e-9

    def test_matches_map_iteration(self, params):
        s = random_symbols(200, 2)
        x = synthesize(s, params, 40)
        xs = np.array([x.samples[x.index_of(n)] for n in range(s.size)])
        it = symbol_map_iterate(xs[0], s[:25], params)
        assert np.max(np.abs(it[:25] - xs[:25])) < 1e-6

    def test_empty(self, params):
        with pytest.raises(ValueError):
            synthesize([], params)

    @given(bipolar_lists(1, 30))
    def test_sign_symmetry(self, s):
        p = WaveformParams(oversampling=4)
        a = synthesize(s, p, 10).samples
        b = synthesize([-v for v in s], p, 10).samples
        assert np.array_equal(a, -b)

    def test_pulse_samples_grid(self, params):
        ps = pulse_samples(params, 3)
        assert ps.size == 4 * 16
        assert ps[3 * 16] == basis_pulse(0.0, params)


class TestBlocked:
    def test_long_blocks_converge_to_superposition(self, params):
        s = random_symbols(256, 3)
        blk = synthesize_blocked(s, params, 256)
        sup = synthesize(s, params, 40)
        k = sup.index_of(0.0)
        head = slice(0, 128 * 16)
        assert np.max(np.abs(blk.samples[head] - sup.samples[k:k + 128 * 16])) < 1e-9

    def test_block_starts_at_encoded_state(self, params):
        s = random_symbols(64, 4)
        blk = synthesize_blocked(s, params, 16)
        for j in range(4):
            assert blk.samples[j * 16 * 16] == pytest.approx(encode_initial_condition(s, j, 16, params), abs=1e-12)

    def test_stable_for_long_blocks(self, params):
        s = random_symbols(1024, 5)
        x = synthesize_blocked(s, params, 1024).samples
        # symbol-instant states stay in [-1, 1]; the forward map would blow up here
        assert np.max(np.abs(x[::16])) <= 1 + 1e-12
        assert np.max(np.abs(x)) < 3

    def test_partial_last_block(self, params):
        x = synthesize_blocked(random_symbols(40, 6), params, 32)
        assert len(x) == 40 * 16


class TestSampledSignal:
    def test_index_of(self):
        sig = SampledSignal(np.zeros(10), 0.25, -1.0)
        assert sig.index_of(0.0) == 4
        with pytest.raises(ValueError):
            sig.index_of(0.1)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            SampledSignal(np.array([np.nan]), 0.1)
        with pytest.raises(ValueError):
            SampledSignal(np.zeros(2), 0.0)

    def test_csv(self, tmp_path):
        sig = SampledSignal(np.array([0.5, -0.25]), 0.5, 1.0)
        path = tmp_path / "x.csv"
        sig.to_csv(path)
        rows = path.read_text().strip().splitlines()
        assert rows[0] == "time,amplitude"
        assert [tuple(map(float, r.split(","))) for r in rows[1:]] == [(1.0, 0.5), (1.5, -0.25)]
