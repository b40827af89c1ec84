"""Matched filtering and the pulse correlation coefficients.

``C[l, i] = alpha_l * R(tau_l + i/f)`` where ``R(s) = int p(t) p(t + s) dt`` is
the pulse autocorrelation.  R has a closed form: a decaying oscillation for
``|s| >= 1/f`` and a triangle-corrected expression inside one symbol period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .channel import ChannelModel
from .rng import as_generator
from .waveform import (DEFAULT_HISTORY_DEPTH, SampledSignal, WaveformParams, _bipolar,
                       pulse_samples)


def _ab(params: WaveformParams) -> tuple[float, float]:
    b, w, f = params.beta, params.omega, params.f
    a = (w * w - 3 * b * b) * f / (4 * b * (w * w + b * b))
    bb = (3 * w * w - b * b) * f / (4 * w * (w * w + b * b))
    return a, bb


def pulse_autocorrelation(shift, params: WaveformParams):
    """Closed-form ``R(s)``; even in ``s``.  Scalars or arrays."""
    s = np.abs(np.asarray(shift, dtype=float))
    b, w, f = params.beta, params.omega, params.f
    a, bb = _ab(params)
    e = math.exp(-b / f)
    d = np.exp(-b * s)
    c, sn = np.cos(w * s), np.sin(w * s)
    outer = d * (2.0 - e - 1.0 / e) * (a * c + bb * sn)
    inner = (a * (d * (2.0 - e) - e / d) * c + bb * (d * (2.0 - e) + e / d) * sn
             + 1.0 - f * s)
    out = np.where(s >= 1.0 / f - 1e-12, outer, inner) / f
    return float(out) if out.ndim == 0 else out


def pulse_energy(params: WaveformParams) -> float:
    """``E_p = R(0) = int p^2``."""
    return pulse_autocorrelation(0.0, params)


def correlation_coefficient(alpha: float, tau: float, i: int, params: WaveformParams) -> float:
    return alpha * pulse_autocorrelation(tau + i / params.f, params)


def isi_constant(channel: ChannelModel, params: WaveformParams) -> float:
    """K: the future-symbol ISI equals ``K * sum_i s_{n+i} e^{-b i/f}``."""
    b, w, f = params.beta, params.omega, params.f
    a, bb = _ab(params)
    e = math.exp(-b / f)
    tau = channel.delays
    terms = (channel.alphas * (2.0 - e - 1.0 / e) * np.exp(-b * tau)
             * (a * np.cos(w * tau) + bb * np.sin(w * tau)))
    return float(terms.sum()) / f


@dataclass(frozen=True)
class CorrelationTable:
    """``coeffs[l, i + depth]`` holds C[l, i] for ``-depth <= i <= depth``."""

    coeffs: np.ndarray
    depth: int
    p_total: float
    k_const: float
    e_p: float
    decay: float

    def c(self, l: int, i: int) -> float:
        if abs(i) > self.depth:
            return 0.0
        return float(self.coeffs[l, i + self.depth])

    @property
    def effective(self) -> np.ndarray:
        """Path-summed coefficients ``sum_l C[l, i]`` for i = -depth..depth."""
        return self.coeffs.sum(axis=0)

    def eff(self, i: int) -> float:
        if abs(i) > self.depth:
            return 0.0
        return float(self.effective[i + self.depth])

    @property
    def future_bound(self) -> float:
        """Half-width ``|K| / (e^{b/f} - 1)`` of the future-ISI support."""
        return abs(self.k_const) / (1.0 / self.decay - 1.0)

    def to_csv(self, path) -> None:
        n_paths = self.coeffs.shape[0]
        idx = np.arange(-self.depth, self.depth + 1)
        rows = [(l, i, self.coeffs[l, i + self.depth]) for l in range(n_paths) for i in idx]
        with open(path, "w") as fh:
            fh.write("l,i,C\n")
            for l, i, c in rows:
                fh.write(f"{l},{i},{float(c)!r}\n")


def min_table_depth(channel: ChannelModel, params: WaveformParams) -> int:
    return 5 + int(math.ceil(channel.delays[-1] * params.f - 1e-9))


def default_table_depth(channel: ChannelModel, params: WaveformParams) -> int:
    return DEFAULT_HISTORY_DEPTH + int(math.ceil(channel.delays[-1] * params.f - 1e-9))


def build_correlation_table(channel: ChannelModel, params: WaveformParams,
                            depth: int | None = None) -> CorrelationTable:
    if depth is None:
        depth = default_table_depth(channel, params)
    if depth < min_table_depth(channel, params):
        raise ValueError(f"table depth must be >= {min_table_depth(channel, params)}")
    i = np.arange(-depth, depth + 1)
    shifts = channel.delays[:, None] + i[None, :] / params.f
    coeffs = channel.alphas[:, None] * pulse_autocorrelation(shifts, params)
    return CorrelationTable(
        coeffs=coeffs,
        depth=depth,
        p_total=float(coeffs[:, depth].sum()),
        k_const=isi_constant(channel, params),
        e_p=pulse_energy(params),
        decay=params.decay,
    )


@dataclass(frozen=True)
class FilteredSeries:
    y: np.ndarray
    sigma_w: float

    def __post_init__(self):
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be >= 0")


def filtered_noise_sigma(n0: float, e_p: float) -> float:
    """Standard deviation of the matched-filter noise, ``sqrt(n0/2 * E_p)``."""
    return math.sqrt(0.5 * n0 * e_p)


def symbol_level_output(symbols, table: CorrelationTable, sigma_w: float = 0.0,
                        seed=0) -> FilteredSeries:
    """``y_n = sum_i c_i s_{n+i} + W_n`` with i.i.d. Gaussian ``W_n``.

    ``c_i`` are the path-summed table coefficients; symbols outside the given
    sequence count as zero, so callers pad with real lead/tail symbols.
    """
    s = _bipolar(symbols)
    d = table.depth
    y = np.convolve(s, table.effective[::-1])[d:d + s.size]
    if sigma_w > 0:
        y = y + sigma_w * as_generator(seed).standard_normal(s.size)
    return FilteredSeries(y, sigma_w)


def matched_filter(received: SampledSignal, params: WaveformParams,
                   history_depth: int = DEFAULT_HISTORY_DEPTH,
                   method: str = "direct") -> SampledSignal:
    """``y(t) = int p(tau - t) r(tau) dtau`` on the input grid (Riemann sum).

    ``method`` is passed to :func:`scipy.signal.convolve` ("direct" or "fft").
    """
    if abs(received.dt * params.f * params.oversampling - 1.0) > 1e-9:
        raise ValueError("received.dt must equal 1/(f*oversampling)")
    pulse = pulse_samples(params, history_depth)
    full = scipy.signal.convolve(received.samples, pulse[::-1], mode="full", method=method)
    lag = params.oversampling - 1
    y = received.dt * full[lag:lag + len(received)]
    return SampledSignal(y, received.dt, received.t0)


def filter_at_symbols(received: SampledSignal, params: WaveformParams, n_symbols: int,
                      history_depth: int = DEFAULT_HISTORY_DEPTH,
                      first_symbol: int = 0) -> np.ndarray:
    """Matched-filter output sampled at ``t = n/f`` only, by direct dot products."""
    os_ = params.oversampling
    pulse = pulse_samples(params, history_depth)
    k0 = received.index_of(first_symbol / params.f) - history_depth * os_
    lo_pad = max(0, -k0)
    need = k0 + (n_symbols - 1) * os_ + pulse.size
    hi_pad = max(0, need - len(received))
    r = np.pad(received.samples, (lo_pad, hi_pad))
    windows = np.lib.stride_tricks.sliding_window_view(r, pulse.size)
    starts = k0 + lo_pad + os_ * np.arange(n_symbols)
    y = np.empty(n_symbols)
    chunk = 4096
    for a in range(0, n_symbols, chunk):
        y[a:a + chunk] = windows[starts[a:a + chunk]] @ pulse
    return received.dt * y
