"""Conventional comparators: symbol-rate BPSK, MMSE linear equalizer, LS channel estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .matched_filter import CorrelationTable, pulse_autocorrelation
from .rng import as_generator
from .waveform import WaveformParams, _bipolar


@dataclass(frozen=True)
class EqualizerTaps:
    """FIR weights; ``z_m = sum_k w_k u_{m + lead - k}`` with ``lead = decision_delay - cursor``."""

    weights: np.ndarray
    decision_delay: int
    cursor: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("equalizer weights must be finite")

    @property
    def lead(self) -> int:
        return self.decision_delay - self.cursor


@dataclass(frozen=True)
class ChannelEstimate:
    taps: tuple
    residual: float
    rows: int = 0

    @property
    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.taps])

    @property
    def noise_var(self) -> float:
        """Residual-based per-sample noise variance."""
        dof = self.rows - len(self.taps)
        return self.residual ** 2 / dof if dof > 0 else 0.0

    def as_channel(self, floor: float = 1e-6) -> ChannelModel:
        """Channel model with the estimated gains (clipped positive)."""
        return ChannelModel(tuple((d, max(g, floor)) for d, g in self.taps))


def bpsk_transmit(symbols, channel: ChannelModel, f: float = 1.0) -> np.ndarray:
    """Noiseless symbol-rate received samples ``sum_l alpha_l s_{n - d_l}``."""
    s = _bipolar(symbols)
    d = channel.symbol_delays(f)
    r = np.zeros(s.size)
    for shift, alpha in zip(d, channel.alphas):
        r[shift:] += alpha * s[:s.size - shift]
    return r


def bpsk_receive(symbols, channel: ChannelModel, n0: float, seed=0, f: float = 1.0) -> np.ndarray:
    """BPSK over the channel with ``E_b = 1``: noise variance ``n0/2`` per symbol."""
    r = bpsk_transmit(symbols, channel, f)
    if n0 > 0:
        r = r + math.sqrt(n0 / 2) * as_generator(seed).standard_normal(r.size)
    return r


def bpsk_detect(equalized) -> np.ndarray:
    return np.where(np.asarray(equalized) > 0, 1.0, -1.0)


def channel_response(channel_est) -> np.ndarray:
    """Causal tap vector ``g[j]`` from an estimate, a model or an array."""
    if isinstance(channel_est, ChannelEstimate):
        taps = channel_est.taps
    elif isinstance(channel_est, ChannelModel):
        taps = channel_est.taps
    else:
        return np.asarray(channel_est, dtype=float)
    d = np.array([t[0] for t in taps])
    di = np.round(d).astype(int)
    if np.any(np.abs(d - di) > 1e-9):
        raise ValueError("symbol-rate model needs whole-symbol delays")
    g = np.zeros(di[-1] + 1)
    for k, (_, gain) in zip(di, taps):
        g[k] += gain
    return g


def mmse_design(channel_est, noise_var: float, num_taps: int = 15, delay: int = 7,
                cursor: int = 0) -> EqualizerTaps:
    """Solve ``(H^T H + noise_var I) w = H^T e_delay``.

    ``H`` maps the received window ``[u_n, ..., u_{n-M+1}]`` onto the symbol
    window (rows are symbols), so ``H^T H`` is the received autocorrelation and
    the solution minimises ``E|w^T u - s_{n - cursor - delay}|^2`` for unit
    power symbols.  ``cursor`` is the index of the main tap in the causal
    response; ``delay`` is counted from it.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    g = channel_response(channel_est)
    mem = g.size
    if num_taps < 1:
        raise ValueError("num_taps must be >= 1")
    n_sym = num_taps + mem - 1
    total_delay = cursor + delay
    if not 0 <= total_delay < n_sym:
        raise ValueError("decision delay falls outside the equalizer span")
    conv = np.zeros((num_taps, n_sym))
    for k in range(num_taps):
        conv[k, k:k + mem] = g
    h = conv.T
    lhs = h.T @ h + noise_var * np.eye(num_taps)
    rhs = h.T @ np.eye(n_sym)[total_delay]
    w = np.linalg.solve(lhs, rhs)
    return EqualizerTaps(w, total_delay, cursor)


def equalize(series, taps: EqualizerTaps) -> np.ndarray:
    """Apply the equalizer; output index m estimates symbol m."""
    u = np.asarray(series, dtype=float)
    w = taps.weights
    lead = taps.lead
    full = np.convolve(u, w)
    # full[k] = sum_j w_j u_{k-j}; we want k = m + lead
    idx = np.arange(u.size) + lead
    out = np.zeros(u.size)
    ok = (idx >= 0) & (idx < full.size)
    out[ok] = full[idx[ok]]
    return out


def filtered_channel_response(table: CorrelationTable, rel_floor: float = 1e-6) -> tuple[np.ndarray, int]:
    """Causal response of the matched-filter output and the cursor index.

    ``y_n = sum_i c_i s_{n+i}`` is rewritten as ``sum_j g_j s_{n+a-j}`` with
    ``g_j = c_{a-j}``; negligible outer taps are trimmed.
    """
    c = table.effective
    keep = np.flatnonzero(np.abs(c) > rel_floor * abs(table.p_total))
    lo, hi = keep[0], keep[-1]
    g = c[lo:hi + 1][::-1]
    cursor = hi - table.depth
    return g, cursor


def mmse_for_paths(channel_est, table: CorrelationTable, sigma_w: float, num_taps: int = 15,
                   delay: int = 7) -> EqualizerTaps:
    """Conventional MMSE from the path gains, for the matched-filter output scaled by ``1/E_p``.

    Only the multipath taps are equalized; the pulse's own ISI is left to the
    (zero) threshold, as a conventional receiver would.
    """
    return mmse_design(channel_est, (sigma_w / table.e_p) ** 2, num_taps, delay)


def mmse_for_filtered(table: CorrelationTable, sigma_w: float, num_taps: int = 15,
                      delay: int = 7) -> EqualizerTaps:
    """MMSE designed on the full filtered response (pulse ISI included)."""
    g, cursor = filtered_channel_response(table)
    # the filtered output leads the causal model by `cursor` samples
    eq = mmse_design(g, sigma_w ** 2, num_taps, delay, cursor=cursor)
    return EqualizerTaps(eq.weights, eq.decision_delay, eq.cursor)


def _regressors(training_tx, delay_grid, params: WaveformParams | None, f: float,
                corr_depth: int):
    s = _bipolar(training_tx)
    n = s.size
    delays = np.asarray(delay_grid, dtype=float)
    if params is None:
        d = np.round(delays * f).astype(int)
        if np.any(np.abs(delays * f - d) > 1e-9):
            raise ValueError("symbol-rate LS needs whole-symbol delays")
        first = int(d.max())
        rows = np.arange(first, n)
        x = np.column_stack([s[rows - k] for k in d])
        return x, rows
    # matched-filter output model: y_n = sum_l alpha_l sum_m s_m R(tau_l + (m-n)/f)
    i = np.arange(-corr_depth - int(math.ceil(delays.max() * params.f)), corr_depth + 1)
    lo_reach = -i[0]
    hi_reach = i[-1]
    rows = np.arange(lo_reach, n - hi_reach)
    cols = []
    for tau in delays:
        kern = pulse_autocorrelation(tau + i / params.f, params)
        full = np.convolve(s, kern[::-1])
        # full[n + hi_reach] = sum_i kern_i s_{n+i}
        cols.append(full[rows + hi_reach])
    return np.column_stack(cols), rows


def ls_estimate(training_tx, training_rx, delay_grid, params: WaveformParams | None = None,
                f: float = 1.0, corr_depth: int = 40) -> ChannelEstimate:
    """Least-squares path gains on a known delay grid.

    With ``params`` the received samples are matched-filter outputs of the
    chaotic waveform; otherwise they are symbol-rate BPSK samples.  Only rows
    whose whole regressor lies inside the training block are used.
    """
    rx = np.asarray(training_rx, dtype=float)
    x, rows = _regressors(training_tx, delay_grid, params, f, corr_depth)
    n_unknown = len(delay_grid)
    if rows.size < 2 * n_unknown:
        need = 2 * n_unknown + len(training_tx) - rows.size
        raise ValueError(f"training block too short: {len(training_tx)} symbols, need at least {need}")
    if np.linalg.matrix_rank(x) < n_unknown:
        raise ValueError("training regressors are rank deficient")
    target = rx[rows]
    gains, *_ = np.linalg.lstsq(x, target, rcond=None)
    residual = float(np.linalg.norm(target - x @ gains))
    return ChannelEstimate(tuple(zip((float(d) for d in delay_grid), gains.tolist())),
                           residual, int(rows.size))
