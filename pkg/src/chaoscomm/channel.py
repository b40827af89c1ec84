"""Multipath tapped-delay channel, AWGN and channel-error models."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rng import GAMMA, as_generator, stream
from .waveform import SampledSignal, _bipolar, sampled_closed_form


@dataclass(frozen=True)
class ChannelModel:
    """Paths as ``(delay seconds, linear attenuation)`` pairs, first delay 0."""

    taps: tuple
    gamma: float | None = None

    def __post_init__(self):
        taps = tuple((float(d), float(a)) for d, a in self.taps)
        if not taps:
            raise ValueError("channel needs at least one path")
        delays = [d for d, _ in taps]
        if delays[0] != 0.0:
            raise ValueError("first path delay must be 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("path delays must be strictly increasing")
        if any(not (a > 0 and math.isfinite(a)) for _, a in taps):
            raise ValueError("attenuations must be positive and finite")
        object.__setattr__(self, "taps", taps)

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for _, a in self.taps])

    @property
    def n_paths(self) -> int:
        return len(self.taps)

    def symbol_delays(self, f: float) -> np.ndarray:
        """Delays in symbol periods; raises if any is not an integer."""
        d = self.delays * f
        di = np.round(d).astype(int)
        if np.any(np.abs(d - di) > 1e-9):
            raise ValueError("path delays must be whole symbol periods for this operation")
        return di


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN level: one-sided PSD ``n0`` (with the Eb/N0 it came from) and a seed."""

    ebn0_db: float
    n0: float
    seed: int = 0

    def __post_init__(self):
        if not self.n0 >= 0:
            raise ValueError("n0 must be non-negative")

    @classmethod
    def from_ebn0(cls, ebn0_db: float, e_b: float, seed: int = 0) -> "NoiseSpec":
        return cls(ebn0_db, ebn0_to_n0(ebn0_db, e_b), seed)


def ebn0_to_n0(ebn0_db: float, e_b: float) -> float:
    return e_b / 10.0 ** (ebn0_db / 10.0)


def exponential_channel(delays: Sequence[float], gamma: float) -> ChannelModel:
    """Paths with ``alpha_l = exp(-gamma * tau_l)``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    delays = [float(d) for d in delays]
    if any(d < 0 for d in delays):
        raise ValueError("delays must be non-negative")
    return ChannelModel(tuple((d, math.exp(-gamma * d)) for d in delays), gamma=float(gamma))


def propagate(signal: SampledSignal, channel: ChannelModel) -> SampledSignal:
    """Sum of delayed, attenuated copies; output is longer by the largest delay."""
    shifts = channel.delays / signal.dt
    k = np.round(shifts).astype(int)
    if np.any(np.abs(shifts - k) > 1e-6):
        raise ValueError("path delays are not on the sample grid; increase oversampling")
    x = signal.samples
    out = np.zeros(x.size + k[-1])
    for shift, alpha in zip(k, channel.alphas):
        out[shift:shift + x.size] += alpha * x
    return SampledSignal(out, signal.dt, signal.t0)


def add_awgn(signal: SampledSignal, noise: NoiseSpec, rng=None) -> SampledSignal:
    """Add white Gaussian noise with per-sample variance ``n0 / (2 dt)``."""
    rng = as_generator(noise.seed if rng is None else rng)
    sigma = math.sqrt(noise.n0 / (2.0 * signal.dt))
    w = rng.standard_normal(len(signal))
    return SampledSignal(signal.samples + sigma * w, signal.dt, signal.t0)


def perturb_channel(channel: ChannelModel, epsilon: float, seed=0) -> ChannelModel:
    """Each attenuation moves by ``Uniform[-eps*alpha, +eps*alpha]``; delays kept."""
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must be in [0, 1)")
    if epsilon == 0:
        return channel
    rng = as_generator(seed)
    a = channel.alphas
    a_hat = a + rng.uniform(-epsilon, epsilon, size=a.size) * a
    return ChannelModel(tuple(zip(channel.delays, a_hat)), gamma=channel.gamma)


def draw_gamma(gamma_range: Iterable[float], frame_index: int, seed: int) -> float:
    lo, hi = (float(v) for v in gamma_range)
    if lo > hi:
        raise ValueError("gamma range must have lo <= hi")
    if lo == hi:
        return lo
    return float(stream(seed, GAMMA, frame_index).uniform(lo, hi))


def quasi_static_channel(delays: Sequence[float], gamma_range, frame_index: int,
                         seed: int) -> ChannelModel:
    """Exponential channel with gamma drawn per frame, keyed by (seed, frame)."""
    return exponential_channel(delays, draw_gamma(gamma_range, frame_index, seed))


def read_channel_file(path) -> ChannelModel:
    """Parse ``delay attenuation`` lines (comma or whitespace; ``#`` comments)."""
    taps = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{path}: expected 'delay attenuation', got {line!r}")
            taps.append((float(parts[0]), float(parts[1])))
    return ChannelModel(tuple(taps))


def write_channel_file(channel: ChannelModel, path) -> None:
    with open(path, "w") as fh:
        fh.write("# delay attenuation\n")
        for d, a in channel.taps:
            fh.write(f"{d!r} {a!r}\n")


def received_symbol_rate(symbols, channel: ChannelModel, params,
                         history_depth: int = 40) -> np.ndarray:
    """Noiseless ``r_n = r(n/f)`` for each symbol index, without sampling a waveform.

    Symbols outside the sequence are zero, as in :func:`~chaoscomm.waveform.synthesize`.
    """
    s = _bipolar(symbols)
    d = channel.symbol_delays(params.f)
    pad = int(d[-1])
    x = sampled_closed_form(np.concatenate([np.zeros(pad), s]), params, history_depth)
    r = np.zeros(s.size)
    for shift, alpha in zip(d, channel.alphas):
        r += alpha * x[pad - shift: pad - shift + s.size]
    return r
