"""Chaotic basis pulse, initial-condition encoding and waveform synthesis.

The transmitter is the hybrid oscillator whose exact solution is a
superposition of shifted copies of a single basis pulse ``p(t)``, one per
bipolar symbol.  Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_HISTORY_DEPTH = 40
DEFAULT_BLOCK_LENGTH = 32


@dataclass(frozen=True)
class WaveformParams:
    """Oscillator parameters.

    f is the base frequency (symbol rate, Hz), beta the growth exponent
    (1/s) and oversampling the number of samples per symbol period.
    """

    f: float = 1.0
    beta: float = 0.65
    oversampling: int = 16

    def __post_init__(self):
        if not (math.isfinite(self.f) and self.f > 0):
            raise ValueError(f"f must be positive, got {self.f}")
        if not (0 < self.beta <= self.f * math.log(2) * (1 + 1e-12)):
            raise ValueError(
                f"beta must satisfy 0 < beta <= f*ln2 = {self.f * math.log(2):.6g}, got {self.beta}"
            )
        if int(self.oversampling) != self.oversampling or self.oversampling < 2:
            raise ValueError(f"oversampling must be an integer >= 2, got {self.oversampling}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.f

    @property
    def dt(self) -> float:
        return 1.0 / (self.f * self.oversampling)

    @property
    def decay(self) -> float:
        """Per-symbol envelope factor e^{-beta/f}."""
        return math.exp(-self.beta / self.f)


@dataclass(frozen=True)
class SymbolSequence:
    """Information bits and the matching bipolar symbols ``s = 2b - 1``."""

    bits: np.ndarray
    symbols: np.ndarray = field(init=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int8).ravel()
        if bits.size < 1:
            raise ValueError("a symbol sequence needs at least one bit")
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "symbols", 2.0 * bits - 1.0)

    @classmethod
    def from_symbols(cls, symbols: Sequence[float]) -> "SymbolSequence":
        s = np.asarray(symbols, dtype=float).ravel()
        if np.any((s != 1.0) & (s != -1.0)):
            raise ValueError("symbols must be -1 or +1")
        return cls(((s + 1) // 2).astype(np.int8))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SymbolSequence":
        return cls(rng.integers(0, 2, size=n, dtype=np.int8))

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def length(self) -> int:
        return len(self)


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled real waveform; sample k sits at ``t0 + k*dt``."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises if ``t`` is not on the grid."""
        k = (t - self.t0) / self.dt
        ki = int(round(k))
        if abs(k - ki) > 1e-6:
            raise ValueError(f"time {t} is not on the sample grid")
        return ki

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.samples]), delimiter=",",
                   header="time,amplitude", comments="", fmt="%.17g")


def _bipolar(symbols) -> np.ndarray:
    s = symbols.symbols if isinstance(symbols, SymbolSequence) else symbols
    return np.asarray(s, dtype=float).ravel()


def basis_pulse(t, params: WaveformParams):
    """Evaluate the basis pulse p(t); accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("basis_pulse needs finite t")
    b, w, f = params.beta, params.omega, params.f
    osc = np.cos(w * t_arr) - (b / w) * np.sin(w * t_arr)
    with np.errstate(over="ignore"):
        before = (1.0 - math.exp(-b / f)) * np.exp(b * np.minimum(t_arr, 0.0)) * osc
    main = 1.0 - np.exp(b * (np.minimum(t_arr, 1.0 / f) - 1.0 / f)) * osc
    out = np.where(t_arr < 0, before, np.where(t_arr < 1.0 / f, main, 0.0))
    return float(out) if out.ndim == 0 else out


def encode_initial_condition(symbols, block_index: int, block_length: int,
                             params: WaveformParams) -> float:
    """Reset value that encodes one block of ``block_length`` symbols.

    Block ``j`` covers symbols ``j*N .. (j+1)*N - 1`` (zero based).  The
    weights restart at 1 for the first symbol of every block so that the
    reset state is the block's own initial condition.
    """
    s = _bipolar(symbols)
    if block_index < 0 or block_length < 1:
        raise ValueError("block_index must be >= 0 and block_length >= 1")
    start = block_index * block_length
    stop = start + block_length
    if stop > s.size:
        raise IndexError(f"need {stop} symbols to encode block {block_index}, have {s.size}")
    lam = params.decay
    weights = lam ** np.arange(block_length)
    return float((1.0 - lam) * np.dot(s[start:stop], weights))


def symbol_map_iterate(x0: float, symbols, params: WaveformParams) -> np.ndarray:
    """Forward iterate the sampled map ``x_{n+1} = e^{b/f} x_n - (e^{b/f}-1) s_n``.

    Returns ``x_0 .. x_N`` for N symbols.
    """
    if abs(x0) > 1.0:
        raise ValueError("|x0| must be <= 1")
    s = _bipolar(symbols)
    g = math.exp(params.beta / params.f)
    x = np.empty(s.size + 1)
    x[0] = x0
    for n in range(s.size):
        x[n + 1] = g * x[n] - (g - 1.0) * s[n]
    return x


def pulse_samples(params: WaveformParams, history_depth: int = DEFAULT_HISTORY_DEPTH) -> np.ndarray:
    """p(t) on the grid ``t = (k - depth*os) dt`` for ``k < (depth+1)*os``."""
    os_ = params.oversampling
    k = np.arange((history_depth + 1) * os_) - history_depth * os_
    return basis_pulse(k * params.dt, params)


def synthesize(symbols, params: WaveformParams,
               history_depth: int = DEFAULT_HISTORY_DEPTH) -> SampledSignal:
    """Superpose shifted basis pulses, ``x(t) = sum_m s_m p(t - m/f)``.

    Symbol m sits at ``t = m/f``.  The output spans ``[-depth/f, N/f)``,
    which is the full support of the truncated superposition; symbols
    outside ``0..N-1`` are zero.
    """
    if history_depth < 1:
        raise ValueError("history_depth must be >= 1")
    s = _bipolar(symbols)
    if s.size == 0:
        raise ValueError("cannot synthesize an empty symbol sequence")
    os_ = params.oversampling
    pulse = pulse_samples(params, history_depth)
    n_out = (s.size + history_depth) * os_
    x = np.zeros(n_out)
    # polyphase form: each phase r is a plain FIR over the symbol stream
    for r in range(os_):
        taps = pulse[r::os_]
        x[r::os_] = np.convolve(s, taps)[: s.size + history_depth]
    return SampledSignal(x, params.dt, -history_depth / params.f)


def synthesize_blocked(symbols, params: WaveformParams,
                       block_length: int = DEFAULT_BLOCK_LENGTH) -> SampledSignal:
    """Waveform produced by resetting the oscillator every ``block_length`` symbols.

    Each block starts from :func:`encode_initial_condition` and evolves as
    ``x(t) = s_n + (x_n - s_n) e^{b(t-n/f)} (cos wt - (b/w) sin wt)`` on
    ``[n/f, (n+1)/f)``.  Output spans ``[0, N/f)``.

    The block's sampled states are taken from the backward recursion
    ``x_k = (1-e^{-b/f}) s_k + e^{-b/f} x_{k+1}`` (``x_N = 0``), which equals
    the forward map started at the reset value but does not amplify rounding
    by ``e^{b N/f}``.
    """
    s = _bipolar(symbols)
    n_sym = s.size
    if n_sym == 0 or block_length < 1:
        raise ValueError("need at least one symbol and block_length >= 1")
    os_ = params.oversampling
    tau = np.arange(os_) * params.dt
    envelope = np.exp(params.beta * tau) * (np.cos(params.omega * tau)
                                            - params.beta / params.omega * np.sin(params.omega * tau))
    x = np.empty(n_sym * os_)
    for j in range(-(-n_sym // block_length)):
        # a short final block is encoded on its own
        block = s[j * block_length:(j + 1) * block_length]
        xs = _block_states(block, params.decay)
        seg = block[:, None] + (xs[:-1] - block)[:, None] * envelope[None, :]
        x[j * block_length * os_:j * block_length * os_ + seg.size] = seg.ravel()
    return SampledSignal(x, params.dt, 0.0)


def _block_states(block: np.ndarray, lam: float) -> np.ndarray:
    xs = np.zeros(block.size + 1)
    for k in range(block.size - 1, -1, -1):
        xs[k] = (1.0 - lam) * block[k] + lam * xs[k + 1]
    return xs


def sampled_closed_form(symbols, params: WaveformParams,
                        history_depth: int = DEFAULT_HISTORY_DEPTH) -> np.ndarray:
    """x at ``t = n/f`` for every symbol index, from the truncated future sum."""
    s = _bipolar(symbols)
    lam = params.decay
    taps = (1.0 - lam) * lam ** np.arange(history_depth + 1)
    padded = np.concatenate([s, np.zeros(history_depth)])
    return np.correlate(padded, taps, mode="valid")[: s.size]
