"""Return maps, judgment thresholds and decision-feedback detection.

All thresholds are linear in the conditioning symbols, so detection is
written as ``theta_n = base_n + sum_j w_j * s_hat_{n-j}``.  Decisions are
first taken with the true past fed back (one vectorised pass); decision
feedback only changes anything after an error, so those stretches are then
replayed sequentially until the fed-back window is error free again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelModel
from .matched_filter import CorrelationTable
from .waveform import WaveformParams

KINDS = ("zero", "prefilter", "subopt", "genie")


class PreambleError(ValueError):
    """Not enough known or decided past symbols to form a threshold."""


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: str = "subopt"
    past_depth: int | None = None
    future_depth: int = 40

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {KINDS}")
        if self.past_depth is not None and self.past_depth < 1:
            raise ValueError("past_depth must be >= 1")
        if self.future_depth < 1:
            raise ValueError("future_depth must be >= 1")


def default_past_depth(channel: ChannelModel, params: WaveformParams) -> int:
    return 5 + int(math.ceil(channel.delays[-1] * params.f - 1e-9))


@dataclass
class ReturnMapPoint:
    u_n: float
    u_next: float
    group_label: tuple
    true_s_n: int | None = None


@dataclass
class DetectionResult:
    decided_symbols: np.ndarray
    thresholds_used: np.ndarray
    start: int
    error_count: int | None = None
    decisions: int = 0
    error_positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def return_map(series: Sequence[float], symbols: Sequence[float] | None = None,
               label_offsets: Sequence[int] = ()) -> list[ReturnMapPoint]:
    """Pairs ``(u_n, u_{n+1})`` labelled by ``symbols[n + o]`` for each offset."""
    u = np.asarray(series, dtype=float)
    if u.size < 2:
        raise ValueError("return map needs at least two samples")
    s = None if symbols is None else np.asarray(symbols)
    lo = max([0] + [-o for o in label_offsets])
    hi = u.size - 1
    if s is not None:
        hi = min(hi, s.size - max([0] + list(label_offsets)))
    points = []
    for n in range(lo, hi):
        label = tuple(int(s[n + o]) for o in label_offsets) if s is not None else ()
        points.append(ReturnMapPoint(float(u[n]), float(u[n + 1]), label,
                                     None if s is None else int(s[n])))
    return points


def write_return_map_csv(points: list[ReturnMapPoint], path) -> None:
    """``path`` may also be an open text stream."""
    if hasattr(path, "write"):
        _write_points(points, path)
        return
    with open(path, "w") as fh:
        _write_points(points, fh)


def _write_points(points, fh):
    fh.write("u_n,u_next,group,s_n\n")
    for p in points:
        group = ";".join(f"{v:+d}" for v in p.group_label)
        s = "" if p.true_s_n is None else f"{p.true_s_n:+d}"
        fh.write(f"{p.u_n!r},{p.u_next!r},{group},{s}\n")


def branch_intercepts(points: list[ReturnMapPoint], slope: float, tol: float = 1e-6) -> np.ndarray:
    """Distinct values of ``u_next - slope*u_n`` (one per branch line)."""
    c = np.sort([p.u_next - slope * p.u_n for p in points])
    if c.size == 0:
        return c
    breaks = np.flatnonzero(np.diff(c) > tol)
    groups = np.split(c, breaks + 1)
    return np.array([g.mean() for g in groups])


def count_branches(points: list[ReturnMapPoint], slope: float, tol: float = 1e-6) -> int:
    return int(branch_intercepts(points, slope, tol).size)


def _prefilter_weights(channel: ChannelModel, params: WaveformParams) -> np.ndarray:
    lam = params.decay
    d = channel.symbol_delays(params.f)
    depth = int(d[-1])
    w = np.zeros(depth + 1)
    for shift, alpha in zip(d[1:], channel.alphas[1:]):
        if shift < 1:
            raise ValueError("regrouping needs every delayed path at least one symbol late")
        w[shift] += (1.0 - lam) * alpha
    return w


def _past_symbols(past_symbols, needed: int) -> np.ndarray:
    past = np.asarray(past_symbols, dtype=float)
    if past.size < needed:
        raise PreambleError(f"need {needed} past symbols, have {past.size}")
    return past


def prefilter_threshold(r_next: float, past_symbols, channel: ChannelModel,
                        params: WaveformParams) -> float:
    """Regrouped judgment line before the matched filter.

    ``past_symbols[-1]`` is ``s_{n-1}``.
    """
    w = _prefilter_weights(channel, params)
    past = _past_symbols(past_symbols, w.size - 1)
    fb = sum(w[j] * past[-j] for j in range(1, w.size))
    return params.decay * r_next + fb


def suboptimal_threshold(past_symbols, table: CorrelationTable, past_depth: int) -> float:
    """``I_past``: decided past symbols weighted by the table, truncated at ``past_depth``."""
    past = _past_symbols(past_symbols, past_depth)
    return float(sum(table.eff(-j) * past[-j] for j in range(1, past_depth + 1)))


def future_isi(future_symbols, table: CorrelationTable, future_depth: int) -> float:
    fut = np.asarray(future_symbols, dtype=float)[:future_depth]
    weights = table.decay ** np.arange(1, fut.size + 1)
    return float(table.k_const * np.dot(fut, weights))


def optimal_threshold(past_symbols, future_symbols, table: CorrelationTable,
                      past_depth: int, future_depth: int) -> float:
    """Full ISI ``I = I_past + I_future`` (needs the true future symbols)."""
    return (suboptimal_threshold(past_symbols, table, past_depth)
            + future_isi(future_symbols, table, future_depth))


def judgment_distance(channel: ChannelModel, table: CorrelationTable | None,
                      params: WaveformParams, stage: str = "filtered") -> float:
    """Horizontal gap between the ``s_n = +1`` and ``s_n = -1`` branches.

    ``prefilter``: after regrouping by past symbols; ``prefilter-ungrouped``:
    narrowest gap across all past-symbol combinations; ``filtered``: after the
    matched filter, with every other symbol fixed.
    """
    lam = params.decay
    if stage == "prefilter":
        return 2.0 * (1.0 - lam)
    if stage == "prefilter-ungrouped":
        return 2.0 * (1.0 - lam) * (1.0 - channel.alphas[1:].sum())
    if stage == "filtered":
        if table is None:
            raise ValueError("filtered judgment distance needs a correlation table")
        return 2.0 * sum(table.c(l, 0) - lam * table.c(l, -1) for l in range(channel.n_paths))
    raise ValueError(f"unknown stage {stage!r}")


def _feedback_weights(policy: ThresholdPolicy, table, channel, params) -> np.ndarray:
    """``w[j]`` multiplies ``s_hat_{n-j}``; ``w[0]`` is unused."""
    if policy.kind == "zero":
        return np.zeros(1)
    if policy.kind == "prefilter":
        return _prefilter_weights(channel, params)
    depth = policy.past_depth or default_past_depth(channel, params)
    if policy.kind == "genie":
        depth = policy.past_depth or table.depth
    return np.concatenate([[0.0], [table.eff(-j) for j in range(1, depth + 1)]])


def required_preamble(policy: ThresholdPolicy, table, channel, params) -> int:
    return _feedback_weights(policy, table, channel, params).size - 1


def detect(series: Sequence[float], policy: ThresholdPolicy, table: CorrelationTable | None = None,
           channel: ChannelModel | None = None, params: WaveformParams | None = None,
           preamble: Sequence[float] = (), truth: Sequence[float] | None = None,
           stop: int | None = None, feedback: str = "decided") -> DetectionResult:
    """Decide ``s_n`` for ``n = len(preamble) .. stop-1``.

    ``series[n]`` is the sample for symbol n (filtered ``y_n``, or ``r_n`` for
    the prefilter policy, which also reads ``series[n+1]``).  ``truth`` holds
    the transmitted symbols; the genie policy needs it, and with it the error
    count is filled in.  ``feedback="truth"`` feeds the true past back instead
    of the decisions.  Ties decide -1.
    """
    u = np.asarray(series, dtype=float)
    pre = np.asarray(preamble, dtype=float)
    start = pre.size
    if stop is None:
        stop = u.size - (1 if policy.kind == "prefilter" else 0)
    if policy.kind in ("subopt", "genie") and table is None:
        raise ValueError(f"policy {policy.kind!r} needs a correlation table")
    if policy.kind == "prefilter" and (channel is None or params is None):
        raise ValueError("prefilter policy needs the channel and waveform parameters")
    if policy.kind == "genie" and truth is None:
        raise ValueError("genie policy needs the true symbols")
    w = _feedback_weights(policy, table, channel, params)
    depth = w.size - 1
    if start < depth:
        raise PreambleError(f"policy {policy.kind!r} needs a preamble of {depth} symbols, got {start}")

    s_true = None if truth is None else np.asarray(truth, dtype=float)
    # reference past: truth when known, else preamble followed by zeros
    ref = np.zeros(u.size) if s_true is None else s_true[:u.size].copy()
    ref[:start] = pre

    n_idx = np.arange(start, stop)
    base = np.zeros(n_idx.size)
    if policy.kind == "prefilter":
        base = params.decay * u[n_idx + 1]
    elif policy.kind == "genie":
        fd = policy.future_depth
        padded = np.concatenate([s_true, np.zeros(fd)])
        fut = np.zeros(n_idx.size)
        lam_pow = table.decay ** np.arange(1, fd + 1)
        for i in range(1, fd + 1):
            fut += table.k_const * lam_pow[i - 1] * padded[n_idx + i]
        base = fut

    theta = base.copy()
    for j in range(1, depth + 1):
        if w[j] != 0.0:
            theta += w[j] * ref[n_idx - j]
    decided = np.where(u[start:stop] > theta, 1.0, -1.0)

    if policy.kind != "genie" and depth > 0 and feedback == "decided":
        if s_true is None:
            decided, theta = _sequential(u, base, w, pre, start, stop)
        else:
            _replay_errors(u, base, w, ref, decided, theta, start, stop)

    result = DetectionResult(decided, theta, start, decisions=int(stop - start))
    if s_true is not None:
        wrong = np.flatnonzero(decided != s_true[start:stop])
        result.error_count = int(wrong.size)
        result.error_positions = wrong + start
    return result


def _sequential(u, base, w, pre, start, stop):
    depth = w.size - 1
    hist = list(pre)
    theta = np.empty(stop - start)
    decided = np.empty(stop - start)
    wl = w.tolist()
    for k, n in enumerate(range(start, stop)):
        th = base[k]
        for j in range(1, depth + 1):
            th += wl[j] * hist[n - j]
        d = 1.0 if u[n] > th else -1.0
        hist.append(d)
        theta[k] = th
        decided[k] = d
    return decided, theta


def _replay_errors(u, base, w, ref, decided, theta, start, stop):
    """Redo decisions in place after each error so the decided past is fed back."""
    depth = w.size - 1
    wl = w.tolist()
    hat = ref.copy()
    hat[start:stop] = decided
    wrong = np.flatnonzero(decided != ref[start:stop]) + start
    pos = 0
    n = start
    while pos < wrong.size:
        n = max(n, wrong[pos] + 1)
        last_bad = wrong[pos]
        while n < stop and n - last_bad <= depth:
            th = base[n - start]
            for j in range(1, depth + 1):
                th += wl[j] * hat[n - j]
            d = 1.0 if u[n] > th else -1.0
            hat[n] = d
            theta[n - start] = th
            decided[n - start] = d
            if d != ref[n]:
                last_bad = n
            n += 1
        while pos < wrong.size and wrong[pos] < n:
            pos += 1
