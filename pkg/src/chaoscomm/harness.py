"""Monte-Carlo BER experiments.

A trial is one frame: random lead symbols, a known alternating preamble,
``frame_bits`` data symbols and a random tail.  Only the data symbols are
scored.  Trial ``k`` draws its symbols and its unit-variance noise from
streams keyed by ``(seed, k)`` only, so every Eb/N0 point and every policy
sees the same realisations (noise is just rescaled) and results do not depend
on how trials are spread over workers.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .analytic import ber_suboptimal, required_ebn0_analytic, sigma_w_for
from .baseline import (bpsk_detect, bpsk_transmit, equalize, ls_estimate, mmse_design,
                       mmse_for_filtered, mmse_for_paths)
from .channel import (ChannelModel, NoiseSpec, add_awgn, draw_gamma, ebn0_to_n0,
                      exponential_channel, perturb_channel, propagate, received_symbol_rate)
from .detector import ThresholdPolicy, default_past_depth, detect
from .matched_filter import (build_correlation_table, default_table_depth, filter_at_symbols,
                             symbol_level_output)
from .waveform import WaveformParams, synthesize, synthesize_blocked

POLICIES = ("zero", "prefilter", "subopt", "genie", "mmse", "mmse-full", "bpsk", "bpsk-mmse")
FIDELITIES = ("symbol", "sample")
ENCODINGS = ("superposition", "blocked")
CSV_COLUMNS = ("ebn0_db", "errors", "decisions", "ber", "ci_lo", "ci_hi", "policy", "fidelity")
TRIAL_DEFINITION = "one trial = one frame of frame_bits scored data symbols"


class ConfigError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    beta: float = 0.65
    f: float = 1.0
    oversampling: int = 16
    history_depth: int = 40
    delays: tuple = (0.0, 1.0)
    gamma: float = 0.6
    alphas: tuple | None = None
    gamma_range: tuple | None = None
    ebn0_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0)
    policy: str = "subopt"
    fidelity: str = "symbol"
    trials: int | None = None
    target_errors: int | None = 100
    max_trials: int = 200_000
    batch_trials: int = 16
    frame_bits: int = 1024
    training_bits: int = 0
    epsilon: float = 0.0
    seed: int = 0
    workers: int = 1
    past_depth: int | None = None
    future_depth: int = 40
    table_depth: int | None = None
    preamble_length: int | None = None
    mmse_taps: int = 15
    mmse_delay: int = 7
    feedback: str = "decided"
    perfect_estimation: bool = False
    encoding: str = "superposition"
    block_length: int = 32

    def __post_init__(self):
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        object.__setattr__(self, "ebn0_db", tuple(float(e) for e in self.ebn0_db))
        if self.alphas is not None:
            object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.gamma_range is not None:
            object.__setattr__(self, "gamma_range", tuple(float(g) for g in self.gamma_range))

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.policy not in POLICIES:
            problems.append(f"policy must be one of {POLICIES}")
        if self.fidelity not in FIDELITIES:
            problems.append(f"fidelity must be one of {FIDELITIES}")
        if self.trials is None and (self.target_errors is None or self.target_errors < 10):
            problems.append("need trials >= 1 or target_errors >= 10")
        if self.trials is not None and self.trials < 1:
            problems.append("trials must be >= 1")
        if not self.frame_bits > self.training_bits >= 0:
            problems.append("need frame_bits > training_bits >= 0")
        if not 0 <= self.epsilon < 1:
            problems.append("epsilon must be in [0, 1)")
        if self.alphas is not None and len(self.alphas) != len(self.delays):
            problems.append("alphas and delays differ in length")
        if self.encoding not in ENCODINGS:
            problems.append(f"encoding must be one of {ENCODINGS}")
        if self.block_length < 1:
            problems.append("block_length must be >= 1")
        if self.feedback not in ("decided", "truth"):
            problems.append("feedback must be 'decided' or 'truth'")
        if self.batch_trials < 1 or self.workers < 1:
            problems.append("batch_trials and workers must be >= 1")
        try:
            params = self.waveform()
            self.nominal_channel()
        except ValueError as exc:
            problems.append(str(exc))
        else:
            if self.fidelity == "sample" or self.policy == "prefilter":
                shifts = np.asarray(self.delays) * params.f * params.oversampling
                if np.any(np.abs(shifts - np.round(shifts)) > 1e-6):
                    problems.append("delays are not on the sample grid; raise oversampling")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def waveform(self) -> WaveformParams:
        return WaveformParams(self.f, self.beta, self.oversampling)

    def nominal_channel(self) -> ChannelModel:
        if self.alphas is not None:
            return ChannelModel(tuple(zip(self.delays, self.alphas)))
        return exponential_channel(self.delays, self.gamma)

    def frame_channel(self, frame: int) -> ChannelModel:
        if self.gamma_range is None:
            return self.nominal_channel()
        return exponential_channel(self.delays, draw_gamma(self.gamma_range, frame, self.seed))


@dataclass
class BerPoint:
    ebn0_db: float
    errors: int
    decisions: int
    ber: float
    ci_lo: float
    ci_hi: float


@dataclass
class BerCurve:
    policy: str
    fidelity: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, ebn0_db: float, errors: int, decisions: int) -> BerPoint:
        ber = errors / decisions if decisions else float("nan")
        lo, hi = wilson_interval(errors, decisions)
        point = BerPoint(float(ebn0_db), int(errors), int(decisions), ber, lo, hi)
        self.rows.append(point)
        return point

    def point(self, ebn0_db: float) -> BerPoint:
        for p in self.rows:
            if abs(p.ebn0_db - ebn0_db) < 1e-9:
                return p
        raise KeyError(ebn0_db)


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------- trial core


@lru_cache(maxsize=256)
def _table(channel: ChannelModel, params: WaveformParams, depth: int | None):
    return build_correlation_table(channel, params, depth)


def _layout(config: ExperimentConfig, channel: ChannelModel, params: WaveformParams):
    depth = config.table_depth or default_table_depth(channel, params)
    past = config.past_depth or default_past_depth(channel, params)
    pre = config.preamble_length or max(past, default_past_depth(channel, params))
    if config.policy == "genie":
        pre = max(pre, 1)
    return depth, pre


def _frame_symbols(config, n_lead, n_known, n_data, n_tail, trial, known="alternating"):
    gen = rngmod.stream(config.seed, rngmod.SYMBOLS, trial)
    lead = 2.0 * gen.integers(0, 2, n_lead) - 1.0
    if known == "alternating":
        known_syms = np.where(np.arange(n_known) % 2 == 0, 1.0, -1.0)
    else:
        known_syms = 2.0 * gen.integers(0, 2, n_known) - 1.0
    data = 2.0 * gen.integers(0, 2, n_data + n_tail) - 1.0
    return np.concatenate([lead, known_syms, data])


def _transmit(config, s, params):
    if config.encoding == "blocked":
        return synthesize_blocked(s, params, config.block_length)
    return synthesize(s, params, config.history_depth)


def _filtered(config, s, channel, params, table, n0, trial):
    """Matched-filter output at every symbol instant (noisy)."""
    if config.fidelity == "symbol":
        y = symbol_level_output(s, table).y
        sigma = math.sqrt(0.5 * n0 * table.e_p)
        return y + sigma * rngmod.stream(config.seed, rngmod.NOISE, trial).standard_normal(s.size)
    x = _transmit(config, s, params)
    r = add_awgn(propagate(x, channel), NoiseSpec(0.0, n0),
                 rngmod.stream(config.seed, rngmod.NOISE, trial))
    return filter_at_symbols(r, params, s.size, config.history_depth)


def _prefiltered(config, s, channel, params, n0, trial):
    """Received waveform sampled at the symbol instants (noisy, no filter)."""
    sigma = math.sqrt(n0 / (2.0 * params.dt))
    noise_gen = rngmod.stream(config.seed, rngmod.NOISE, trial)
    if config.fidelity == "symbol":
        r = received_symbol_rate(s, channel, params, config.history_depth)
        return r + sigma * noise_gen.standard_normal(s.size)
    x = _transmit(config, s, params)
    r = add_awgn(propagate(x, channel), NoiseSpec(0.0, n0), noise_gen)
    idx = [r.index_of(n / params.f) for n in range(s.size)]
    return r.samples[idx]


def run_trial(config: ExperimentConfig, ebn0_db: float, trial: int) -> tuple[int, int]:
    """Errors and scored decisions for one frame at one Eb/N0."""
    params = config.waveform()
    channel = config.frame_channel(trial)
    depth, pre = _layout(config, channel, params)
    n_data = config.frame_bits
    s = _frame_symbols(config, depth, pre, n_data, depth, trial)
    start, stop = depth + pre, depth + pre + n_data

    rx_channel = channel
    if config.epsilon > 0:
        rx_channel = perturb_channel(channel, config.epsilon,
                                     rngmod.stream(config.seed, rngmod.PERTURB, trial))

    if config.policy in ("bpsk", "bpsk-mmse"):
        n0 = ebn0_to_n0(ebn0_db, 1.0)
        r = bpsk_transmit(s, channel, params.f)
        r = r + math.sqrt(n0 / 2) * rngmod.stream(config.seed, rngmod.NOISE, trial).standard_normal(s.size)
        if config.policy == "bpsk-mmse":
            r = equalize(r, mmse_design(rx_channel, n0 / 2, config.mmse_taps, config.mmse_delay))
        decided = bpsk_detect(r[start:stop])
        return int(np.sum(decided != s[start:stop])), n_data

    table = _table(channel, params, config.table_depth)
    n0 = ebn0_to_n0(ebn0_db, table.e_p)
    rx_table = table if rx_channel is channel else build_correlation_table(rx_channel, params, config.table_depth)

    if config.policy == "prefilter":
        u = _prefiltered(config, s, channel, params, n0, trial)
    else:
        u = _filtered(config, s, channel, params, table, n0, trial)

    if config.policy in ("mmse", "mmse-full"):
        sigma_w = math.sqrt(0.5 * n0 * table.e_p)
        if config.policy == "mmse":
            eq = mmse_for_paths(rx_channel, rx_table, sigma_w, config.mmse_taps, config.mmse_delay)
            u = u / table.e_p
        else:
            eq = mmse_for_filtered(rx_table, sigma_w, config.mmse_taps, config.mmse_delay)
        z = equalize(u, eq)
        decided = bpsk_detect(z[start:stop])
        return int(np.sum(decided != s[start:stop])), n_data

    policy = ThresholdPolicy(config.policy, config.past_depth, config.future_depth)
    res = detect(u, policy, rx_table, rx_channel, params, preamble=s[:start], truth=s,
                 stop=stop, feedback=config.feedback)
    return res.error_count, res.decisions


def _run_batch(args):
    config, ebn0_db, trials = args
    errs = 0
    decs = 0
    for k in trials:
        e, d = run_trial(config, ebn0_db, k)
        errs += e
        decs += d
    return errs, decs


def _make_pool(config):
    return ProcessPoolExecutor(config.workers) if config.workers > 1 else None


def _chunks(config, first, count):
    per = max(1, -(-count // config.workers))
    return [range(a, min(a + per, first + count)) for a in range(first, first + count, per)]


def measure_point(config: ExperimentConfig, ebn0_db: float, pool=None,
                  max_decisions: float | None = None) -> tuple[int, int, int]:
    """Accumulate trials at one Eb/N0; returns (errors, decisions, trials).

    With ``trials`` set exactly that many run.  Otherwise batches of
    ``batch_trials`` run until ``target_errors`` is reached (checked only at
    batch boundaries, so the result is independent of ``workers``) or the
    trial/decision cap is hit.
    """
    errors = decisions = done = 0
    limit = config.trials if config.trials is not None else config.max_trials
    while done < limit:
        n = min(config.batch_trials, limit - done)
        jobs = [(config, ebn0_db, r) for r in _chunks(config, done, n)]
        results = pool.map(_run_batch, jobs) if pool is not None else map(_run_batch, jobs)
        for e, d in results:
            errors += e
            decisions += d
        done += n
        if config.trials is None:
            if errors >= config.target_errors:
                break
            if max_decisions is not None and decisions >= max_decisions:
                break
    return errors, decisions, done


def _metadata(config: ExperimentConfig) -> dict:
    meta = asdict(config)
    meta["trial_definition"] = TRIAL_DEFINITION
    meta["rng"] = "numpy Philox keyed by SeedSequence(seed, spawn_key=(stream, trial))"
    if config.policy in ("mmse", "mmse-full", "bpsk-mmse"):
        meta["equalizer"] = f"{config.mmse_taps} taps, decision delay {config.mmse_delay} after the main tap"
    return meta


def run_ber_sweep(config: ExperimentConfig) -> BerCurve:
    config.validate()
    curve = BerCurve(config.policy, config.fidelity, metadata=_metadata(config))
    pool = _make_pool(config)
    try:
        for ebn0 in config.ebn0_db:
            errors, decisions, _ = measure_point(config, ebn0, pool)
            curve.add(ebn0, errors, decisions)
    finally:
        if pool is not None:
            pool.shutdown()
    return curve


def required_ebn0(config: ExperimentConfig, target_ber: float = 1e-3,
                  bracket: tuple = (4.0, 14.0), tol_db: float = 0.02,
                  analytic: bool = False) -> float:
    """Eb/N0 (dB) at which the measured BER crosses ``target_ber``.

    Bisection on Monte-Carlo probes; the final value interpolates
    log10(BER) linearly between the last bracketing probes.  Probes that are
    clearly below target stop after ``4 * target_errors / target_ber``
    decisions.  ``analytic=True`` solves the closed form instead (genie and
    subopt policies only).
    """
    if not 0 < target_ber < 0.5:
        raise ValueError("target_ber must be in (0, 0.5)")
    config.validate()
    params = config.waveform()
    if analytic:
        table = build_correlation_table(config.nominal_channel(), params, config.table_depth)
        return required_ebn0_analytic(table, params, target_ber, config.policy)
    if config.trials is None and config.target_errors < 100:
        config = replace(config, target_errors=100)
    cap = 4.0 * (config.target_errors or 100) / target_ber
    pool = _make_pool(config)
    try:
        def probe(db):
            e, d, _ = measure_point(config, db, pool, max_decisions=cap)
            return max(e, 0.5) / d

        lo, hi = bracket
        b_lo, b_hi = probe(lo), probe(hi)
        if not b_lo > target_ber > b_hi:
            raise BracketError(f"BER {b_lo:.3g} at {lo} dB and {b_hi:.3g} at {hi} dB do not bracket {target_ber}")
        while hi - lo > tol_db:
            mid = 0.5 * (lo + hi)
            b_mid = probe(mid)
            if b_mid > target_ber:
                lo, b_lo = mid, b_mid
            else:
                hi, b_hi = mid, b_mid
    finally:
        if pool is not None:
            pool.shutdown()
    t = (math.log10(b_lo) - math.log10(target_ber)) / (math.log10(b_lo) - math.log10(b_hi))
    return lo + t * (hi - lo)


# ---------------------------------------------------------------- framed runs


@dataclass
class FrameRecord:
    frame: int
    gamma: float
    true_alphas: tuple
    cwcs_estimate: tuple
    bpsk_estimate: tuple


@dataclass
class FramedResult:
    curves: dict
    theory: dict
    frames: list


def _frame_errors(config: ExperimentConfig, frame: int):
    """Errors of both systems in one frame at every Eb/N0, plus estimates at the first."""
    params = config.waveform()
    channel = config.frame_channel(frame)
    depth = config.table_depth or default_table_depth(channel, params)
    n_train = config.training_bits
    n_data = config.frame_bits - n_train
    s = _frame_symbols(config, depth, n_train, n_data, depth, frame, known="random")
    t0, start, stop = depth, depth + n_train, depth + n_train + n_data
    table = _table(channel, params, config.table_depth)
    noise = rngmod.stream(config.seed, rngmod.NOISE, frame).standard_normal(s.size)
    noise_bpsk = rngmod.stream(config.seed, rngmod.NOISE_TRAINING, frame).standard_normal(s.size)
    if config.fidelity == "symbol":
        y_clean = symbol_level_output(s, table).y
        y_noise = math.sqrt(0.5 * table.e_p) * noise
    else:
        # the filter is linear: filter the clean signal and unit-PSD noise once
        rr = propagate(_transmit(config, s, params), channel)
        y_clean = filter_at_symbols(rr, params, s.size, config.history_depth)
        unit = add_awgn(type(rr)(np.zeros(len(rr)), rr.dt, rr.t0), NoiseSpec(0.0, 1.0),
                        rngmod.stream(config.seed, rngmod.NOISE, frame))
        y_noise = filter_at_symbols(unit, params, s.size, config.history_depth)
    r_clean = bpsk_transmit(s, channel, params.f)
    past = config.past_depth or default_past_depth(channel, params)
    if n_train < past:
        raise ConfigError("training block shorter than the detector's past depth")
    out = []
    estimates = None
    for ebn0 in config.ebn0_db:
        n0 = ebn0_to_n0(ebn0, table.e_p)
        y = y_clean + math.sqrt(n0) * y_noise
        n0_b = ebn0_to_n0(ebn0, 1.0)
        r = r_clean + math.sqrt(n0_b / 2) * noise_bpsk

        if config.perfect_estimation:
            rx_channel = channel
            bpsk_channel, bpsk_var = channel, n0_b / 2
            est_c = est_b = tuple(channel.alphas)
        else:
            est = ls_estimate(s[t0:start], y[t0:start], channel.delays, params)
            rx_channel = est.as_channel()
            est_bp = ls_estimate(s[t0:start], r[t0:start], channel.delays, f=params.f)
            bpsk_channel, bpsk_var = est_bp, est_bp.noise_var
            est_c, est_b = tuple(est.gains), tuple(est_bp.gains)
        if estimates is None:
            estimates = (est_c, est_b)
        rx_table = build_correlation_table(rx_channel, params, config.table_depth)
        res = detect(y, ThresholdPolicy("subopt", config.past_depth), rx_table, rx_channel, params,
                     preamble=s[:start], truth=s, stop=stop, feedback=config.feedback)
        z = equalize(r, mmse_design(bpsk_channel, bpsk_var, config.mmse_taps, config.mmse_delay))
        e_bpsk = int(np.sum(bpsk_detect(z[start:stop]) != s[start:stop]))
        theory = ber_suboptimal(table.p_total, table.k_const, sigma_w_for(ebn0, table.e_p), params)
        out.append((res.error_count, e_bpsk, n_data, theory))
    record = FrameRecord(frame, channel.gamma, tuple(channel.alphas), *estimates)
    return out, record


def _frame_batch(args):
    config, frames = args
    return [_frame_errors(config, k) for k in frames]


def run_framed_quasi_static(config: ExperimentConfig) -> FramedResult:
    """Quasi-static channel: gamma redrawn per frame, LS-estimated from training.

    ``config.trials`` is the number of frames.  The proposed detector (past-only
    threshold) and BPSK with MMSE run on the same channel draw per frame.
    """
    if config.gamma_range is None:
        config = replace(config, gamma_range=(config.gamma, config.gamma))
    if config.training_bits < 1 and not config.perfect_estimation:
        raise ConfigError("framed runs need training_bits > 0 or perfect_estimation")
    config.validate()
    n_frames = config.trials or 200
    pool = _make_pool(config)
    try:
        jobs = [(config, r) for r in _chunks(config, 0, n_frames)]
        batches = pool.map(_frame_batch, jobs) if pool is not None else map(_frame_batch, jobs)
        per_frame = [item for batch in batches for item in batch]
    finally:
        if pool is not None:
            pool.shutdown()
    meta = _metadata(config)
    meta["trial_definition"] = "one trial = one frame of frame_bits symbols incl. training_bits"
    subopt = BerCurve("subopt", config.fidelity, metadata=meta)
    bpsk = BerCurve("bpsk-mmse", "symbol", metadata=meta)
    theory = {}
    for j, ebn0 in enumerate(config.ebn0_db):
        e_s = sum(o[j][0] for o, _ in per_frame)
        e_b = sum(o[j][1] for o, _ in per_frame)
        n = sum(o[j][2] for o, _ in per_frame)
        subopt.add(ebn0, e_s, n)
        bpsk.add(ebn0, e_b, n)
        theory[ebn0] = float(np.mean([o[j][3] for o, _ in per_frame]))
    return FramedResult({"subopt": subopt, "bpsk-mmse": bpsk}, theory,
                        [rec for _, rec in per_frame])


# ---------------------------------------------------------------- output


def emit(results, path, fmt: str = "csv") -> None:
    """Write one or more curves as CSV plus a ``.meta.json`` sidecar."""
    if fmt != "csv":
        raise ValueError("only csv output is supported")
    curves = [results] if isinstance(results, BerCurve) else list(results)
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for c in curves:
                for p in c.rows:
                    w.writerow([repr(p.ebn0_db), p.errors, p.decisions, repr(p.ber),
                                repr(p.ci_lo), repr(p.ci_hi), c.policy, c.fidelity])
        meta = {f"{c.policy}/{c.fidelity}": c.metadata for c in curves}
        if meta:
            Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, default=str))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_curves(path) -> list[BerCurve]:
    curves: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["policy"], row["fidelity"])
            c = curves.setdefault(key, BerCurve(*key))
            c.rows.append(BerPoint(float(row["ebn0_db"]), int(row["errors"]), int(row["decisions"]),
                                   float(row["ber"]), float(row["ci_lo"]), float(row["ci_hi"])))
    return list(curves.values())


def write_frames_csv(frames: list[FrameRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "gamma", "path", "true_alpha", "cwcs_estimate", "bpsk_estimate"])
        for rec in frames:
            for l, a in enumerate(rec.true_alphas):
                w.writerow([rec.frame, repr(float(rec.gamma)), l, repr(float(a)),
                            repr(float(rec.cwcs_estimate[l])), repr(float(rec.bpsk_estimate[l]))])
