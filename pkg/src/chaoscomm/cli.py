"""Command-line entry point.

Every subcommand reads an optional ``--config`` file of ``key=value`` lines
(keys are :class:`ExperimentConfig` field names); explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys

from . import rng as rngmod
from .analytic import predict, required_ebn0_analytic, single_path_lower_bound
from .baseline import ls_estimate
from .channel import ChannelModel, NoiseSpec, add_awgn, propagate, read_channel_file
from .detector import return_map, write_return_map_csv
from .harness import (ExperimentConfig, emit, required_ebn0, run_ber_sweep,
                      run_framed_quasi_static, write_frames_csv)
from .matched_filter import build_correlation_table, filter_at_symbols
from .waveform import synthesize

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_TUPLES = {"delays", "alphas", "gamma_range", "ebn0_db"}


def parse_ebn0(text: str) -> tuple:
    """``"4,6,8"`` or ``"0:14:2"`` (inclusive range)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"bad Eb/N0 range {text!r}; expected start:stop:step")
        lo, hi, step = parts
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(round(lo + k * step, 10) for k in range(n))
    return tuple(float(p) for p in text.split(",") if p.strip())


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key not in _FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    if raw.lower() in ("none", ""):
        return None
    if key == "ebn0_db":
        return parse_ebn0(raw)
    if key in _TUPLES:
        return tuple(float(p) for p in raw.split(","))
    default = _FIELDS[key].default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int) or key in ("trials", "target_errors", "past_depth",
                                           "table_depth", "preamble_length"):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = line.split("=", 1)
            key = key.strip().replace("-", "_")
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return values


def _channel_fields(channel: ChannelModel) -> dict:
    return {"delays": tuple(channel.delays.tolist()), "alphas": tuple(channel.alphas.tolist())}


def build_config(args, **overrides) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    if args.channel:
        values.update(_channel_fields(read_channel_file(args.channel)))
    flag_map = {
        "beta": args.beta, "f": args.f, "oversampling": args.oversampling,
        "policy": getattr(args, "policy", None), "fidelity": args.fidelity,
        "ebn0_db": parse_ebn0(args.ebn0) if args.ebn0 else None,
        "trials": args.trials, "target_errors": args.target_errors,
        "epsilon": args.epsilon, "seed": args.seed, "workers": args.workers,
        "delays": tuple(args.delays) if args.delays else None, "gamma": args.gamma,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = value
    if args.delays and not args.channel:
        # explicit delays drop any gains that came from the config file
        values.pop("alphas", None)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values).validate()


def _common(p: argparse.ArgumentParser, policy: bool = True) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--channel", help="channel file of 'delay attenuation' lines")
    p.add_argument("--delays", type=float, nargs="+", help="path delays (symbol periods)")
    p.add_argument("--gamma", type=float, help="exponential damping of the path gains")
    p.add_argument("--beta", type=float)
    p.add_argument("--f", type=float, help="base frequency")
    p.add_argument("--oversampling", type=int)
    if policy:
        p.add_argument("--policy", help="zero, prefilter, subopt, genie, mmse, mmse-full, bpsk, bpsk-mmse")
    p.add_argument("--fidelity", choices=("sample", "symbol"))
    p.add_argument("--ebn0", help="list '4,6,8' or range '0:14:2' in dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--target-errors", type=int)
    p.add_argument("--epsilon", type=float, help="relative channel-gain error")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output CSV (stdout if omitted)")


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_ber_sweep(args) -> int:
    config = build_config(args)
    curve = run_ber_sweep(config)
    if args.out:
        emit(curve, args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["ebn0_db", "errors", "decisions", "ber", "ci_lo", "ci_hi", "policy", "fidelity"])
        for p in curve.rows:
            w.writerow([p.ebn0_db, p.errors, p.decisions, p.ber, p.ci_lo, p.ci_hi,
                        curve.policy, curve.fidelity])
    return 0


def cmd_analytic(args) -> int:
    config = build_config(args)
    params = config.waveform()
    table = build_correlation_table(config.nominal_channel(), params, config.table_depth)
    if args.required is not None:
        for policy in ("genie", "subopt", "lattice"):
            db = required_ebn0_analytic(table, params, args.required, policy)
            print(f"{policy}: {db:.4f} dB")
        return 0
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ebn0_db", "genie", "subopt", "lattice", "single_path_bound"])
        for db in config.ebn0_db:
            w.writerow([db] + [repr(predict(table, db, params, p).ber)
                               for p in ("genie", "subopt", "lattice")]
                       + [repr(single_path_lower_bound(db))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_return_map(args) -> int:
    config = build_config(args)
    params = config.waveform()
    channel = config.nominal_channel()
    depth = config.history_depth
    s = 2.0 * rngmod.stream(config.seed, rngmod.SYMBOLS, 0).integers(0, 2, args.symbols + 2 * depth) - 1.0
    received = propagate(synthesize(s, params, depth), channel)
    if args.ebn0_point is not None:
        e_b = build_correlation_table(channel, params).e_p
        received = add_awgn(received, NoiseSpec.from_ebn0(args.ebn0_point, e_b),
                            rngmod.stream(config.seed, rngmod.NOISE, 0))
    if args.stage == "received":
        u = received.samples[[received.index_of(n / params.f) for n in range(s.size)]]
    else:
        u = filter_at_symbols(received, params, s.size, depth)
    shifts = channel.symbol_delays(params.f)
    offsets = tuple(-int(d) for d in shifts)
    keep = slice(depth, depth + args.symbols)
    points = return_map(u[keep], s[keep], offsets)
    write_return_map_csv(points, args.out or sys.stdout)
    return 0


TABLE1_CHANNELS = {2: (0.0, 1.0), 3: (0.0, 1.0, 2.0)}


def cmd_table1(args) -> int:
    base = build_config(args, policy="subopt")
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["paths", "epsilon", "policy", "required_ebn0_db", "analytic_db"])
        for n_paths in args.paths:
            for eps in args.epsilons:
                for policy in args.policies:
                    config = dataclasses.replace(base, delays=TABLE1_CHANNELS[n_paths], alphas=None,
                                                 epsilon=eps, policy=policy)
                    db = required_ebn0(config, args.target)
                    closed = ""
                    if policy == "subopt" and eps == 0:
                        closed = repr(required_ebn0(config, args.target, analytic=True))
                    w.writerow([n_paths, eps, policy, repr(db), closed])
                    fh.flush()
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_frames(args) -> int:
    config = build_config(args, gamma_range=tuple(args.gamma_range),
                          frame_bits=args.frame_bits, training_bits=args.training_bits,
                          perfect_estimation=args.perfect_estimation or None)
    if config.trials is None:
        config = dataclasses.replace(config, trials=args.frames)
    result = run_framed_quasi_static(config)
    if args.out:
        emit(list(result.curves.values()), args.out)
        with open(args.out + ".theory.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ebn0_db", "ber_theory"])
            for db, ber in result.theory.items():
                w.writerow([db, repr(ber)])
    else:
        for name, curve in result.curves.items():
            for p in curve.rows:
                print(name, p.ebn0_db, p.errors, p.decisions, p.ber)
    if args.frames_out:
        write_frames_csv(result.frames, args.frames_out)
    return 0


def cmd_estimate(args) -> int:
    config = build_config(args)
    params = config.waveform()
    channel = config.nominal_channel()
    depth = config.history_depth
    n = args.training_bits
    s = 2.0 * rngmod.stream(config.seed, rngmod.SYMBOLS, 0).integers(0, 2, n + 2 * depth) - 1.0
    db = config.ebn0_db[0] if args.ebn0 else None
    received = propagate(synthesize(s, params, depth), channel)
    if db is not None:
        e_b = build_correlation_table(channel, params).e_p
        received = add_awgn(received, NoiseSpec.from_ebn0(db, e_b),
                            rngmod.stream(config.seed, rngmod.NOISE, 0))
    y = filter_at_symbols(received, params, s.size, depth)
    keep = slice(depth, depth + n)
    est = ls_estimate(s[keep], y[keep], channel.delays, params)
    print("delay,true_alpha,estimate")
    for (d, g), a in zip(est.taps, channel.alphas):
        print(f"{d!r},{float(a)!r},{g!r}")
    print(f"# residual {est.residual:.6g} over {est.rows} rows")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaoscomm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber-sweep", help="Monte-Carlo BER over an Eb/N0 grid")
    _common(p)
    p.set_defaults(func=cmd_ber_sweep)

    p = sub.add_parser("analytic", help="closed-form BER curves")
    _common(p, policy=False)
    p.add_argument("--required", type=float, metavar="BER",
                   help="print the Eb/N0 reaching this BER instead of a curve")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("return-map", help="(u_n, u_n+1) pairs with symbol labels")
    _common(p, policy=False)
    p.add_argument("--stage", choices=("received", "filtered"), default="received")
    p.add_argument("--symbols", type=int, default=2000)
    p.add_argument("--ebn0-point", type=float, help="add noise at this Eb/N0 (dB)")
    p.set_defaults(func=cmd_return_map)

    p = sub.add_parser("table1", help="required Eb/N0 for a target BER under channel error")
    _common(p, policy=False)
    p.add_argument("--target", type=float, default=1e-3)
    p.add_argument("--paths", type=int, nargs="+", default=[2, 3], choices=(2, 3))
    p.add_argument("--epsilons", type=float, nargs="+", default=[0.0, 0.3])
    p.add_argument("--policies", nargs="+", default=["subopt", "mmse"])
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("frames", help="quasi-static channel with LS estimation")
    _common(p, policy=False)
    p.add_argument("--gamma-range", type=float, nargs=2, default=(0.3, 0.9))
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--frame-bits", type=int, default=4096)
    p.add_argument("--training-bits", type=int, default=256)
    p.add_argument("--perfect-estimation", action="store_true")
    p.add_argument("--frames-out", help="per-frame true/estimated gains CSV")
    p.set_defaults(func=cmd_frames)

    p = sub.add_parser("estimate", help="LS path gains from a random training block")
    _common(p, policy=False)
    p.add_argument("--training-bits", type=int, default=256)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
