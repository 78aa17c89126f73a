"""
Command-line driver: simulate | fit | compress | decompress | evaluate.

Global flags ``--seed``, ``--config`` and ``-o`` work before or after the
subcommand.  A config file holds flat ``key = value`` lines whose keys are
the long option names of the subcommand (dashes or underscores); flags on
the command line override it.

Exit codes: 0 success, 2 bad arguments, 3 I/O error, 4 degenerate input to
a fit, 5 corrupted or unreadable bitstream.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import compander, fileio
from .channel_sim import PRESETS, FadingConfig, add_noise, generate
from .codec import BitReader, BitWriter
from .errors import (DegenerateSample, DesyncDetected, FormatError, MalformedFrame,
                     TruncatedStream)
from .multistream import (CT_INDICATOR, INDIVIDUAL, SIMPLE_JOINT, STRATEGY_TAGS,
                          JointConfig)
from .pipeline import (EvalConfig, Row, code_sequence, decode_sequence, evaluate,
                       pareto_envelope)
from .quantizer import QuantizerConfig, dequantize_frames

__all__ = ["main", "main_exit", "build_parser", "load_config"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4
EXIT_CORRUPT = 5

STRATEGIES = (INDIVIDUAL, SIMPLE_JOINT, CT_INDICATOR)
TAG_TO_STRATEGY = {v: k for k, v in STRATEGY_TAGS.items()}


class UsageError(Exception):
    pass


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _strategy_list(text: str) -> tuple:
    items = tuple(v.strip() for v in text.split(",") if v.strip())
    for s in items:
        if s not in STRATEGIES:
            raise argparse.ArgumentTypeError(f"unknown strategy {s!r}")
    return items


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                   help="PRNG seed (default 0)")
    p.add_argument("--config", default=d, help="flat key = value config file")
    p.add_argument("-o", "--output", default=d, help="output path")
    return p


def _coding_flags(p):
    p.add_argument("--M-abs", dest="M_abs", type=int, default=4, help="amplitude levels")
    p.add_argument("--M-ang", dest="M_ang", type=int, default=16, help="phase levels")
    p.add_argument("--depth", type=int, default=2, help="maximum tree depth D")
    p.add_argument("--gamma", type=float, default=0.5, help="tree weighting coefficient")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctq", parents=[_global_flags(False)],
        description="Context-tree compression of CSI sequences.")
    sub = parser.add_subparsers(dest="command", required=True)
    glob = _global_flags(True)

    p = sub.add_parser("simulate", parents=[glob], help="generate a fading CSI sequence")
    p.add_argument("--nt", type=int, default=4, help="antennas")
    p.add_argument("--doppler", type=float, default=5.0, help="maximum Doppler frequency in Hz")
    p.add_argument("--frames", type=int, default=10_000, help="sequence length")
    p.add_argument("--period", type=float, default=1e-3, help="frame period in seconds")
    p.add_argument("--correlation", type=float, default=0.0, help="exponential correlation rho")
    p.add_argument("--preset", choices=sorted(PRESETS), help="Doppler/correlation preset")
    p.add_argument("--sinusoids", type=int, default=16, help="sinusoids per antenna")
    p.add_argument("--snr", type=float, default=math.inf, help="SNR in dB (default: no noise)")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")

    p = sub.add_parser("fit", parents=[glob], help="fit amplitude and phase companders")
    p.add_argument("input", help="CSI file (binary or CSV)")
    p.add_argument("--family", choices=("beta", "mu", "identity"), default="beta")
    p.add_argument("--M-abs", dest="M_abs", type=int, default=4, help="amplitude levels for the adjustment")
    p.add_argument("--M-ang", dest="M_ang", type=int, default=16, help="phase levels for the adjustment")
    p.add_argument("--no-adjust", action="store_true", help="skip the distortion-balancing adjustment")

    p = sub.add_parser("compress", parents=[glob], help="quantize and code a CSI sequence")
    p.add_argument("input", help="CSI file (binary or CSV)")
    p.add_argument("--params", help="compander parameter file (default: identity)")
    _coding_flags(p)
    p.add_argument("--strategy", choices=STRATEGIES, default=CT_INDICATOR)
    p.add_argument("--q", type=int, default=1, help="bits of the second codeword list")
    p.add_argument("--m3", type=int, default=3, help="low-resolution alphabet size")
    p.add_argument("--interval", type=int, default=100, help="symbols between MAP re-prunes")

    p = sub.add_parser("decompress", parents=[glob], help="decode a bitstream to CSI")
    p.add_argument("input", help="bitstream file")
    p.add_argument("--indices", help="also write the decoded symbols as CSV")
    p.add_argument("--format", choices=("bin", "csv"), default="bin")

    p = sub.add_parser("evaluate", parents=[glob], help="rate/MSCD sweep as CSV")
    p.add_argument("--input", help="CSI file to evaluate (default: simulate)")
    p.add_argument("--nt", type=int, default=4)
    p.add_argument("--doppler", type=float, default=5.0)
    p.add_argument("--frames", type=int, default=10_000)
    p.add_argument("--period", type=float, default=1e-3)
    p.add_argument("--correlation", type=float, default=0.9)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--snr", type=float, default=math.inf)
    p.add_argument("--budgets", type=_int_list, default=(16, 64, 256, 1024),
                   help="levels per complex component, comma separated powers of two")
    p.add_argument("--strategies", type=_strategy_list, default=STRATEGIES)
    p.add_argument("--family", choices=("beta", "mu", "identity"), default="beta")
    p.add_argument("--training", type=float, default=0.2, help="training fraction")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--interval", type=int, default=100)
    p.add_argument("--no-ctw", action="store_true", help="skip the ideal CTW baseline")
    p.add_argument("--envelope", action="store_true", help="keep only Pareto-best rows")
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = load_config(args.config)
        except OSError as exc:
            raise OSError(f"cannot read config: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, text in values.items():
            if key not in known or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = text.lower() in ("1", "true", "yes", "on")
            else:
                conv = action.type or str
                try:
                    defaults[key] = conv(text)
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from None
                if action.choices is not None and defaults[key] not in action.choices:
                    raise UsageError(f"config key {key!r}: {text!r} not in {sorted(action.choices)}")
        sub.set_defaults(**defaults)
        if "seed" in values:
            parser.set_defaults(seed=int(values["seed"]))
        args = parser.parse_args(argv)
    return args


def _need_output(args):
    if not args.output:
        raise UsageError("this command needs -o OUTPUT")
    return args.output


def _scenario(args):
    doppler, rho = args.doppler, args.correlation
    if args.preset:
        doppler, rho = PRESETS[args.preset]
    return doppler, rho


def cmd_simulate(args) -> int:
    out = _need_output(args)
    doppler, rho = _scenario(args)
    cfg = FadingConfig(n_t=args.nt, n_frames=args.frames, doppler_hz=doppler,
                       sample_period_s=args.period, correlation=rho,
                       n_sinusoids=args.sinusoids, seed=args.seed)
    if math.isnan(args.snr) or args.snr == -math.inf:
        raise UsageError("--snr must be finite or inf")
    frames = add_noise(generate(cfg), args.snr, seed=args.seed + 1)
    (fileio.write_csi_csv if args.format == "csv" else fileio.write_csi)(out, frames)
    print(f"wrote {frames.shape[0]} frames x {frames.shape[1]} antennas to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    out = _need_output(args)
    from .pipeline import component_samples
    amp, phase = component_samples(fileio.load_csi(args.input))
    cfg = compander.FitConfig(adjustment_enabled=not args.no_adjust)
    if args.family == "identity":
        fa = fp = compander.Identity()
    else:
        fa = compander.design(amp, args.family, args.M_abs, cfg)
        fp = compander.design(phase, args.family, args.M_ang, cfg)
    fileio.write_params(out, fa, fp)
    print(f"amp   {compander.format_record(fa)}\nphase {compander.format_record(fp)}")
    return EXIT_OK


def cmd_compress(args) -> int:
    out = _need_output(args)
    frames = fileio.load_csi(args.input)
    amp_c, ang_c = (fileio.read_params(args.params) if args.params
                    else (compander.Identity(), compander.Identity()))
    qcfg = QuantizerConfig(frames.shape[1], args.M_abs, args.M_ang, amp_c, ang_c)
    jcfg = JointConfig(strategy=args.strategy, n_t=qcfg.n_t, q_abs=args.q, q_ang=args.q,
                       m_L_abs=args.m3, m_L_ang=args.m3, depth=args.depth, gamma=args.gamma,
                       update_interval=args.interval)
    run = code_sequence(qcfg, jcfg, frames, n_train=0)
    w = BitWriter()
    w.write_bits(run.bits)
    fileio.write_container(out, fileio.Container(
        n_t=qcfg.n_t, depth=args.depth, gamma=args.gamma, q1=0, q2=args.q, m3=args.m3,
        M_abs=args.M_abs, M_ang=args.M_ang, amp=amp_c, ang=ang_c,
        strategy_tag=STRATEGY_TAGS[args.strategy], payload_bits=w.nbits, payload=w.to_bytes()))
    r = run.report
    print(f"frames={r.timesteps} bits={r.total_bits} "
          f"bits_per_antenna_per_timestep={r.bits_per_antenna:.6f} fallbacks={r.fallbacks}")
    return EXIT_OK


def cmd_decompress(args) -> int:
    out = _need_output(args)
    c = fileio.read_container(args.input)
    if c.strategy_tag not in TAG_TO_STRATEGY:
        raise FormatError(f"unknown strategy tag {c.strategy_tag}")
    try:
        qcfg = QuantizerConfig(c.n_t, c.M_abs, c.M_ang, c.amp, c.ang)
        jcfg = JointConfig(strategy=TAG_TO_STRATEGY[c.strategy_tag], n_t=c.n_t, q_abs=c.q2,
                           q_ang=c.q2, m_L_abs=c.m3, m_L_ang=c.m3, depth=c.depth, gamma=c.gamma)
    except ValueError as exc:
        raise FormatError(f"inconsistent bitstream header: {exc}") from None
    reader = BitReader.from_bytes(c.payload, c.payload_bits)
    amp, ang = decode_sequence(qcfg, jcfg, reader.bits)
    frames = dequantize_frames(qcfg, amp, ang)
    (fileio.write_csi_csv if args.format == "csv" else fileio.write_csi)(out, frames)
    if args.indices:
        np.savetxt(args.indices, np.hstack([amp, ang]), fmt="%d", delimiter=",",
                   header=",".join([f"amp{i}" for i in range(c.n_t)] + [f"ang{i}" for i in range(c.n_t)]),
                   comments="")
    print(f"decoded {amp.shape[0]} frames to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    doppler, rho = _scenario(args)
    cfg = EvalConfig(n_t=args.nt, n_frames=args.frames, doppler_hz=doppler, correlation=rho,
                     sample_period_s=args.period, snr_db=args.snr, seed=args.seed,
                     training_fraction=args.training, level_budgets=args.budgets,
                     strategies=args.strategies, depth=args.depth, gamma=args.gamma,
                     update_interval=args.interval, family=args.family,
                     include_ctw=not args.no_ctw)
    if args.input:
        frames = fileio.load_csi(args.input)
        cfg = EvalConfig(**{**cfg.__dict__, "n_t": frames.shape[1], "n_frames": frames.shape[0]})
        rows = evaluate(cfg, frames, frames)
    else:
        rows = evaluate(cfg)
    if args.envelope:
        rows = pareto_envelope(rows)
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(Row.CSV_FIELDS)
        for r in rows:
            w.writerow(r.csv_values())
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    try:
        args = _parse(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:          # argparse usage errors
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateSample as exc:
        print(f"error: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (FormatError, TruncatedStream, DesyncDetected) as exc:
        print(f"error: corrupted input: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, MalformedFrame) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
