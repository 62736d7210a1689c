"""Command-line interface.

Rates are in bits/cell and costs in average writes/cell.  Exit codes:
0 success, 2 invalid input, 3 validation failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import io
import sys
from fractions import Fraction
from pathlib import Path

from .awgn import prop1_bound
from .bounds import c1_curve_point, c2_curve_point, fact1_curve_point
from .channel import AwgnChannelParams, UniformChannelParams
from .errors import BelowThreshold, ConfigError, Infeasible, InvalidParams, RewritableError
from .harness import SCHEMES, ExperimentConfig, fmt, run_experiment
from .uniform_c2 import solve_delta
from .validation import DEFAULT_CONFIG, parse_config, run_validation

EXIT_OK, EXIT_INVALID, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4


def number(text: str) -> float:
    """Parse a float, accepting fractions such as ``1/3``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def seed_type(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def kappa_grid(lo: float, hi: float, step: float) -> list[float]:
    if not (step > 0 and hi >= lo):
        raise InvalidParams("need kappa-max >= kappa-min and step > 0")
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def curve_csv(points) -> str:
    buf = io.StringIO()
    buf.write("kappa,rate_bits,scheme,params\n")
    for pt in sorted(points, key=lambda p: p.kappa):
        flat = ";".join(f"{k}={fmt(v)}" for k, v in pt.params.items())
        buf.write(f"{fmt(pt.kappa)},{fmt(pt.rate)},{pt.scheme},{flat}\n")
    return buf.getvalue()


def emit(text: str, path: str | None):
    if path is None:
        return
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="\n")


def cmd_delta_table(args) -> int:
    if args.max_i < 1:
        raise InvalidParams("--max-i must be >= 1")
    rows = [(i, solve_delta(i)) for i in range(1, args.max_i + 1)]
    print(" i   delta_i")
    for i, d in rows:
        print(f"{i:2d}   {d:.4f}")
    emit("i,delta\n" + "".join(f"{i},{fmt(d)}\n" for i, d in rows), args.csv)
    return EXIT_OK


def cmd_curve_awgn(args) -> int:
    from .bounds import RateCostPoint

    points = []
    for kappa in kappa_grid(args.kappa_min, args.kappa_max, args.step):
        res = prop1_bound(args.P, args.N, args.sigma_s2, kappa)
        k_lo, l_lo, k_hi, l_hi, w = res.mix
        params = {"l": res.l, "k_lo": k_lo, "l_lo": l_lo, "k_hi": k_hi, "l_hi": l_hi, "weight": w}
        points.append(RateCostPoint(kappa, res.rate, "prop1", params))
    print(f"estimate-then-code lower bound, P={args.P:g} N={args.N:g} sigma_s2={args.sigma_s2:g}")
    print(" kappa (writes/cell)   rate (bits/cell)   l")
    for pt in points:
        print(f" {pt.kappa:19.6g}   {pt.rate:16.6f}   {pt.params['l']}")
    emit(curve_csv(points), args.csv)
    return EXIT_OK


def cmd_curve_uniform(args) -> int:
    UniformChannelParams(args.a, args.B)
    points = []
    for kappa in kappa_grid(args.kappa_min, args.kappa_max, args.step):
        if args.scheme == "c1":
            points.append(c1_curve_point(args.a, args.B, kappa))
        elif args.scheme == "c2":
            points.append(c2_curve_point(args.a, args.B, kappa))
        else:
            points.append(fact1_curve_point(args.a, kappa))
    print(f"{args.scheme} rate curve, a={args.a:.6g} B={args.B:.6g}")
    print(" kappa (writes/cell)   rate (bits/cell)")
    for pt in points:
        print(f" {pt.kappa:19.6g}   {pt.rate:16.6f}")
    emit(curve_csv(points), args.csv)
    return EXIT_OK


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidParams(f"--set expects key=value, got {item!r}")
        key, value = key.strip(), value.strip()
        if key == "deltas" and value in ("optimal", "zero"):
            out[key] = value
        elif key == "deltas":
            out[key] = tuple(float(Fraction(v)) for v in value.split(","))
        else:
            try:
                out[key] = float(Fraction(value))
            except (ValueError, ZeroDivisionError):
                raise InvalidParams(f"--set {key}: not a number: {value!r}") from None
    return out


def cmd_simulate(args) -> int:
    prm = _parse_set(args.set)
    channel_keys = ("N", "sigma_s2", "P") if args.scheme == "superposition" else ("a", "B")
    missing = [k for k in channel_keys if k not in prm]
    if missing:
        raise InvalidParams(f"missing channel parameter(s) {missing}; pass --set key=value")
    if args.scheme == "superposition":
        channel = AwgnChannelParams(prm.pop("N"), prm.pop("sigma_s2"), prm.pop("P"))
    else:
        channel = UniformChannelParams(prm.pop("a"), prm.pop("B"))
    cfg = ExperimentConfig(args.scheme, channel, prm, args.trials, args.seed, args.workers)
    try:
        report = run_experiment(cfg)
    except KeyError as exc:
        raise InvalidParams(f"missing scheme parameter {exc}") from None
    print(report.summary())
    emit(report.to_csv(), args.csv)
    return EXIT_OK


def cmd_validate(args) -> int:
    text = DEFAULT_CONFIG if args.config is None else Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    report = run_validation(cfg, trials=args.trials, seed=args.seed, workers=args.workers)
    print(report.summary())
    emit(report.to_csv(), args.csv)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rewritable",
        description="Rate bounds and Monte Carlo checks for rewritable storage channels with hidden state. "
        "Rates are in bits/cell; costs in average writes/cell.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, parents, text):
        return sub.add_parser(name, parents=parents, help=text, description=text)

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--csv", metavar="PATH", help="write CSV output to PATH ('-' for stdout)")

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--seed", type=seed_type, default=None, help="master seed (unsigned 64-bit)")
    mc.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (cells) per experiment")
    mc.add_argument("--workers", type=int, default=None, help="worker processes; results do not depend on it")

    p = add("delta-table", [out], "optimal switching thresholds delta_i (dimensionless, in [0,1))")
    p.add_argument("--max-i", type=int, default=6, help="largest region index i (default 6)")
    p.set_defaults(func=cmd_delta_table)

    p = add("curve-awgn", [out], "AWGN estimate-then-code lower bound: rate in bits/cell vs cost kappa in writes/cell")
    p.add_argument("--P", type=number, default=100.0, help="input power constraint (default 100)")
    p.add_argument("--N", type=number, default=1.0, help="write noise variance (default 1)")
    p.add_argument("--sigma-s2", type=number, default=10.0, help="state variance (default 10)")
    p.add_argument("--kappa-min", type=number, default=1.0, help="smallest cost, writes/cell (>= 1)")
    p.add_argument("--kappa-max", type=number, default=10.0, help="largest cost, writes/cell")
    p.add_argument("--step", type=number, default=1.0, help="cost step, writes/cell")
    p.set_defaults(func=cmd_curve_awgn)

    p = add("curve-uniform", [out], "uniform-channel rate in bits/cell vs cost kappa in writes/cell (c1, c2 or fact1)")
    p.add_argument("--a", type=number, default=1 / 3, help="write noise width (default 1/3)")
    p.add_argument("--B", type=number, default=1 / 6, help="state width, 0 < B < a (default 1/6)")
    p.add_argument("--scheme", choices=("c1", "c2", "fact1"), default="c2")
    p.add_argument("--kappa-min", type=number, default=2.0, help="smallest cost, writes/cell")
    p.add_argument("--kappa-max", type=number, default=12.0, help="largest cost, writes/cell")
    p.add_argument("--step", type=number, default=1.0, help="cost step, writes/cell")
    p.set_defaults(func=cmd_curve_uniform)

    p = add("simulate", [out, mc], "Monte Carlo run of one scheme; reports mean writes/cell and empirical rate in bits/cell")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="channel or scheme parameter, e.g. a=1/3, B=1/6, kappa=5 (repeatable)",
    )
    p.set_defaults(func=cmd_simulate)

    p = add("validate", [out, mc], "Monte Carlo vs closed-form checks on write costs (writes/cell) and rates (bits/cell)")
    p.add_argument("--config", metavar="PATH", help="key=value config with one section per check group")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        args.seed = 0 if args.seed is None else args.seed
        args.trials = 100_000 if args.trials is None else args.trials
        args.workers = 1 if args.workers is None else args.workers
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidParams, BelowThreshold, Infeasible, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RewritableError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ArithmeticError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
