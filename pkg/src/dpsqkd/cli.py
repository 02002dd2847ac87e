"""Command-line front end: ``keyrate``, ``curve``, ``verify`` and ``simulate``.

Exit codes: 0 success, 1 usage or input error, 2 valid but degenerate
(zero key rate or no detections). ``verify`` exits 1 when any check fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

from . import __version__
from .bounds import NoDetectionsError, Observables, key_rate
from .optimizer import (
    curve_to_csv,
    default_eta_grid,
    keyrate_curve,
    loglog_slope,
    optimize_mu,
    detection_rate,
)
from .simulation import SimConfig, end_to_end_rate
from .source import (
    PhotonDistribution,
    SourceStats,
    check_tail_bound,
    check_vacuum_equality,
    make_source_stats,
)
from .verify import Check, VerificationReport, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _header(command: str) -> dict:
    return {"tool": "dpsqkd", "version": __version__, "command": command}


def _emit(record: dict, fmt: str = "json") -> None:
    if fmt == "csv":
        keys = list(record)
        print(",".join(keys))
        print(",".join(_csv_value(record[k]) for k in keys))
    else:
        print(json.dumps(record))


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def cmd_keyrate(args: argparse.Namespace) -> int:
    explicit = [args.q1, args.q2, args.q3]
    if args.poisson and any(q is not None for q in explicit):
        raise UsageError("--poisson cannot be combined with explicit --q1/--q2/--q3")
    if not args.poisson and any(q is None for q in explicit):
        raise UsageError("give either --poisson or all of --q1 --q2 --q3")
    if args.optimize and not args.poisson:
        raise UsageError("--optimize needs --poisson (q_n must follow mu)")
    if args.optimize and args.f_ec is not None:
        raise UsageError("--f-ec is only supported with a fixed --mu")

    record = _header("keyrate")
    record.update(
        eta=args.eta,
        e_bit=args.ebit,
        source="poisson" if args.poisson else "explicit",
        optimize=args.optimize,
        f_ec_mode="shannon" if args.f_ec is None else "fixed",
    )
    if args.optimize:
        opt = optimize_mu(args.eta, args.ebit)
        result = opt.result
        record.update(mu=opt.mu_opt, mu_opt=opt.mu_opt, pinned=opt.pinned)
    else:
        Q = detection_rate(args.eta, args.mu)
        if args.poisson:
            stats = make_source_stats(args.mu)
        else:
            stats = SourceStats(args.q1, args.q2, args.q3)
        record["mu"] = args.mu
        try:
            result = key_rate(
                Observables(Q=Q, e_bit=args.ebit),
                stats,
                f_EC="shannon" if args.f_ec is None else args.f_ec,
            )
        except NoDetectionsError as exc:
            record.update(detection_rate=Q, aborted=True, error=str(exc))
            _emit(record, args.format)
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DEGENERATE
    out = result.to_dict()
    out.pop("mu")
    out.pop("e_bit")
    record.update(out)
    _emit(record, args.format)
    return EXIT_DEGENERATE if result.aborted else EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    if not (0 < args.eta_min <= args.eta_max <= 1):
        raise UsageError("need 0 < --eta-min <= --eta-max <= 1")
    grid = default_eta_grid(args.eta_min, args.eta_max, args.points)
    points = keyrate_curve(grid, args.ebit, args.rep_rate, workers=args.workers)
    text = curve_to_csv(points)

    summary = _header("curve")
    summary.update(
        e_bit=args.ebit,
        eta_min=args.eta_min,
        eta_max=args.eta_max,
        points=args.points,
        rep_rate=args.rep_rate,
        out=args.out,
        rows=len(points),
        flagged=sum(p.flagged for p in points),
    )
    try:
        summary["slope_1e-2_to_1"] = loglog_slope(points, 1e-2, 1.0)
    except ValueError:
        summary["slope_1e-2_to_1"] = None

    if args.out is None:
        sys.stdout.write(text)
        print(json.dumps(summary), file=sys.stderr)
    else:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(json.dumps(summary))
    return EXIT_DEGENERATE if summary["flagged"] else EXIT_OK


def _source_checks() -> list[Check]:
    checks = []
    stats = make_source_stats(0.1)
    dist = PhotonDistribution.poisson(0.3, 60)
    gap = max(abs(dist.tail(n) - stats.q(n)) for n in (1, 2, 3))
    checks.append(Check("poisson_tail_bound", gap, 1e-12, check_tail_bound(dist, stats)))
    p0 = math.exp(-0.007)
    checks.append(
        Check("coherent_vacuum_equality", 0.0, 1e-12, check_vacuum_equality(p0, p0, 1e-12))
    )
    return checks


def cmd_verify(args: argparse.Namespace) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    report = run_suite(args.samples, args.seed, lam=args.lambda_override, workers=args.workers)
    if args.suite == "all":
        report = VerificationReport(report.checks + _source_checks(), report.params)
    record = _header("verify")
    record["suite"] = args.suite
    record.update(report.to_dict())
    print(json.dumps(record))
    return EXIT_OK if report.passed else EXIT_USAGE


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = SimConfig(
            eta=args.eta,
            mu=args.mu,
            e_mis=args.emis,
            n_blocks=args.blocks,
            t_code=args.tcode,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    e2e = end_to_end_rate(config, record_blocks=args.transcript is not None)
    record = _header("simulate")
    record.update(e2e.transcript.summary())
    record["expected_q"] = detection_rate(config.eta, config.mu)
    if e2e.result is not None:
        record.update(
            key_rate=e2e.result.R,
            e_ph_u=e2e.result.e_ph_U,
            key_rate_aborted=e2e.result.aborted,
        )
    else:
        record.update(key_rate=None, e_ph_u=None, key_rate_aborted=True)
    record["abort_reason"] = e2e.reason
    if args.transcript is not None:
        try:
            e2e.transcript.write_csv(args.transcript)
        except OSError as exc:
            print(f"error: cannot write {args.transcript}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        record["transcript"] = args.transcript
    print(json.dumps(record))
    return EXIT_DEGENERATE if e2e.transcript.n_detected == 0 else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dpsqkd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dpsqkd {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    k = sub.add_parser("keyrate", help="Phase-error bound and key rate at one channel point.")
    k.add_argument("--eta", type=float, required=True)
    k.add_argument("--ebit", type=float, required=True)
    mu = k.add_mutually_exclusive_group(required=True)
    mu.add_argument("--mu", type=float)
    mu.add_argument("--optimize", action="store_true", help="optimize mu (needs --poisson)")
    k.add_argument("--poisson", action="store_true", help="derive q_n from a coherent source")
    k.add_argument("--q1", type=float)
    k.add_argument("--q2", type=float)
    k.add_argument("--q3", type=float)
    k.add_argument("--f-ec", type=float, default=None, help="fixed EC leakage (default h(e_bit))")
    k.add_argument("--format", choices=("json", "csv"), default="json")
    k.set_defaults(func=cmd_keyrate)

    c = sub.add_parser("curve", help="Optimized key rate versus transmission, as CSV.")
    c.add_argument("--ebit", type=float, required=True)
    c.add_argument("--eta-min", type=float, default=1e-4)
    c.add_argument("--eta-max", type=float, default=1.0)
    c.add_argument("--points", type=int, default=41)
    c.add_argument("--rep-rate", type=float, default=1e9, help="pulses per second")
    c.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_curve)

    v = sub.add_parser("verify", help="Numerically certify the operator lemmas.")
    v.add_argument("--suite", choices=("lemmas", "all"), default="lemmas")
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--format", choices=("json",), default="json")
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--lambda-override", type=float, default=None, help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="Monte Carlo run of the protocol.")
    s.add_argument("--eta", type=float, default=1.0)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--emis", type=float, default=0.0)
    s.add_argument("--blocks", type=int, default=1_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tcode", type=float, default=0.5)
    s.add_argument("--format", choices=("json",), default="json")
    s.add_argument("--transcript", default=None, help="per-block CSV path")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"dpsqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
