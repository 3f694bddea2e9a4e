"""Command line front end.

Subcommands: ``gen`` writes an example family to a canonical file,
``solve`` runs the dichotomy and optionally stores the certificate,
``verify`` re-checks a stored certificate against its input without
any solver involvement, ``quotient`` collapses an instance by a finite
subrelation, and ``report`` renders the level-measure summary of each
input as text on stdout plus a CSV table and a PNG figure next to the
input file.

Exit codes: 0 on success, 2 when verification fails or the solver is
inconclusive, 1 on malformed input (including unknown commands and
flags).  Every command prints a one-line JSON run report as its last
stdout line; wall-clock timing appears only there, never in files, so
rerunning a command yields byte-identical artifacts.

The CCLAB_MODE environment variable (exact or float) chooses the
arithmetic mode where a file does not already pin it, which is only
``gen``; the other commands honor the mode stored in their input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from cclab.compression import verify_compression
from cclab.core import (
    FiniteSubrelation,
    FormatError,
    Instance,
    ModelError,
    quotient_by,
)
from cclab.examples import KINDS, generate
from cclab.fileio import (
    file_digest,
    read_any,
    read_certificate,
    write_certificate,
    write_target,
)
from cclab.measures import (
    MeasureCertificate,
    TowerMeasureCertificate,
    dichotomy_solve,
    verify_measure,
)
from cclab.report import (
    RunReport,
    render_csv,
    render_figure,
    render_text,
    summarize,
)


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so bad usage maps to exit code 1."""

    def error(self, message):
        raise FormatError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cclab",
                     description="positive-real cocycles on finite "
                                 "equivalence relations")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write an example instance or tower")
    gen.add_argument("kind", help=f"one of: {', '.join(KINDS)}")
    gen.add_argument("--levels", type=int, default=None)
    gen.add_argument("--p", default=None,
                     help="bit bias for the odometer, e.g. 1/3")
    gen.add_argument("--classes", type=int, default=None)
    gen.add_argument("-o", "--output", required=True)

    solve = sub.add_parser("solve", help="run the measure/compression "
                                         "dichotomy")
    solve.add_argument("file")
    solve.add_argument("-o", "--output", default=None,
                       help="write the certificate here")

    verify = sub.add_parser("verify", help="re-check a stored certificate")
    verify.add_argument("file")
    verify.add_argument("certificate")

    quotient = sub.add_parser("quotient", help="collapse an instance by a "
                                               "finite subrelation")
    quotient.add_argument("file")
    quotient.add_argument("--subrel", required=True,
                          help="blocks as 'a,b;c,d' or a JSON file of "
                               "block arrays")
    quotient.add_argument("-o", "--output", required=True)

    report = sub.add_parser("report", help="summarize level measures and "
                                           "convergence")
    report.add_argument("files", nargs="+")
    return parser


def _self_verify(target, certificate) -> str:
    if certificate is None:
        return "not-run"
    if isinstance(certificate, (MeasureCertificate, TowerMeasureCertificate)):
        outcome = verify_measure(target, certificate)
    else:
        outcome = verify_compression(target, certificate)
    return "valid" if outcome.valid else "invalid"


def _parse_subrel(spec: str) -> list[list[str]]:
    if os.path.exists(spec):
        try:
            with open(spec, "r", encoding="ascii") as fh:
                data = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise FormatError(f"{spec} is not canonical JSON: {exc}") from exc
        if not isinstance(data, list) or not all(
                isinstance(block, list) and
                all(isinstance(p, str) for p in block) for block in data):
            raise FormatError(f"{spec} must hold an array of block arrays")
        return data
    blocks = [[p.strip() for p in chunk.split(",") if p.strip()]
              for chunk in spec.split(";") if chunk.strip()]
    if not blocks:
        raise FormatError("empty subrelation spec")
    return blocks


def _cmd_gen(args, start: float) -> int:
    p = Fraction(args.p) if args.p is not None else None
    target = generate(args.kind, levels=args.levels, p=p,
                      classes=args.classes)
    write_target(args.output, target)
    print(f"wrote {args.output}")
    rep = RunReport("gen", file_digest(args.output), None, "not-run",
                    time.perf_counter() - start)
    print(rep.to_json())
    return 0


def _cmd_solve(args, start: float) -> int:
    target = read_any(args.file)
    result = dichotomy_solve(target)
    verification = _self_verify(target, result.certificate)
    if result.certificate is not None and args.output:
        write_certificate(args.output, result.certificate, mode=target.mode)
        print(f"wrote {args.output}")
    print(f"status: {result.status}")
    for reason in result.reasons:
        print(f"reason: {reason}")
    kind = None if result.status == "inconclusive" else result.status
    rep = RunReport("solve", file_digest(args.file), kind, verification,
                    time.perf_counter() - start, tuple(result.reasons))
    print(rep.to_json())
    if result.status == "inconclusive" or verification != "valid":
        return 2
    return 0


def _cmd_verify(args, start: float) -> int:
    target = read_any(args.file)
    certificate = read_certificate(args.certificate)
    if isinstance(certificate, (MeasureCertificate, TowerMeasureCertificate)):
        kind = "measure"
        outcome = verify_measure(target, certificate)
    else:
        kind = "compression"
        outcome = verify_compression(target, certificate)
    print(f"certificate kind: {kind}")
    print(f"verification: {'valid' if outcome.valid else 'invalid'}")
    for violation in outcome.violations:
        print(f"violation: {violation}")
    rep = RunReport("verify", file_digest(args.file), kind,
                    "valid" if outcome.valid else "invalid",
                    time.perf_counter() - start,
                    tuple(outcome.violations))
    print(rep.to_json())
    return 0 if outcome.valid else 2


def _cmd_quotient(args, start: float) -> int:
    target = read_any(args.file)
    if not isinstance(target, Instance):
        raise ModelError("quotient needs a plain instance file")
    blocks = _parse_subrel(args.subrel)
    sub = FiniteSubrelation.from_blocks(target, blocks)
    collapsed, _ = quotient_by(target, sub)
    write_target(args.output, collapsed)
    print(f"wrote {args.output} ({len(sub.blocks)} blocks)")
    rep = RunReport("quotient", file_digest(args.file), None, "not-run",
                    time.perf_counter() - start)
    print(rep.to_json())
    return 0


def _cmd_report(args, start: float) -> int:
    for name in args.files:
        target = read_any(name)
        result = dichotomy_solve(target)
        table = summarize(target, Path(name).stem, result=result)
        sys.stdout.write(render_text(table))
        base = str(Path(name).with_suffix(""))
        csv_path = base + ".report.csv"
        png_path = base + ".report.png"
        with open(csv_path, "w", encoding="ascii") as fh:
            fh.write(render_csv(table))
        render_figure(table, png_path)
        print(f"wrote {csv_path}")
        print(f"wrote {png_path}")
        kind = None if result.status == "inconclusive" else result.status
        rep = RunReport("report", file_digest(name), kind,
                        _self_verify(target, result.certificate),
                        time.perf_counter() - start,
                        tuple(result.reasons))
        print(rep.to_json())
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "quotient": _cmd_quotient,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args, start)
    except (FormatError, ModelError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
