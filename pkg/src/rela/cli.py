"""Command-line driver: parse, compile, check, and render a report.

Exit status is 0 when every FEC passes, 1 when violations were found, and
2 for usage or input problems (including input errors surfaced while
checking).  Progress and phase timings go to stderr; the report goes to
stdout or to --output.
"""

from __future__ import annotations

import argparse
import hashlib
import multiprocessing
import sys
import time

from . import rir
from .checker import (CheckOptions, StrictInputError, check_all,
                      report_to_json, report_to_text)
from .compiler import compile_program
from .frontend import (Granularity, LocationDb, LocationDbError, SpecError,
                       parse_program)
from .snapshot import load_fecs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rela",
        description="Verify a network change against a relational spec.")
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser(
        "check", help="check pre/post forwarding snapshots against a spec")
    check.add_argument("--spec", required=True, help="spec program file")
    check.add_argument("--locations", required=True,
                       help="location database, a JSON array of interfaces")
    check.add_argument("--fecs", required=True,
                       help="FEC snapshots, NDJSON with one FEC per line")
    check.add_argument("--granularity", default=Granularity.DEVICE.value,
                       choices=[g.value for g in Granularity],
                       help="path alphabet granularity (default: device)")
    check.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: CPU count)")
    check.add_argument("--max-counterexamples", type=int, default=100,
                       metavar="K",
                       help="cap on reported counterexamples (default: 100)")
    check.add_argument("--output", default=None, metavar="FILE",
                       help="write the report here instead of stdout")
    check.add_argument("--format", default="json", choices=["json", "text"],
                       help="report format (default: json)")
    check.add_argument("--strict", action="store_true",
                       help="abort on the first malformed input line")
    check.add_argument("--emit-rir", action="store_true",
                       help="dump the compiled relations to stderr")
    return parser


def _log(message: str) -> None:
    print(f"rela: {message}", file=sys.stderr)


def _fail(message: str) -> int:
    print(f"rela: error: {message}", file=sys.stderr)
    return 2


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _named_specs(program):
    for g in program.guards:
        yield g.name, g.spec
    if program.default is not None:
        yield program.default.name, program.default


def _run_check(args) -> int:
    workers = args.workers
    if workers is None:
        workers = multiprocessing.cpu_count()
    if workers < 1:
        return _fail("--workers must be at least 1")
    if args.max_counterexamples < 0:
        return _fail("--max-counterexamples must not be negative")

    t0 = time.monotonic()
    try:
        db = LocationDb.load(args.locations)
        index = db.build_index(Granularity(args.granularity))
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec_text = fh.read()
        program = compile_program(parse_program(spec_text, index), index)
        metadata = {
            "granularity": args.granularity,
            "spec_sha256": _sha256_file(args.spec),
            "locations_sha256": _sha256_file(args.locations),
            "fecs_sha256": _sha256_file(args.fecs),
        }
    except OSError as e:
        return _fail(str(e))
    except LocationDbError as e:
        return _fail(f"{args.locations}: {e}")
    except SpecError as e:
        where = f":{e.line}:{e.col}" if e.line else ""
        return _fail(f"{args.spec}{where}: {e.message}")
    t1 = time.monotonic()
    nspecs = len(program.guards) + (1 if program.default is not None else 0)
    _log(f"compiled {nspecs} spec(s) over {len(index.universe)} symbols "
         f"in {t1 - t0:.2f}s")

    if args.emit_rir:
        for label, spec in _named_specs(program):
            print(f"// {label}", file=sys.stderr)
            print(rir.pretty(spec.top), file=sys.stderr)

    options = CheckOptions(max_counterexamples=args.max_counterexamples,
                           workers=workers, strict=args.strict)
    try:
        report = check_all(program, index, load_fecs(args.fecs, index),
                           options, metadata)
    except OSError as e:
        return _fail(str(e))
    except StrictInputError as e:
        return _fail(str(e))
    t2 = time.monotonic()
    t = report.totals
    _log(f"checked {sum(t.values())} FECs in {t2 - t1:.2f}s "
         f"(pass {t['pass']}, fail {t['fail']}, "
         f"unmatched {t['unmatched']}, error {t['error']})")

    if args.format == "json":
        rendered = report_to_json(report) + "\n"
    else:
        rendered = report_to_text(report)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(rendered)
        except OSError as e:
            return _fail(str(e))
    else:
        sys.stdout.write(rendered)

    if report.verdict == "fail":
        return 1
    if report.verdict == "error":
        return 2
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "check":
        return _run_check(args)
    raise AssertionError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
