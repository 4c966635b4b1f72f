"""Checking forwarding changes against a compiled specification.

One FEC at a time: pick the spec its traffic matches, lower both forwarding
graphs to acceptors, and decide the compiled check equation.  Failures get
explained by replaying the arms of the spec in priority order and listing
the shortest paths on which the two sides disagree.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from . import rir
from .automata import (PathList, enumerate_shortest, fsa_difference,
                       fsa_equivalent, fsa_intersect, is_empty, substitute)
from .compiler import CompiledProgram, CompiledSpec
from .frontend import LocationIndex, match_predicate
from .snapshot import (Fec, FecError, SnapshotError, TrafficClass,
                       fec_acceptors)

PASS = "pass"
FAIL = "fail"
UNMATCHED = "unmatched"
ERROR = "error"


@dataclass(frozen=True)
class CheckOptions:
    """Knobs for a checking run.

    `max_counterexamples` bounds the report as a whole; `max_per_subspec`
    additionally bounds each violated arm so one broken arm cannot crowd
    out the rest (None disables the per-arm cap).  `witness_limit` is the
    number of shortest paths listed per language in a counterexample.
    """

    max_counterexamples: int = 100
    max_per_subspec: Optional[int] = None
    witness_limit: int = 100
    workers: int = 1
    strict: bool = False


@dataclass(frozen=True)
class FecVerdict:
    """The outcome of judging one FEC: pass, fail, or unmatched."""

    fec_id: str
    status: str
    guard: str = ""


@dataclass(frozen=True)
class Counterexample:
    """Why one FEC failed, localized to the highest-priority broken arm.

    `expected` is the image of the pre-change paths under that arm's
    pre-side relation; `observed` is the post side's own claim.  `missing`
    and `unexpected` are the two sides of the whole-spec symmetric
    difference.  All listings are concrete paths; marker symbols used
    internally by `any(...)` are rewritten back before rendering.
    """

    fec_id: str
    traffic: TrafficClass
    guard: str
    violated_subspec: str
    pre_paths: PathList
    post_paths: PathList
    expected: PathList
    observed: PathList
    missing: PathList
    unexpected: PathList
    note: str = ""


@dataclass(frozen=True)
class Report:
    """Aggregate over a run: totals, per-arm tallies, bounded listings.

    Deterministic for fixed inputs and options: counterexamples and errors
    are sorted by FEC id and capped after sorting, so the report does not
    depend on arrival order or on the number of workers.
    """

    verdict: str
    totals: dict
    per_subspec: dict
    counterexamples: tuple
    counterexamples_truncated: bool
    errors: tuple
    metadata: dict


class StrictInputError(Exception):
    """Raised in strict mode when an input line fails validation."""

    def __init__(self, error: FecError):
        super().__init__(f"FEC {error.fec_id}: {error.message}")
        self.error = error


# ---------------------------------------------------------------------------
# Spec selection and single-FEC checking


def select_spec(program: CompiledProgram,
                traffic: TrafficClass):
    """Return (label, spec) for the first guard the traffic matches.

    Falls back to the default spec; (\"\", None) when nothing applies.
    """
    for g in program.guards:
        if match_predicate(g.predicate, traffic):
            return g.name, g.spec
    if program.default is not None:
        return program.default.name, program.default
    return "", None


def check_fec(c: Optional[CompiledSpec], f: Fec, index: LocationIndex,
              ground_cache: Optional[dict] = None) -> FecVerdict:
    """Judge one FEC against one compiled spec (None means unmatched)."""
    if c is None:
        return FecVerdict(f.fec_id, UNMATCHED)
    pre, post = fec_acceptors(f, index)
    env = rir.SnapshotPair(pre, post)
    verdict = rir.check_spec(c.top, env, ground_cache)
    return FecVerdict(f.fec_id, PASS if verdict.holds else FAIL, c.name)


def _splice(fsa, marker_langs):
    """Expand any marker symbols present in `fsa` to their path sets."""
    live = {s: m for s, m in marker_langs.items() if s in fsa.alphabet}
    return substitute(fsa, live) if live else fsa


def diff_languages(c: CompiledSpec, env: rir.SnapshotPair, limit: int = 100,
                   ground_cache: Optional[dict] = None):
    """Both sides of the check equation's symmetric difference, listed.

    Returns (missing, unexpected): paths the pre side requires but the
    post side lacks, and paths the post side has but should not.  The
    difference is taken before markers are rewritten back, so an `any`
    family that moved as one block stays a single agreement, not a diff.
    """
    ev = rir.Evaluator(env, ground_cache)
    marker_langs = {b.symbol: ev.pathset(b.pathset) for b in c.markers}
    left = ev.pathset(c.top.left)
    right = ev.pathset(c.top.right)
    missing = enumerate_shortest(
        _splice(fsa_difference(left, right), marker_langs), limit)
    unexpected = enumerate_shortest(
        _splice(fsa_difference(right, left), marker_langs), limit)
    return missing, unexpected


def _explain(c: CompiledSpec, fec_id: str, traffic: TrafficClass,
             env: rir.SnapshotPair, ev: rir.Evaluator, guard: str,
             limit: int) -> Counterexample:
    marker_langs = {b.symbol: ev.pathset(b.pathset) for b in c.markers}

    def listing(fsa) -> PathList:
        return enumerate_shortest(_splice(fsa, marker_langs), limit)

    left = ev.pathset(c.top.left)
    right = ev.pathset(c.top.right)
    missing = listing(fsa_difference(left, right))
    unexpected = listing(fsa_difference(right, left))

    # Walk arms in priority order, looking first at arms the pre-change
    # paths enter, then at arms only the post-change paths reach (new
    # paths showing up where nothing was before).  Because the whole
    # relation is the union of the arm relations, a failing equation
    # always has a differing arm, and its zone overlaps one snapshot.
    blamed = None
    for snapshot in (env.pre, env.post):
        for sub in c.subspecs:
            zone = ev.pathset(sub.zone)
            if is_empty(fsa_intersect(snapshot, zone)):
                continue
            exp = ev.pathset(rir.Image(rir.PreState(), sub.rpre))
            obs = ev.pathset(rir.Image(rir.PostState(), sub.rpost))
            if not fsa_equivalent(exp, obs):
                blamed = (sub.label, exp, obs, "")
                break
        if blamed is not None:
            break
    if blamed is None:
        blamed = (c.name, left, right, "no arm's zone matches this traffic")
    label, exp, obs, note = blamed

    return Counterexample(
        fec_id=fec_id,
        traffic=traffic,
        guard=guard,
        violated_subspec=label,
        pre_paths=listing(env.pre),
        post_paths=listing(env.post),
        expected=listing(exp),
        observed=listing(obs),
        missing=missing,
        unexpected=unexpected,
        note=note,
    )


def explain(c: CompiledSpec, f: Fec, index: LocationIndex, limit: int = 100,
            ground_cache: Optional[dict] = None,
            guard: str = "") -> Counterexample:
    """Build the counterexample for a FEC known (or suspected) to fail."""
    pre, post = fec_acceptors(f, index)
    env = rir.SnapshotPair(pre, post)
    ev = rir.Evaluator(env, ground_cache)
    return _explain(c, f.fec_id, f.traffic, env, ev, guard or c.name, limit)


# ---------------------------------------------------------------------------
# Whole-run driver

# A worker processes one item into one of:
#   FecError                      (bad input line, or coarsening failed)
#   FecVerdict                    (pass or unmatched)
#   (FecVerdict, Counterexample)  (fail, with its explanation)


def _process_item(program: CompiledProgram, index: LocationIndex,
                  item: Union[Fec, FecError], options: CheckOptions,
                  ground_cache: dict):
    if isinstance(item, FecError):
        return item
    guard, spec = select_spec(program, item.traffic)
    if spec is None:
        return FecVerdict(item.fec_id, UNMATCHED)
    try:
        pre, post = fec_acceptors(item, index)
    except SnapshotError as e:
        return FecError(item.fec_id, str(e))
    env = rir.SnapshotPair(pre, post)
    ev = rir.Evaluator(env, ground_cache)
    exp = ev.pathset(spec.top.left)
    obs = ev.pathset(spec.top.right)
    if fsa_equivalent(exp, obs):
        return FecVerdict(item.fec_id, PASS, guard)
    cx = _explain(spec, item.fec_id, item.traffic, env, ev, guard,
                  options.witness_limit)
    return FecVerdict(item.fec_id, FAIL, guard), cx


_WORK = None


def _init_worker(program, index, options):
    global _WORK
    _WORK = (program, index, options, {})


def _run_item(item):
    program, index, options, cache = _WORK
    return _process_item(program, index, item, options, cache)


def check_all(program: CompiledProgram, index: LocationIndex,
              items: Iterable[Union[Fec, FecError]],
              options: Optional[CheckOptions] = None,
              metadata: Optional[dict] = None) -> Report:
    """Check every FEC and aggregate a deterministic report.

    `items` is consumed lazily, so it can stream straight from a file.
    Input errors become report entries unless `options.strict`, which
    raises StrictInputError at the first one.
    """
    options = options if options is not None else CheckOptions()
    verdicts = []
    counterexamples = []
    errors = []

    def take(out):
        if isinstance(out, FecError):
            if options.strict:
                raise StrictInputError(out)
            errors.append(out)
        elif isinstance(out, tuple):
            verdicts.append(out[0])
            counterexamples.append(out[1])
        else:
            verdicts.append(out)

    if options.workers > 1:
        with multiprocessing.Pool(options.workers,
                                  initializer=_init_worker,
                                  initargs=(program, index, options)) as pool:
            for out in pool.imap(_run_item, items, chunksize=16):
                take(out)
    else:
        cache: dict = {}
        for item in items:
            take(_process_item(program, index, item, options, cache))

    verdicts.sort(key=lambda v: v.fec_id)
    counterexamples.sort(key=lambda cx: cx.fec_id)
    errors.sort(key=lambda e: e.fec_id)

    totals = {PASS: 0, FAIL: 0, UNMATCHED: 0, ERROR: len(errors)}
    for v in verdicts:
        totals[v.status] += 1

    per_subspec: dict = {}
    for cx in counterexamples:
        key = f"{cx.guard}/{cx.violated_subspec}"
        per_subspec[key] = per_subspec.get(key, 0) + 1

    kept = []
    kept_per_key: dict = {}
    truncated = False
    for cx in counterexamples:
        key = f"{cx.guard}/{cx.violated_subspec}"
        n = kept_per_key.get(key, 0)
        if len(kept) >= options.max_counterexamples or (
                options.max_per_subspec is not None
                and n >= options.max_per_subspec):
            truncated = True
            continue
        kept.append(cx)
        kept_per_key[key] = n + 1

    if totals[FAIL]:
        verdict = FAIL
    elif totals[ERROR]:
        verdict = ERROR
    else:
        verdict = PASS
    return Report(verdict, totals, per_subspec, tuple(kept), truncated,
                  tuple(errors), dict(metadata or {}))


# ---------------------------------------------------------------------------
# Rendering


def _pathlist_json(pl: PathList) -> dict:
    return {"paths": pl.render(), "truncated": pl.truncated}


def counterexample_to_json_dict(cx: Counterexample) -> dict:
    traffic = {"dstPrefix": cx.traffic.dst_prefix}
    if cx.traffic.src_prefix is not None:
        traffic["srcPrefix"] = cx.traffic.src_prefix
    return {
        "fec_id": cx.fec_id,
        "traffic": traffic,
        "guard": cx.guard,
        "violated_subspec": cx.violated_subspec,
        "pre_paths": _pathlist_json(cx.pre_paths),
        "post_paths": _pathlist_json(cx.post_paths),
        "expected": _pathlist_json(cx.expected),
        "observed": _pathlist_json(cx.observed),
        "missing": _pathlist_json(cx.missing),
        "unexpected": _pathlist_json(cx.unexpected),
        "note": cx.note,
    }


def report_to_json_dict(report: Report) -> dict:
    return {
        "verdict": report.verdict,
        "totals": dict(sorted(report.totals.items())),
        "per_subspec": dict(sorted(report.per_subspec.items())),
        "counterexamples": [counterexample_to_json_dict(cx)
                            for cx in report.counterexamples],
        "counterexamples_truncated": report.counterexamples_truncated,
        "errors": [{"fec_id": e.fec_id, "message": e.message}
                   for e in report.errors],
        "metadata": dict(sorted(report.metadata.items())),
    }


def report_to_json(report: Report) -> str:
    return json.dumps(report_to_json_dict(report), indent=2, sort_keys=True)


def _set_text(pl: PathList) -> str:
    inner = ", ".join(p or "()" for p in pl.render())
    if pl.truncated:
        inner = inner + ", ..." if inner else "..."
    return "{" + inner + "}"


def report_to_text(report: Report) -> str:
    t = report.totals
    lines = [f"verdict: {report.verdict}",
             f"checked: {sum(t.values())}  pass: {t[PASS]}  fail: {t[FAIL]}"
             f"  unmatched: {t[UNMATCHED]}  error: {t[ERROR]}"]
    if report.per_subspec:
        lines.append("violations by sub-spec:")
        for key in sorted(report.per_subspec):
            lines.append(f"  {key}: {report.per_subspec[key]}")
    for cx in report.counterexamples:
        traffic = f"dst {cx.traffic.dst_prefix}"
        if cx.traffic.src_prefix is not None:
            traffic += f" src {cx.traffic.src_prefix}"
        lines.append("")
        lines.append(f"FEC {cx.fec_id}  ({traffic})")
        lines.append(f"  guard: {cx.guard}  violated arm: "
                     f"{cx.violated_subspec}")
        if cx.note:
            lines.append(f"  note: {cx.note}")
        lines.append(f"  pre paths:  {_set_text(cx.pre_paths)}")
        lines.append(f"  post paths: {_set_text(cx.post_paths)}")
        lines.append(f"  expected:   {_set_text(cx.expected)}")
        lines.append(f"  observed:   {_set_text(cx.observed)}")
        lines.append(f"  missing:    {_set_text(cx.missing)}")
        lines.append(f"  unexpected: {_set_text(cx.unexpected)}")
    if report.counterexamples_truncated:
        lines.append("")
        lines.append("counterexample list truncated")
    if report.errors:
        lines.append("")
        lines.append("input errors:")
        for e in report.errors:
            lines.append(f"  {e.fec_id}: {e.message}")
    return "\n".join(lines) + "\n"
