"""Command-line surface: canonical JSON output, a result cache, and the
battery runner.

Every subcommand emits a single JSON document {schema_version, request,
result, status, stats} with sorted keys, integers as decimal strings and
rationals as "p/q", so exact-mode output is byte-identical across runs and
thread counts.  Exit codes: 0 success/pass, 1 check failed, 2 usage error,
3 budget or cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import is_dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

import mpmath
import numpy as np

from . import __version__
from .bounds import (
    LogNumber,
    alt_exclusion_threshold,
    excluded_factors_report,
    lie_rank_threshold,
    n0_bound,
    radical_index_bound,
)
from .errors import BudgetExceeded, CapExceeded, EmptyWordError, WordSyntaxError
from .fibers import (
    DEFAULT_BUDGET,
    fiber_distribution,
    max_fiber,
    pi_w,
)
from .groups import (
    AutSet,
    FiniteGroup,
    automorphism_group,
    characteristic_series,
    identity_autset,
    inner_automorphisms,
    make_group,
    solvable_radical,
    subgroup_handle,
    subgroups,
)
from .verify import (
    CheckReport,
    check_dihedral_counterexample,
    check_identity_maximal,
    check_rewrite,
    check_submultiplicative,
    check_variation_bound,
    check_variation_projection,
)
from .words import format_word, m_constant, parse_word, variation_count, variations

SCHEMA_VERSION = "1"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


def parse_fraction(text: str) -> Fraction:
    """Exact rational from 'p/q', an integer, or a decimal literal."""
    return Fraction(str(text).strip())


def canonical(obj):
    """Convert a result tree to JSON-ready form with canonical number formats."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, 50)
    if isinstance(obj, LogNumber):
        doc = {"ln": mpmath.nstr(obj.ln_value, 50)}
        if obj.exact is not None:
            doc["exact"] = str(obj.exact)
        if obj.is_factorial_of is not None:
            doc["is_factorial_of"] = str(obj.is_factorial_of)
        return doc
    if isinstance(obj, np.ndarray):
        return [canonical(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [canonical(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: canonical(v) for k, v in vars(obj).items()}
    if obj is None or isinstance(obj, (str, float)):
        return obj
    return str(obj)


def dumps_canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def request_digest(request: dict) -> str:
    return hashlib.sha256(dumps_canonical(request).encode()).hexdigest()


class ResultCache:
    """Append-only JSON-lines store keyed by request digest."""

    def __init__(self, directory: str | Path):
        self.path = Path(directory) / "cache.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def lookup(self, digest: str) -> Optional[dict]:
        if not self.path.exists():
            return None
        for line_no, line in enumerate(self.path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                print(
                    f"warning: skipping corrupt cache line {line_no}",
                    file=sys.stderr,
                )
                continue
            if record.get("digest") == digest:
                return record
        return None

    def store(self, digest: str, doc: dict) -> None:
        record = dict(doc)
        record["digest"] = digest
        record["created"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        with self.path.open("a") as handle:
            handle.write(dumps_canonical(record) + "\n")


class Context:
    def __init__(self, threads: int, budget: int, cache: Optional[ResultCache]):
        self.threads = threads
        self.budget = budget
        self.cache = cache


def _group_and_aut(spec: str, which: str) -> tuple[FiniteGroup, AutSet]:
    g = make_group(spec)
    if which == "id":
        return g, identity_autset(g)
    if which == "inn":
        return g, inner_automorphisms(g)
    if which == "aut":
        return g, automorphism_group(g)
    raise ValueError(f"unknown automorphism set {which!r}; use id, inn or aut")


def resolve_subgroup(g: FiniteGroup, spec: str, aut: AutSet):
    """Subgroup selector: center | radical | order:<k> | indices:i,j,..."""
    if spec == "center":
        return subgroup_handle(g, g.center, aut=aut)
    if spec == "radical":
        rad = solvable_radical(g)
        return subgroup_handle(g, rad.elements, aut=aut)
    if spec.startswith("order:"):
        k = int(spec[6:])
        hits = [s for s in subgroups(g, aut=aut) if s.order == k and s.characteristic]
        if len(hits) != 1:
            raise ValueError(
                f"expected exactly one characteristic subgroup of order {k}, "
                f"found {len(hits)}"
            )
        return hits[0]
    if spec.startswith("indices:"):
        elements = [int(x) for x in spec[8:].split(",") if x]
        return subgroup_handle(g, elements, aut=aut)
    raise ValueError(f"unknown subgroup selector {spec!r}")


def report_result(report: CheckReport) -> tuple[dict, str, int]:
    doc = {
        "claim": report.claim,
        "params": report.params,
        "outcome": report.outcome,
        "witness": report.witness,
        "counters": report.counters,
    }
    if report.outcome == "fail":
        return doc, "fail", EXIT_CHECK_FAILED
    return doc, "ok", EXIT_OK


# -- command handlers -----------------------------------------------------------


def cmd_word_parse(args, ctx):
    w = parse_word(args.word)
    return (
        {
            "word": format_word(w),
            "length": w.length,
            "num_variables": w.num_variables,
            "letters": [[l.var, l.sign] for l in w.letters],
        },
        "ok",
        EXIT_OK,
    )


def cmd_word_variations(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    count = variation_count(w)
    listed = []
    for v in variations(w):
        if len(listed) >= args.limit:
            break
        listed.append(
            {
                "letters": [[l.var, l.copy, l.sign] for l in v.letters],
                "flattened": format_word(v.flattened),
            }
        )
    return {"count": count, "variations": listed}, "ok", EXIT_OK


def cmd_word_mconst(args, ctx):
    return {"M": m_constant(args.d, args.l)}, "ok", EXIT_OK


def cmd_group_make(args, ctx):
    g = make_group(args.spec)
    return (
        {
            "spec": g.spec,
            "order": g.order,
            "abelian": g.is_abelian,
            "center_size": len(g.center),
            "class_sizes": sorted(len(c) for c in g.conjugacy_classes),
        },
        "ok",
        EXIT_OK,
    )


def cmd_group_auts(args, ctx):
    g = make_group(args.spec)
    aut = automorphism_group(g)
    doc = {
        "order": g.order,
        "aut_size": len(aut),
        "inner_size": len(inner_automorphisms(g)),
    }
    if args.tables:
        doc["tables"] = [[int(x) for x in a.perm] for a in aut]
    return doc, "ok", EXIT_OK


def cmd_group_subgroups(args, ctx):
    g = make_group(args.spec)
    subs = subgroups(g)
    return (
        {
            "count": len(subs),
            "subgroups": [
                {
                    "elements": list(s.elements),
                    "order": s.order,
                    "normal": s.normal,
                    "characteristic": s.characteristic,
                }
                for s in subs
            ],
        },
        "ok",
        EXIT_OK,
    )


def cmd_group_series(args, ctx):
    g = make_group(args.spec)
    series = characteristic_series(g)
    return (
        {
            "chain": [
                {"order": h.order, "elements": list(h.elements)} for h in series.chain
            ],
            "factors": [
                {
                    "factor_order": f.factor.order,
                    "simple_order": f.simple.order,
                    "copies": f.copies,
                    "abelian": f.simple.is_abelian,
                }
                for f in series.factors
            ],
        },
        "ok",
        EXIT_OK,
    )


def cmd_group_radical(args, ctx):
    g = make_group(args.spec)
    rad = solvable_radical(g)
    return {"order": rad.order, "elements": list(rad.elements)}, "ok", EXIT_OK


def cmd_fiber_dist(args, ctx):
    g, autset = _group_and_aut(args.group, args.auts)
    w = parse_word(args.word, require_nonempty=True)
    if args.tuple:
        indices = [int(x) for x in args.tuple.split(",")]
    else:
        indices = [0] * w.length
    if len(indices) != w.length:
        raise ValueError(f"need {w.length} tuple indices, got {len(indices)}")
    if any(not 0 <= i < len(autset) for i in indices):
        raise ValueError(f"tuple indices must lie in 0..{len(autset) - 1}")
    tup = tuple(autset[i] for i in indices)
    dist = fiber_distribution(g, w, tup, budget=ctx.budget)
    return (
        {
            "counts": [int(c) for c in dist.counts],
            "order": dist.order,
            "arity": dist.arity,
            "total": dist.total,
        },
        "ok",
        EXIT_OK,
    )


def cmd_fiber_pi(args, ctx):
    g = make_group(args.group)
    w = parse_word(args.word, require_nonempty=True)
    value, proportion = pi_w(g, w, budget=ctx.budget)
    return {"max_fiber": value, "proportion": proportion}, "ok", EXIT_OK


def cmd_fiber_max(args, ctx):
    g, autset = _group_and_aut(args.group, args.auts)
    w = parse_word(args.word, require_nonempty=True)
    target = None if args.target == "any" else int(args.target)
    budget = args.samples if args.mode == "sample" else ctx.budget
    res = max_fiber(
        g,
        w,
        autset,
        target=target,
        mode=args.mode,
        budget=budget,
        seed=args.seed,
        threads=ctx.threads,
    )
    doc = {
        "value": res.value,
        "proportion": res.proportion,
        "witness_target": res.witness_target,
        "witness_tuple_indices": list(res.witness_tuple_indices),
        "status": res.status,
        "tuples_examined": res.tuples_examined,
        "evaluations": res.evaluations,
    }
    if res.seed is not None:
        doc["seed"] = res.seed
    return doc, "ok", EXIT_OK


def cmd_verify_identity_max(args, ctx):
    g, autset = _group_and_aut(args.group, args.auts)
    w = parse_word(args.word, require_nonempty=True)
    report = check_identity_maximal(g, w, autset, budget=ctx.budget, threads=ctx.threads)
    return report_result(report)


def cmd_verify_submult(args, ctx):
    g, autset = _group_and_aut(args.group, args.auts)
    aut_full = autset if autset.kind == "full" else automorphism_group(g)
    n = resolve_subgroup(g, args.subgroup, aut_full)
    w = parse_word(args.word, require_nonempty=True)
    report = check_submultiplicative(
        g, n, w, autset, budget=ctx.budget, threads=ctx.threads
    )
    return report_result(report)


def cmd_verify_dihedral(args, ctx):
    report = check_dihedral_counterexample(args.o, budget=ctx.budget)
    return report_result(report)


def cmd_verify_rewrite(args, ctx):
    g = make_group(args.group)
    aut = automorphism_group(g)
    n = resolve_subgroup(g, args.subgroup, aut)
    w = parse_word(args.word, require_nonempty=True)
    report = check_rewrite(g, n, w, trials=args.trials, seed=args.seed, budget=ctx.budget)
    return report_result(report)


def cmd_verify_variation_bound(args, ctx):
    s = make_group(args.simple)
    w = parse_word(args.word, require_nonempty=True)
    report = check_variation_bound(
        s,
        args.n,
        w,
        samples=args.samples,
        seed=args.seed,
        exponent_mode=args.exponent_mode,
        epsilon_factor=parse_fraction(args.epsilon_factor),
        budget=ctx.budget,
        threads=ctx.threads,
    )
    return report_result(report)


def run_battery_entry(entry: dict, ctx: Context) -> CheckReport:
    kind = entry["check"]
    budget = int(entry.get("budget", ctx.budget))
    if kind == "dihedral":
        return check_dihedral_counterexample(int(entry["o"]), budget=budget)
    if kind == "identity-max":
        g, autset = _group_and_aut(entry["group"], entry.get("auts", "aut"))
        w = parse_word(entry["word"], require_nonempty=True)
        return check_identity_maximal(g, w, autset, budget=budget)
    if kind == "submult":
        g, autset = _group_and_aut(entry["group"], entry.get("auts", "aut"))
        aut_full = autset if autset.kind == "full" else automorphism_group(g)
        n = resolve_subgroup(g, entry["subgroup"], aut_full)
        w = parse_word(entry["word"], require_nonempty=True)
        return check_submultiplicative(g, n, w, autset, budget=budget)
    if kind == "rewrite":
        g = make_group(entry["group"])
        aut = automorphism_group(g)
        n = resolve_subgroup(g, entry["subgroup"], aut)
        w = parse_word(entry["word"], require_nonempty=True)
        return check_rewrite(
            g,
            n,
            w,
            trials=int(entry.get("trials", 100)),
            seed=int(entry.get("seed", 0)),
            budget=budget,
        )
    if kind == "variation-bound":
        s = make_group(entry["simple"])
        w = parse_word(entry["word"], require_nonempty=True)
        return check_variation_bound(
            s,
            int(entry.get("n", 1)),
            w,
            samples=int(entry.get("samples", 1000)),
            seed=int(entry.get("seed", 0)),
            exponent_mode=entry.get("exponent_mode", "ceil"),
            epsilon_factor=parse_fraction(entry.get("epsilon_factor", "1")),
            budget=budget,
        )
    if kind == "variation-projection":
        g = make_group(entry["group"])
        w = parse_word(entry["word"], require_nonempty=True)
        return check_variation_projection(g, w, budget=budget)
    raise ValueError(f"unknown check type {kind!r}")


def default_battery_path() -> Path:
    return Path(str(resources.files("wordfibers").joinpath("data/battery.json")))


def cmd_verify_battery(args, ctx):
    manifest_path = Path(args.manifest) if args.manifest else default_battery_path()
    try:
        entries = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ValueError(f"cannot read manifest {manifest_path}: {err}") from err
    if not isinstance(entries, list):
        raise ValueError("the manifest must be a JSON list of check entries")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = max(1, ctx.threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_battery_entry, entry, ctx) for entry in entries]
        reports = [f.result() for f in futures]
    summary = {"total": len(reports), "passed": 0, "failed": 0, "inconclusive": 0}
    files = []
    for idx, report in enumerate(reports):
        doc, _, _ = report_result(report)
        name = f"check_{idx:03d}_{report.claim}.json"
        (out_dir / name).write_text(dumps_canonical(canonical(doc)) + "\n")
        files.append(name)
        if report.outcome == "pass":
            summary["passed"] += 1
        elif report.outcome == "fail":
            summary["failed"] += 1
        else:
            summary["inconclusive"] += 1
    result = {
        "summary": summary,
        "reports": files,
        "outcomes": [r.outcome for r in reports],
    }
    if summary["failed"]:
        return result, "fail", EXIT_CHECK_FAILED
    return result, "ok", EXIT_OK


def cmd_bounds_exclude(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    report = excluded_factors_report(w, parse_fraction(args.rho))
    return (
        {
            "word": report.word,
            "length": report.length,
            "arity": report.arity,
            "rho": report.rho,
            "M": report.m_value,
            "M_prime": report.m_prime_value,
            "alt": report.alt,
            "lie": report.lie,
            "alt_fiber_bound": {
                "degree_threshold": report.alt_fiber_bound[0],
                "exponent": report.alt_fiber_bound[1],
            },
            "lie_fiber_bound": {
                "rank_threshold": report.lie_fiber_bound[0],
                "exponent": report.lie_fiber_bound[1],
            },
            "narrative": report.narrative,
        },
        "ok",
        EXIT_OK,
    )


def cmd_bounds_alt(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    res = alt_exclusion_threshold(w, parse_fraction(args.rho))
    return (
        {
            "ceil_argument": res.ceil_argument,
            "term_factorial": res.term_factorial,
            "term_rho": res.term_rho,
            "threshold": res.threshold,
        },
        "ok",
        EXIT_OK,
    )


def cmd_bounds_lie(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    res = lie_rank_threshold(w, parse_fraction(args.rho))
    return (
        {
            "term_const": res.term_const,
            "term_rho": res.term_rho,
            "threshold": res.threshold,
        },
        "ok",
        EXIT_OK,
    )


def cmd_bounds_n0(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    return (
        {"n0": n0_bound(w, parse_fraction(args.rho), args.order)},
        "ok",
        EXIT_OK,
    )


def cmd_bounds_radical_bound(args, ctx):
    w = parse_word(args.word, require_nonempty=True)
    factors = []
    if args.factors:
        for part in args.factors.split(","):
            s_order, aut_order = part.split(":")
            factors.append((int(s_order), int(aut_order)))
    bound = radical_index_bound(
        factors,
        w,
        parse_fraction(args.rho),
        int(args.n_zero),
        parse_fraction(args.eta_zero),
    )
    return {"bound": bound, "factors": len(factors)}, "ok", EXIT_OK


# -- argument parsing -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wfl",
        description="automorphic word map fibers on finite groups",
    )
    parser.add_argument("--threads", type=int, default=None, help="worker threads")
    parser.add_argument("--budget", type=int, default=None, help="evaluation budget")
    parser.add_argument("--cache-dir", default=None, help="result cache directory")
    parser.add_argument(
        "--no-cache", action="store_true", help="bypass the result cache"
    )
    top = parser.add_subparsers(dest="module", required=True)

    word = top.add_parser("word").add_subparsers(dest="action", required=True)
    p = word.add_parser("parse")
    p.add_argument("--word", required=True)
    p.set_defaults(handler=cmd_word_parse)
    p = word.add_parser("variations")
    p.add_argument("--word", required=True)
    p.add_argument("--limit", type=int, default=64)
    p.set_defaults(handler=cmd_word_variations)
    p = word.add_parser("mconst")
    p.add_argument("-l", type=int, required=True)
    p.add_argument("-d", type=int, required=True)
    p.set_defaults(handler=cmd_word_mconst)

    group = top.add_parser("group").add_subparsers(dest="action", required=True)
    p = group.add_parser("make")
    p.add_argument("--spec", required=True)
    p.set_defaults(handler=cmd_group_make)
    p = group.add_parser("auts")
    p.add_argument("--spec", required=True)
    p.add_argument("--tables", action="store_true")
    p.set_defaults(handler=cmd_group_auts)
    p = group.add_parser("subgroups")
    p.add_argument("--spec", required=True)
    p.set_defaults(handler=cmd_group_subgroups)
    p = group.add_parser("series")
    p.add_argument("--spec", required=True)
    p.set_defaults(handler=cmd_group_series)
    p = group.add_parser("radical")
    p.add_argument("--spec", required=True)
    p.set_defaults(handler=cmd_group_radical)

    fiber = top.add_parser("fiber").add_subparsers(dest="action", required=True)
    p = fiber.add_parser("dist")
    p.add_argument("--group", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--auts", default="id", choices=["id", "inn", "aut"])
    p.add_argument("--tuple", default=None, help="comma-separated tuple indices")
    p.set_defaults(handler=cmd_fiber_dist)
    p = fiber.add_parser("pi")
    p.add_argument("--group", required=True)
    p.add_argument("--word", required=True)
    p.set_defaults(handler=cmd_fiber_pi)
    p = fiber.add_parser("max")
    p.add_argument("--group", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--auts", default="aut", choices=["id", "inn", "aut"])
    p.add_argument("--target", default="any")
    p.add_argument("--mode", default="exact", choices=["exact", "sample"])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_fiber_max)

    verify = top.add_parser("verify").add_subparsers(dest="action", required=True)
    p = verify.add_parser("identity-max")
    p.add_argument("--group", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--auts", default="aut", choices=["inn", "aut"])
    p.set_defaults(handler=cmd_verify_identity_max)
    p = verify.add_parser("submult")
    p.add_argument("--group", required=True)
    p.add_argument("--subgroup", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--auts", default="aut", choices=["inn", "aut"])
    p.set_defaults(handler=cmd_verify_submult)
    p = verify.add_parser("dihedral")
    p.add_argument("--o", type=int, required=True)
    p.set_defaults(handler=cmd_verify_dihedral)
    p = verify.add_parser("rewrite")
    p.add_argument("--group", required=True)
    p.add_argument("--subgroup", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_verify_rewrite)
    p = verify.add_parser("variation-bound")
    p.add_argument("--simple", required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--word", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exponent-mode", default="ceil", choices=["ceil", "floor"])
    p.add_argument("--epsilon-factor", default="1")
    p.set_defaults(handler=cmd_verify_variation_bound)
    p = verify.add_parser("battery")
    p.add_argument("--manifest", default=None, help="defaults to the shipped manifest")
    p.add_argument("--out", default="battery_reports")
    p.set_defaults(handler=cmd_verify_battery, no_cache_always=True)

    bounds = top.add_parser("bounds").add_subparsers(dest="action", required=True)
    p = bounds.add_parser("exclude")
    p.add_argument("--word", required=True)
    p.add_argument("--rho", required=True)
    p.set_defaults(handler=cmd_bounds_exclude)
    p = bounds.add_parser("alt")
    p.add_argument("--word", required=True)
    p.add_argument("--rho", required=True)
    p.set_defaults(handler=cmd_bounds_alt)
    p = bounds.add_parser("lie")
    p.add_argument("--word", required=True)
    p.add_argument("--rho", required=True)
    p.set_defaults(handler=cmd_bounds_lie)
    p = bounds.add_parser("n0")
    p.add_argument("--word", required=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--order", type=int, required=True)
    p.set_defaults(handler=cmd_bounds_n0)
    p = bounds.add_parser("radical-bound")
    p.add_argument("--word", required=True)
    p.add_argument("--rho", required=True)
    p.add_argument("--factors", default="", help="comma list of order:autorder")
    p.add_argument("--n-zero", type=int, required=True)
    p.add_argument("--eta-zero", required=True)
    p.set_defaults(handler=cmd_bounds_radical_bound)

    return parser


def _request_params(args: argparse.Namespace) -> dict:
    skip = {"handler", "module", "action", "threads", "budget", "cache_dir", "no_cache",
            "no_cache_always"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def run_command(argv, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "request": {"argv": list(argv)},
            "result": None,
            "status": "usage-error",
            "stats": {},
        }
        stdout.write(dumps_canonical(doc) + "\n")
        return EXIT_USAGE

    threads = args.threads if args.threads is not None else int(
        os.environ.get("WFL_THREADS", "1")
    )
    budget = args.budget if args.budget is not None else int(
        os.environ.get("WFL_BUDGET", str(DEFAULT_BUDGET))
    )
    cache_dir = args.cache_dir if args.cache_dir is not None else os.environ.get(
        "WFL_CACHE_DIR"
    )
    use_cache = (
        cache_dir is not None
        and not args.no_cache
        and not getattr(args, "no_cache_always", False)
    )
    cache = ResultCache(cache_dir) if use_cache else None
    ctx = Context(threads=threads, budget=budget, cache=cache)

    request = {
        "command": f"{args.module} {args.action}",
        "params": canonical(_request_params(args)),
        "version": __version__,
        "budget": str(budget),
    }
    digest = request_digest(request)
    if cache is not None:
        record = cache.lookup(digest)
        if record is not None:
            doc = {
                "schema_version": record["schema_version"],
                "request": record["request"],
                "result": record["result"],
                "status": record["status"],
                "stats": record["stats"],
            }
            stdout.write(dumps_canonical(doc) + "\n")
            return int(record["exit_code"])

    status = "ok"
    exit_code = EXIT_OK
    result = None
    try:
        result, status, exit_code = args.handler(args, ctx)
    except (BudgetExceeded, CapExceeded) as err:
        result, status, exit_code = {"error": str(err)}, "budget-exceeded", EXIT_BUDGET
    except (ValueError, WordSyntaxError, EmptyWordError, OSError) as err:
        result, status, exit_code = {"error": str(err)}, "usage-error", EXIT_USAGE

    doc = {
        "schema_version": SCHEMA_VERSION,
        "request": request,
        "result": canonical(result),
        "status": status,
        "stats": {"exit_code": str(exit_code)},
    }
    stdout.write(dumps_canonical(doc) + "\n")
    if cache is not None and status in ("ok", "fail"):
        cache.store(digest, {**doc, "exit_code": exit_code})
    return exit_code


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
