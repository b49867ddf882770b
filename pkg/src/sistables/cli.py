"""Command line: ``sistables count|pvalue|enumerate|check|bounds DATASET``.

DATASET is a dataset file or the name of an embedded fixture.  Reports are
plain text by default; ``--format machine`` prints one JSON object.  Exit
codes: 0 success, 1 usage or data error, 2 budget exhausted or
inconclusive verdict, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__
from .bounds import (
    BudgetExceeded,
    PrefixState,
    enumerate_fiber,
    ip_bounds,
    lp_bounds,
    shuttle_bounds,
    verify_sequential_interval,
)
from .datasets import Dataset, fixture_names, load_dataset, read_order
from .model import ModelError
from .sampler import ProposalKind, TargetDistribution, estimate_count, estimate_mu, run_sis
from .toric import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    Limits,
    MoveSet,
    TermOrder,
    check_corollary_5_1,
    check_lemma_4_2,
    check_prop_3_1,
    check_prop_4_1,
    positive_support,
    read_moves,
    toric_ideal,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(x):
    """JSON-safe number: exact rationals as strings, non-finite floats as null."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _prepare(args) -> tuple[Dataset, object, tuple[int, ...]]:
    ds = load_dataset(args.dataset)
    if args.order:
        ds = ds.with_order(read_order(args.order, ds.base_system()))
    system = ds.system()
    return ds, system, ds.margin()


def _estimate_fields(rep) -> dict:
    return {
        "estimate": _number(rep.value),
        "standard_error": _number(rep.standard_error),
        "cv2": _number(rep.cv_squared),
        "ess": _number(rep.ess),
        "good_fraction": rep.good_fraction,
        "samples": rep.n_samples,
    }


def cmd_count(args) -> tuple[dict, int]:
    ds, system, t = _prepare(args)
    proposal = ProposalKind.parse(args.proposal or "uniform")
    run = run_sis(system, t, args.samples, proposal, args.engine, args.seed, args.jobs)
    rep = estimate_count(run)
    out = {"dataset": ds.name, "seed": args.seed, "proposal": proposal.value, "engine": args.engine}
    out.update(_estimate_fields(rep))
    out["all_invalid"] = rep.all_invalid
    out["engine_calls"] = run.config["engine_calls"]
    out["engine_cache_hits"] = run.config["engine_cache_hits"]
    return out, EXIT_OK


def cmd_pvalue(args) -> tuple[dict, int]:
    ds, system, t = _prepare(args)
    proposal = ProposalKind.parse(args.proposal or ds.proposal or "hypergeometric")
    target = TargetDistribution.parse(args.target or ds.target or "hyper", system)
    run = run_sis(system, t, args.samples, proposal, args.engine, args.seed, args.jobs)
    out = {
        "dataset": ds.name,
        "seed": args.seed,
        "proposal": proposal.value,
        "target": target.kind.value,
        "engine": args.engine,
    }
    try:
        rep = estimate_mu(run, target, observed=ds.table())
    except ZeroDivisionError:
        out.update({"estimate": None, "good_fraction": 0.0, "samples": run.n, "all_invalid": True})
        return out, EXIT_BUDGET
    out.update(_estimate_fields(rep))
    return out, EXIT_OK


def cmd_enumerate(args) -> tuple[dict, int]:
    ds, system, t = _prepare(args)
    tables = enumerate_fiber(system, t, budget=args.budget)
    out = {"dataset": ds.name, "count": len(tables)}
    if args.list:
        out["tables"] = [list(tb.counts) for tb in tables]
    return out, EXIT_OK


def _default_subbasis(system, limits) -> MoveSet:
    """Lex basis elements that are square-free in their first variable."""
    gb = toric_ideal(system, TermOrder.lex(system.num_cells), limits)
    keep = []
    for g in gb.elements:
        first = min(g.support())
        if max(g.lead[first], g.trail[first]) <= 1:
            keep.append(g)
    return MoveSet.from_binomials(keep)


def cmd_check(args) -> tuple[dict, int]:
    ds, system, t = _prepare(args)
    limits = Limits(max_pairs=args.budget)
    out: dict = {"dataset": ds.name, "check": args.which}
    if args.which == "bruteforce":
        rep = verify_sequential_interval(system, t, budget=args.budget)
        verdict = PASS if rep.holds else FAIL
        out.update({"verdict": verdict, "fiber_size": rep.fiber_size, "prefixes_checked": rep.prefixes_checked})
        if rep.violation:
            out["witness"] = rep.violation
        return out, EXIT_OK
    if args.which == "prop31":
        rep = check_prop_3_1(system, limits)
    elif args.which == "cor51":
        rep = check_corollary_5_1(system, limits)
    else:
        moves = read_moves(args.moves) if args.moves else _default_subbasis(system, limits)
        if args.which == "prop41":
            rep = check_prop_4_1(moves, system, limits)
        else:
            support = positive_support(system, t)
            ok = check_lemma_4_2(moves, system, support, limits)
            out.update({"verdict": PASS if ok else FAIL, "moves": len(moves), "support_size": len(support.indices)})
            return out, EXIT_OK
    out.update({"verdict": rep.verdict, "details": rep.details})
    if rep.witness:
        out["witness"] = rep.witness
    return out, EXIT_BUDGET if rep.verdict == INCONCLUSIVE else EXIT_OK


def _parse_prefix(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise UsageError(f"prefix must be integers, got {text!r}") from None


def cmd_bounds(args) -> tuple[dict, int]:
    ds, system, t = _prepare(args)
    state = PrefixState(system, t, _parse_prefix(args.prefix))
    engines = [args.engine] if args.engine else ["lp", "ip", "shuttle"]
    funcs = {
        "lp": lambda j: lp_bounds(state, j),
        "ip": lambda j: ip_bounds(state, j, node_budget=args.budget),
        "shuttle": lambda j: shuttle_bounds(state, j),
    }
    rows = []
    for j in range(state.next_cell, system.num_cells):
        row = {"cell": j, "label": system.cell_labels[j]}
        for name in engines:
            iv = funcs[name](j)
            row[name] = None if iv.empty else [iv.int_lower, iv.int_upper]
            if name == "lp" and not iv.empty:
                row["lp_rational"] = [str(iv.lp_lower), str(iv.lp_upper)]
        rows.append(row)
    return {"dataset": ds.name, "prefix": list(state.fixed), "residual": list(state.residual), "cells": rows}, EXIT_OK


def _format_text(command: str, report: dict) -> str:
    lines = []
    if command == "bounds":
        lines.append(f"dataset {report['dataset']}  prefix {report['prefix']}")
        engines = [k for k in ("lp", "ip", "shuttle") if report["cells"] and k in report["cells"][0]]
        lines.append("cell  label      " + "  ".join(f"{e:>12}" for e in engines))
        for row in report["cells"]:
            vals = ["empty" if row[e] is None else f"[{row[e][0]}, {row[e][1]}]" for e in engines]
            lines.append(f"{row['cell']:>4}  {row['label']:<9}  " + "  ".join(f"{v:>12}" for v in vals))
        return "\n".join(lines)
    for key, value in report.items():
        if key == "tables":
            lines.append("tables:")
            lines.extend("  " + " ".join(map(str, tb)) for tb in value)
        elif isinstance(value, float):
            lines.append(f"{key}: {value:.6g}")
        elif isinstance(value, (dict, list)):
            lines.append(f"{key}: {json.dumps(value, sort_keys=True)}")
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sistables", description="Sequential importance sampling for contingency tables.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, sampling=False):
        p.add_argument("dataset", help="dataset file or fixture name (" + ", ".join(fixture_names()) + ")")
        p.add_argument("--order", metavar="FILE", help="file listing cell labels in sampling order")
        p.add_argument("--format", choices=("text", "machine"), default="text")
        p.add_argument("--budget", type=int, default=1_000_000, help="enumeration / search budget")
        if sampling:
            p.add_argument("--samples", type=int, default=1000)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--proposal", choices=("uniform", "hyper", "hypergeometric"))
            p.add_argument("--engine", choices=("lp", "ip", "shuttle"), default="lp")
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("count", help="estimate the number of tables")
    common(p, sampling=True)
    p = sub.add_parser("pvalue", help="estimate the exact-test p-value")
    common(p, sampling=True)
    p.add_argument("--target", choices=("uniform", "hyper", "hw"))
    p = sub.add_parser("enumerate", help="list every table with the observed margins")
    common(p)
    p.add_argument("--list", action="store_true", help="include the tables themselves")
    p = sub.add_parser("check", help="algebraic or brute-force condition checks")
    common(p)
    p.add_argument("which", choices=("prop31", "prop41", "cor51", "lemma42", "bruteforce"))
    p.add_argument("--moves", metavar="FILE", help="move file for prop41/lemma42")
    p = sub.add_parser("bounds", help="cell bounds after fixing a prefix")
    common(p)
    p.add_argument("--prefix", help="comma separated counts of the leading cells")
    p.add_argument("--engine", choices=("lp", "ip", "shuttle"))
    return parser


COMMANDS = {
    "count": cmd_count,
    "pvalue": cmd_pvalue,
    "enumerate": cmd_enumerate,
    "check": cmd_check,
    "bounds": cmd_bounds,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "samples", 1) < 1 or getattr(args, "jobs", 1) < 1 or args.budget < 1:
        parser.error("--samples, --jobs and --budget must be positive")
    try:
        report, code = COMMANDS[args.command](args)
    except (ModelError, UsageError, ValueError, OSError) as exc:
        print(f"sistables: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"sistables: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ArithmeticError, AssertionError) as exc:
        print(f"sistables: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    report = {"command": args.command, **report}
    if args.format == "machine":
        print(json.dumps(report, sort_keys=True, default=_number))
    else:
        print(_format_text(args.command, report))
    return code


if __name__ == "__main__":
    sys.exit(main())
