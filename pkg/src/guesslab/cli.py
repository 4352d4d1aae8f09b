"""Batch command line: one subcommand per pipeline step.

Every run writes one JSON record per line to ``--out`` (default stdout),
starting with an echo of the parsed configuration, and a short human
summary to stderr.  Identical configurations produce byte-identical
record streams.  Exit status: 0 on success, 1 when a check fails or a
module reports an error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from . import __version__
from .diagonal import diagonalize, sweep_agreements, threshold_window
from .errors import GuesslabError
from .filter_lab import (
    DEFAULT_FIP_ARITY,
    FilterBase,
    base_from_tree,
    check_fip,
    extend_good,
    isbell_family,
    isbell_independence,
    sky_probe,
)
from .fubini import build_sum, make_codec, sum_guess_levels
from .funcspec import parse_funcspec
from .guessing import (
    GuessingStructure,
    full_powerset_structure,
    guess_levels,
    random_structure,
    random_subject,
)
from .probability import bc_partial_sum, exact_guess_measure, mc_guess_fraction
from .pseudo_tree import (
    PseudoTree,
    StageLog,
    check_stage_conditions,
    construct_splitting_tree,
    frontier_branches,
    verify_splitting,
    verify_star,
)
from .selector import (
    FinitePartition,
    extract_selector,
    selector_vs_base,
    square_partition,
)
from .windows import SetWindow


class Reporter:
    def __init__(self, out_path: str | None):
        self._fh = open(out_path, "w") if out_path else sys.stdout
        self._owned = out_path is not None

    def emit(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
        self._fh.write("\n")

    def close(self) -> None:
        if self._owned:
            self._fh.close()
        else:
            self._fh.flush()


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _config_record(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"record": "config", "version": __version__, **cfg}


def _stage_log_dict(log: StageLog) -> dict:
    d = {
        "stage": log.stage,
        "parity": log.parity,
        "mark_after": log.mark_after,
        "maximal_before": [list(x) for x in log.maximal_before],
        "added": [list(x) for x in log.added],
    }
    if log.allocation is not None:
        d["allocation"] = {
            ",".join(map(str, sorted(k))): v for k, v in sorted(
                log.allocation.items(), key=lambda kv: (len(kv[0]), sorted(kv[0]))
            )
        }
        d["exact_allocation"] = log.exact_allocation
    return d


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_build_tree(args, rep: Reporter) -> int:
    pi = parse_funcspec(args.pi)
    tree, logs = construct_splitting_tree(pi, args.stages, args.h_cap)
    if args.out_tree:
        tree.save(args.out_tree)
    if args.out_log:
        with open(args.out_log, "w") as fh:
            json.dump([_stage_log_dict(l) for l in logs], fh, indent=1)
    rep.emit(
        {
            "record": "tree",
            "horizon": tree.horizon,
            "nodes": tree.node_count(),
            "stage_marks": list(tree.stage_marks),
            "branches": len(tree.frontier_cache or ()),
        }
    )
    _say(
        f"built {args.stages}-stage tree: horizon {tree.horizon}, "
        f"{tree.node_count()} nodes"
    )
    return 0


def _default_frontier(tree: PseudoTree) -> int:
    stages = len(tree.stage_marks) - 1
    if stages <= 0:
        return 0
    last_even = stages - 1 if (stages - 1) % 2 == 0 else stages - 2
    return tree.stage_marks[max(last_even, 0)]


def cmd_verify(args, rep: Reporter) -> int:
    tree = PseudoTree.load(args.infile)
    frontier = args.frontier if args.frontier is not None else _default_frontier(tree)
    split = verify_splitting(tree, frontier)
    rep.emit({**split.to_record(), "frontier": frontier})
    stages = check_stage_conditions(tree)
    rep.emit(stages.to_record())
    branches = frontier_branches(tree)
    star = verify_star(tree, branches)
    rep.emit(
        {
            "record": "star",
            "branches": len(branches),
            "exact_levels": star,
        }
    )
    ok = split.ok and stages.ok
    _say(
        f"verify: splitting {'ok' if split.ok else 'FAIL'}, "
        f"stage conditions {'ok' if stages.ok else 'FAIL'}, "
        f"{len(star)} exact-guess levels for the full frontier"
    )
    return 0 if ok else 1


def cmd_base(args, rep: Reporter) -> int:
    tree = PseudoTree.load(args.infile)
    branches = frontier_branches(tree)
    base = base_from_tree(tree, branches)
    if args.out_base:
        base.save(args.out_base)
    fip = check_fip(base, min(args.arity, len(base.generators)))
    rep.emit(
        {
            "record": "base",
            "generators": list(base.names()),
            "empty": list(base.empty_names()),
        }
    )
    rep.emit(fip.to_record())
    _say(
        f"base: {len(base.generators)} generators, FIP at arity {fip.arity} "
        f"{'ok' if fip.ok else 'FAIL'}"
    )
    return 0 if fip.ok else 1


def cmd_sky(args, rep: Reporter) -> int:
    base = FilterBase.load(args.in_base)
    verdict = sky_probe(
        parse_funcspec(args.pi),
        parse_funcspec(args.f),
        base,
        [parse_funcspec(t) for t in args.tests],
        relation="<" if args.relation == "lt" else ">=",
        arity=args.arity,
        midpoint=args.midpoint,
    )
    rep.emit(verdict.to_record())
    _say(f"sky probe ({verdict.relation}): {verdict.verdict}")
    return 0


def cmd_extend(args, rep: Reporter) -> int:
    base = FilterBase.load(args.in_base)
    extended = extend_good(
        base,
        parse_funcspec(args.pi),
        parse_funcspec(args.f),
        parse_funcspec(args.g),
        arity=args.arity,
    )
    if args.out_base:
        extended.save(args.out_base)
    fip = check_fip(extended, min(args.arity, len(extended.generators)))
    rep.emit(
        {
            "record": "extend",
            "adjoined": extended.names()[-1],
            "window_hex": extended.generators[-1][1].to_hex(),
        }
    )
    rep.emit(fip.to_record())
    _say(f"extended base with {extended.names()[-1]}; FIP {'ok' if fip.ok else 'FAIL'}")
    return 0 if fip.ok else 1


def cmd_bc(args, rep: Reporter) -> int:
    if args.infile:
        structure = GuessingStructure.load(args.infile)
        report = bc_partial_sum(structure=structure, n_terms=args.n_terms)
    else:
        report = bc_partial_sum(
            pi=parse_funcspec(args.pi),
            f=parse_funcspec(args.f),
            n_terms=args.n_terms,
        )
    rep.emit(report.to_record())
    _say(
        f"partial sum after {args.n_terms} terms: "
        f"{report.partial_sums[-1] if report.partial_sums else 0.0:.12g} "
        f"({'divergent?' if report.divergence_flag else 'settling'})"
    )
    return 0


def cmd_measure(args, rep: Reporter) -> int:
    structure = GuessingStructure.load(args.infile)
    start, stop = args.window
    value = exact_guess_measure(structure, start, stop)
    rep.emit(
        {
            "record": "exact_measure",
            "window": [start, stop],
            "numerator": value.numerator,
            "denominator": value.denominator,
            "value": float(value),
        }
    )
    _say(f"exact guess measure on [{start},{stop}): {value} = {float(value):.6g}")
    return 0


def cmd_mc(args, rep: Reporter) -> int:
    if args.infile:
        structure = GuessingStructure.load(args.infile)
    else:
        structure = random_structure(
            parse_funcspec(args.pi),
            parse_funcspec(args.f),
            args.horizon,
            args.gen_seed,
        )
    start, stop = args.window
    report = mc_guess_fraction(structure, start, stop, args.trials, args.seed)
    rep.emit(report.to_record())
    _say(
        f"mc fraction on [{start},{stop}): {report.fraction} "
        f"({report.hits}/{report.trials}, stderr {report.stderr:.3g})"
    )
    return 0


def cmd_diag(args, rep: Reporter) -> int:
    if args.full_powerset:
        structure = full_powerset_structure(args.full_powerset)
    else:
        structure = GuessingStructure.load(args.infile)
    cert = diagonalize(structure)
    if args.out_cert:
        cert.save(args.out_cert)
    rep.emit(
        {
            "record": "diagonal",
            "avoid_levels": sorted(cert.avoid_levels.members()),
            "picked_levels": len(cert.chosen),
            "invariant_ok": cert.verify(),
        }
    )
    sweep_bits = args.sweep_bits
    if sweep_bits is None:
        sweep_bits = min(structure.subject_horizon, 16)
    sweep = sweep_agreements(cert, sweep_bits)
    rep.emit(sweep.to_record())
    ok = cert.verify() and sweep.ok
    _say(
        f"diagonal: {len(cert.chosen)} picks, sweep over 2^{sweep_bits} "
        f"subjects max agreement {sweep.max_agreement} "
        f"({'ok' if sweep.ok else 'FAIL'})"
    )
    return 0 if ok else 1


def cmd_fubini(args, rep: Reporter) -> int:
    comps = [GuessingStructure.load(p) for p in args.infile]
    codec = make_codec(args.codec, args.width)
    summed = build_sum(comps, codec)
    if args.out_sum:
        with open(args.out_sum, "w") as fh:
            json.dump(summed.to_descriptor(args.infile), fh, indent=1)
    width = summed.subject_horizon
    checked = 0
    for t in range(args.subjects):
        x = random_subject(width, args.seed, t)
        sum_guess_levels(summed, x)  # raises on any rectangle-law violation
        checked += 1
    rep.emit(
        {
            "record": "fubini",
            "components": len(comps),
            "code_horizon": summed.code_horizon,
            "subjects_checked": checked,
            "rectangle_ok": True,
        }
    )
    _say(f"fubini: rectangle law held on {checked} sampled subjects")
    return 0


def cmd_selector(args, rep: Reporter) -> int:
    if args.square:
        partition = square_partition(args.square)
    else:
        bounds = [int(b) for b in args.boundaries.split(",")]
        partition = FinitePartition.from_boundaries(bounds)
    if args.source_hex is not None:
        source = SetWindow.from_hex(args.source_hex, partition.horizon)
        result = extract_selector(partition, source)
        rep.emit(result.to_record())
    base = FilterBase.load(args.in_base)
    report = selector_vs_base(partition, base, args.trials, args.seed)
    rep.emit(report.to_record())
    _say(
        f"selector: meets-all fraction {report.fraction} over {report.trials} "
        f"trials (invariant {'ok' if report.selector_invariant_ok else 'FAIL'})"
    )
    return 0 if report.selector_invariant_ok else 1


def cmd_isbell(args, rep: Reporter) -> int:
    indices = [
        SetWindow.from_hex(h, args.ground_cap) for h in args.indices.split(",")
    ]
    family = isbell_family(args.ground_cap, indices, arity=args.arity)
    report = isbell_independence(family)
    rep.emit(
        {
            "record": "isbell_family",
            "ground_size": len(family.ground),
            "indices": [w.to_hex() for w in family.indices],
        }
    )
    rep.emit(report.to_record())
    _say(
        f"isbell: {report.combinations} combinations at arity {report.arity} "
        f"{'all nonempty' if report.ok else 'FAIL'}"
    )
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def _window_pair(parser, sub):
    sub.add_argument(
        "--window",
        nargs=2,
        type=int,
        metavar=("M", "N"),
        required=True,
        help="level window [M, N)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guesslab",
        description="Finite-horizon guessing structures, splitting trees, "
        "filter bases, and their probability checks.",
    )
    parser.add_argument("--out", help="write JSONL records here instead of stdout")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p = subs.add_parser("build-tree", help="construct a splitting tree")
    p.add_argument("--pi", required=True, help="capacity function expression")
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--h-cap", type=int, default=1 << 26)
    p.add_argument("--out-tree", help="tree file path")
    p.add_argument("--out-log", help="stage log audit file path")
    p.set_defaults(func=cmd_build_tree)

    p = subs.add_parser("verify", help="splitting, stage conditions, star levels")
    p.add_argument("--in", dest="infile", required=True, help="tree file")
    p.add_argument("--frontier", type=int, help="branching safety frontier")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("base", help="filter base from a tree plus FIP check")
    p.add_argument("--in", dest="infile", required=True, help="tree file")
    p.add_argument("--arity", type=int, default=DEFAULT_FIP_ARITY)
    p.add_argument("--out-base", help="base file path")
    p.set_defaults(func=cmd_base)

    p = subs.add_parser("sky", help="growth-gap probe over a test family")
    p.add_argument("--pi", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--in-base", required=True, help="base file")
    p.add_argument("--tests", nargs="+", required=True)
    p.add_argument("--relation", choices=("lt", "geq"), default="lt")
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--midpoint", type=int)
    p.set_defaults(func=cmd_sky)

    p = subs.add_parser("extend", help="adjoin a growth-gap window to a base")
    p.add_argument("--in-base", required=True)
    p.add_argument("--pi", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--arity", type=int, default=DEFAULT_FIP_ARITY)
    p.add_argument("--out-base")
    p.set_defaults(func=cmd_extend)

    p = subs.add_parser("bc", help="partial sums of per-level guessing chances")
    p.add_argument("--pi")
    p.add_argument("--f")
    p.add_argument("--in", dest="infile", help="structure file (overrides specs)")
    p.add_argument("--n-terms", type=int, required=True)
    p.set_defaults(func=cmd_bc)

    p = subs.add_parser("measure", help="exact guess measure on a window")
    p.add_argument("--in", dest="infile", required=True, help="structure file")
    _window_pair(parser, p)
    p.set_defaults(func=cmd_measure)

    p = subs.add_parser("mc", help="Monte Carlo guess fraction on a window")
    p.add_argument("--in", dest="infile", help="structure file")
    p.add_argument("--pi", help="generate a random structure instead")
    p.add_argument("--f")
    p.add_argument("--horizon", type=int, default=64)
    p.add_argument("--gen-seed", type=int, default=0)
    _window_pair(parser, p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_mc)

    p = subs.add_parser("diag", help="diagonalize and sweep threadability")
    p.add_argument("--in", dest="infile", help="structure file")
    p.add_argument(
        "--full-powerset",
        type=int,
        metavar="H",
        help="use the full-powerset structure of this horizon",
    )
    p.add_argument("--sweep-bits", type=int)
    p.add_argument("--out-cert")
    p.set_defaults(func=cmd_diag)

    p = subs.add_parser("fubini", help="build a sum structure, check rectangles")
    p.add_argument(
        "--in",
        dest="infile",
        action="append",
        required=True,
        help="component structure file (repeat)",
    )
    p.add_argument("--codec", choices=("cantor", "rowmajor"), default="cantor")
    p.add_argument("--width", type=int, help="rowmajor width")
    p.add_argument("--subjects", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-sum")
    p.set_defaults(func=cmd_fubini)

    p = subs.add_parser("selector", help="extract selectors against a base")
    p.add_argument("--square", type=int, metavar="H", help="square partition")
    p.add_argument("--boundaries", help="comma-separated piece boundaries")
    p.add_argument("--in-base", required=True)
    p.add_argument("--source-hex", help="also extract from this supplied source")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_selector)

    p = subs.add_parser("isbell", help="independent family over a coded ground set")
    p.add_argument("--ground-cap", type=int, required=True)
    p.add_argument("--indices", required=True, help="comma-separated hex windows")
    p.add_argument("--arity", type=int, default=4)
    p.set_defaults(func=cmd_isbell)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "bc" and not args.infile and not (args.pi and args.f):
        parser.error("bc needs either --in or both --pi and --f")
    if args.subcommand == "mc" and not args.infile and not (args.pi and args.f):
        parser.error("mc needs either --in or both --pi and --f")
    if args.subcommand == "diag" and not args.infile and not args.full_powerset:
        parser.error("diag needs either --in or --full-powerset")
    if args.subcommand == "selector" and not args.square and not args.boundaries:
        parser.error("selector needs either --square or --boundaries")
    rep = Reporter(args.out)
    rep.emit(_config_record(args))
    try:
        code = args.func(args, rep)
    except GuesslabError as exc:
        rep.emit(
            {
                "record": "error",
                "error": type(exc).__name__,
                "message": str(exc),
            }
        )
        _say(f"error: {exc}")
        code = 1
    finally:
        rep.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
