#!/usr/bin/env python3
"""
Command Line Front End for the Berarducci Tree Engine
Parses terms, reduces them, classifies them, computes their normal form
trees and runs the confluence, prepend, convergence and axiom checks
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from term_core import TermError, format_position, truncate
from syntax import Parsed, parse, print_finite, print_truncated
from reduction import (
    Strategy, check_strong_convergence, reduce, replay_trace,
    trace_from_jsonl, trace_to_jsonl,
)
from rnf import crnf, has_rnf, is_rnf, whnf
from meaningless import axiom_check
from bohm import (
    FuelExhausted, confluence_check, is_tainted, nu_tree, nu_tree_truncated,
    prepend_check, provenance_up_to, tree_to_json,
)
from config import EngineConfig
from corpus import DemoCorpus

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


class UsageError(TermError):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("term", nargs="?", help="Term in surface syntax")
    common.add_argument("--demo", help="Named corpus term ('list' prints the corpus)")
    common.add_argument("--file", help="Read the term from a file")
    common.add_argument("--fuel", type=int, default=200, help="Weak head steps per question (default: 200)")
    common.add_argument("--depth", type=int, default=16, help="Observation depth (default: 16)")
    common.add_argument("--seed", type=lambda text: int(text, 0), default=0xC0FFEE, help="Random seed")
    common.add_argument("--oracle", choices=["root-active", "head-ogre", "bot-only"], default="root-active")
    common.add_argument("--policy", choices=["assume", "strict"], default="assume")
    common.add_argument("--output", choices=["text", "json"], default="text")
    common.add_argument("--strict", action="store_true", help="Fail results that rest on assumed verdicts")
    common.add_argument("--snapshot-depth", type=int, default=8, help="Truncation depth of trace snapshots")
    common.add_argument("--redex-depth", type=int, default=8, help="Redex search depth of strategies")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level on stderr")

    parser = argparse.ArgumentParser(prog="berarducci", description="Lazy infinitary lambda calculus engine")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("parse", parents=[common], help="Echo the canonical form of a term")
    sub.add_parser("whnf", parents=[common], help="Weak head normal form")
    sub.add_parser("crnf", parents=[common], help="Canonical root normal form")
    sub.add_parser("classify", parents=[common], help="Root normal form and membership verdicts")
    sub.add_parser("tree", parents=[common], help="Normal form tree with provenance")

    reduce_cmd = sub.add_parser("reduce", parents=[common], help="Write a reduction trace")
    reduce_cmd.add_argument("--strategy", default="lo", help="lo, wh, bottom-first, random or random:SEED")
    reduce_cmd.add_argument("--k", type=int, default=10, help="Number of steps")
    reduce_cmd.add_argument("--out", help="Trace file (default: stdout)")

    confluence_cmd = sub.add_parser("confluence", parents=[common], help="Compare two reduction branches")
    confluence_cmd.add_argument("--s1", default="wh", help="First strategy")
    confluence_cmd.add_argument("--s2", default="random", help="Second strategy")
    confluence_cmd.add_argument("--k", type=int, default=10, help="Steps per branch")
    confluence_cmd.add_argument("--out", help="Prefix of the two branch trace files")

    prepend_cmd = sub.add_parser("prepend", parents=[common], help="Tree of a term against the tree of a reduct")
    prepend_cmd.add_argument("--trace", help="Trace file starting at the term")
    prepend_cmd.add_argument("--strategy", default="random", help="Strategy when no trace file is given")
    prepend_cmd.add_argument("--k", type=int, default=8, help="Steps when no trace file is given")

    converge_cmd = sub.add_parser("converge", parents=[common], help="Strong convergence table of a trace")
    converge_cmd.add_argument("--trace", required=True, help="Trace file")

    axioms_cmd = sub.add_parser("axioms", parents=[common], help="Spot-check the axioms on the corpus")
    axioms_cmd.add_argument("--trials", type=int, default=200, help="Draws per axiom")
    return parser


def make_config(args: argparse.Namespace) -> EngineConfig:
    return EngineConfig(
        fuel=args.fuel, depth=args.depth, seed=args.seed, oracle=args.oracle,
        policy=args.policy, output=args.output, strict=args.strict,
        snapshot_depth=args.snapshot_depth, redex_depth=args.redex_depth,
    )


def read_term(args: argparse.Namespace, corpus: DemoCorpus, required: bool = True) -> Optional[Parsed]:
    sources = [source for source in (args.term, args.demo, args.file) if source is not None]
    if len(sources) > 1:
        raise UsageError("give the term once: positional, --demo or --file")
    if args.demo is not None:
        return corpus.parsed(args.demo)
    if args.file is not None:
        try:
            return parse(Path(args.file).read_text(encoding="utf-8"), allow_open=True)
        except OSError as e:
            raise UsageError(f"cannot read {args.file}: {e}")
    if args.term is not None:
        return parse(args.term, allow_open=True)
    if required:
        raise UsageError("no term given")
    return None


def read_trace(path: str):
    try:
        return trace_from_jsonl(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}")


class Reporter:
    """Collects the text lines or the JSON document of one command"""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.lines: List[str] = []
        self.document = {"config": config.echo()}

    def line(self, text: str = "") -> None:
        self.lines.append(text)

    def put(self, key: str, value) -> None:
        self.document[key] = value

    def flush(self) -> None:
        if self.config.output == "json":
            sys.stdout.write(json.dumps(self.document, indent=2, ensure_ascii=False) + "\n")
        else:
            sys.stdout.write("\n".join(self.lines) + ("\n" if self.lines else ""))


def _tainted_exit(config: EngineConfig, tainted: bool) -> int:
    return EXIT_CHECK_FAILED if (tainted and config.strict) else EXIT_OK


# ----------------------------------------------------------------------------
# Commands

def cmd_parse(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    out.line(print_truncated(parsed.term, config.depth, "named", parsed.free_names))
    out.line(print_truncated(parsed.term, config.depth, "debruijn"))
    out.put("term", truncate(parsed.term, config.depth).to_json())
    out.put("text", print_truncated(parsed.term, config.depth, "named", parsed.free_names))
    out.put("free", list(parsed.free_names))
    return EXIT_OK


def cmd_whnf(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    result = whnf(parsed.term, config.fuel)
    text = print_truncated(result.term, config.depth, "named", parsed.free_names)
    out.line(text)
    out.line(f"steps: {result.steps}" + (" (fuel exhausted)" if result.exhausted else ""))
    out.put("term", truncate(result.term, config.depth).to_json())
    out.put("steps", result.steps)
    out.put("exhausted", result.exhausted)
    return EXIT_OK


def cmd_crnf(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    result = crnf(parsed.term, config.fuel)
    out.line(f"verdict: {result.verdict}")
    if result.term is not None:
        out.line(print_truncated(result.term, config.depth, "named", parsed.free_names))
    out.line(f"steps: {result.whnf_steps}")
    out.put("verdict", result.verdict.to_json())
    out.put("term", None if result.term is None else truncate(result.term, config.depth).to_json())
    out.put("steps", result.whnf_steps)
    return EXIT_OK


def cmd_classify(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    oracle = config.make_oracle()
    rnf = is_rnf(parsed.term, config.fuel)
    has = has_rnf(parsed.term, config.fuel)
    raw = oracle.membership(parsed.term)
    member = oracle.resolve(raw)
    out.line(f"rnf: {rnf}")
    out.line(f"has-rnf: {has}")
    out.line(f"in-U: {member}")
    out.put("rnf", rnf.to_json())
    out.put("has_rnf", has.to_json())
    out.put("membership", raw.to_json())
    out.put("in_u", member.to_json())
    return _tainted_exit(config, member.assumed)


def cmd_tree(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    oracle = config.make_oracle()
    tree = nu_tree(parsed.term, oracle)
    finite = nu_tree_truncated(parsed.term, oracle, config.depth)
    tainted = is_tainted(tree, config.depth)
    out.line(print_finite(finite, "named", parsed.free_names))
    for p, prov in provenance_up_to(tree, config.depth).items():
        if prov.origin.value != "structural":
            out.line(f"  {format_position(p)}: {prov.origin.value}" + (f" ({prov.reason})" if prov.reason else ""))
    if tainted:
        out.line("tainted: rests on assumed bottoms")
    out.put("tree", tree_to_json(tree, config.depth))
    out.put("tainted", tainted)
    return _tainted_exit(config, tainted)


def cmd_reduce(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    strat = Strategy.parse(args.strategy, config.seed, config.redex_depth)
    tr = reduce(parsed.term, strat, args.k, config.make_oracle())
    header = dict(config.echo(), strategy=strat.describe(), k=args.k)
    text = trace_to_jsonl(tr, config.snapshot_depth, header)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        out.line(f"{len(tr)} steps written to {args.out}")
        out.put("trace_file", args.out)
        out.put("steps", len(tr))
        out.flush()
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_confluence(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    oracle = config.make_oracle()
    s1 = Strategy.parse(args.s1, config.seed, config.redex_depth)
    s2 = Strategy.parse(args.s2, config.seed, config.redex_depth)
    report = confluence_check(parsed.term, s1, s2, args.k, config.depth, oracle, config.echo())
    if args.out:
        paths = (f"{args.out}.1.jsonl", f"{args.out}.2.jsonl")
        for path, strat, tr in zip(paths, report.strategies, report.traces):
            header = dict(config.echo(), strategy=strat.describe(), k=args.k)
            Path(path).write_text(trace_to_jsonl(tr, config.snapshot_depth, header), encoding="utf-8")
        report.trace_files = paths
    out.line(f"status: {report.status.value}")
    for i, tree in enumerate(report.trees, 1):
        out.line(f"branch {i}: {print_finite(tree, 'named', parsed.free_names)}")
    if report.difference is not None:
        out.line(f"first difference at {format_position(report.difference)}")
    out.document.update(report.to_json())
    if report.equal:
        return _tainted_exit(config, report.tainted)
    return _tainted_exit(config, True) if report.tainted else EXIT_CHECK_FAILED


def cmd_prepend(args, config: EngineConfig, parsed: Parsed, out: Reporter) -> int:
    oracle = config.make_oracle()
    if args.trace:
        recorded, _ = read_trace(args.trace)
        tr = replay_trace(parsed.term, recorded)
    else:
        strat = Strategy.parse(args.strategy, config.seed, config.redex_depth)
        tr = reduce(parsed.term, strat, args.k, oracle)
    holds = prepend_check(parsed.term, tr, config.depth, oracle)
    tainted = is_tainted(nu_tree(parsed.term, oracle), config.depth) or is_tainted(nu_tree(tr.end, oracle), config.depth)
    out.line(f"prepend: {'holds' if holds else 'FAILS'} over {len(tr)} steps to depth {config.depth}")
    if tainted:
        out.line("tainted: rests on assumed bottoms")
    out.put("holds", holds)
    out.put("steps", len(tr))
    out.put("tainted", tainted)
    if holds:
        return _tainted_exit(config, tainted)
    return _tainted_exit(config, True) if tainted else EXIT_CHECK_FAILED


def cmd_converge(args, config: EngineConfig, parsed: Optional[Parsed], out: Reporter) -> int:
    recorded, _ = read_trace(args.trace)
    tr = recorded if parsed is None else replay_trace(parsed.term, recorded)
    report = check_strong_convergence(tr, config.depth)
    out.line(report.summary())
    out.line(report.to_frame().to_string(index=False))
    out.put("convergence", report.to_json())
    return EXIT_OK if report.consistent else EXIT_CHECK_FAILED


def cmd_axioms(args, config: EngineConfig, parsed: Optional[Parsed], out: Reporter, corpus: DemoCorpus) -> int:
    oracle = config.make_oracle()
    terms = corpus.as_mapping()
    if parsed is not None:
        terms["input"] = parsed.term
    report = axiom_check(oracle, terms, config.depth, args.trials, config.seed)
    out.line(report.to_frame().to_string(index=False))
    for axiom in report.failed_axioms():
        for witness in report.outcomes[axiom].fail_witnesses:
            out.line(f"{axiom}: {witness.label or witness.term} -> {witness.replay}")
    out.document.update(report.to_json())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


COMMANDS = {
    "parse": cmd_parse,
    "whnf": cmd_whnf,
    "crnf": cmd_crnf,
    "classify": cmd_classify,
    "tree": cmd_tree,
    "reduce": cmd_reduce,
    "confluence": cmd_confluence,
    "prepend": cmd_prepend,
}


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    corpus = DemoCorpus()
    if args.demo == "list":
        sys.stdout.write(corpus.to_frame().to_string(index=False) + "\n")
        return EXIT_OK

    try:
        config = make_config(args)
        optional_term = args.command in ("converge", "axioms")
        parsed = read_term(args, corpus, required=not optional_term)
    except (ValidationError, TermError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE

    out = Reporter(config)
    try:
        if args.command == "converge":
            code = cmd_converge(args, config, parsed, out)
        elif args.command == "axioms":
            code = cmd_axioms(args, config, parsed, out, corpus)
        else:
            code = COMMANDS[args.command](args, config, parsed, out)
    except FuelExhausted as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_CHECK_FAILED
    except TermError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    if args.command != "reduce":
        out.flush()
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
