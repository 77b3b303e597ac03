"""Command line: ``parsetalk run`` (corpus comparison) and ``parsetalk parse``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .chart import CONTIGUOUS, DEFAULT_EDGE_BUDGET, DISC, ChartConfig, EdgeBudgetExceeded, chart_parse
from .grammar import GrammarError, bundled_text, load_grammar
from .harness import (
    HARNESS_EDGE_BUDGET,
    bundled_corpus,
    PARSER_TAGS,
    ConfluenceViolation,
    compare_reports,
    emit_outputs,
    parse_seeds,
    run_corpus,
    summary_text,
)
from .kb import KBError, load_kb
from .output import AnalysisBlock, format_block, to_json
from .parser import parse
from .runtime import ProtocolViolation

EXIT_OK, EXIT_ERROR, EXIT_CONFLUENCE, EXIT_PROTOCOL = 0, 1, 2, 3


def _read(path: str | None, bundled: str) -> str:
    return bundled_text(bundled) if path is None else Path(path).read_text(encoding="utf-8")


def _parsers(text: str) -> tuple[str, ...]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    bad = [n for n in names if n not in PARSER_TAGS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown parser(s): {', '.join(bad)}")
    return tuple(PARSER_TAGS[n] for n in names)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parsetalk", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="compare predicate call counts over a corpus")
    run.add_argument("--grammar", help="grammar file (default: bundled toy.grammar)")
    run.add_argument("--kb", help="KB file (default: bundled toy.kb)")
    run.add_argument("--corpus", help="corpus file (default: bundled corpus.tsv)")
    run.add_argument("--seeds", default="1..20", type=parse_seeds, help="e.g. 1..20 or 1,5,9")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--parsers", default="pt,cp,cpdisc", type=_parsers)
    run.add_argument("--edge-budget", type=int, default=HARNESS_EDGE_BUDGET)
    run.add_argument("--trace", action="store_true", help="write message traces of the first seed")

    p = sub.add_parser("parse", help="parse sentences, one per line")
    p.add_argument("input", nargs="?", default="-", help="input file, or - for stdin")
    p.add_argument("--grammar")
    p.add_argument("--kb")
    p.add_argument("--parser", choices=sorted(PARSER_TAGS), default="pt")
    p.add_argument("--seed", type=int, default=int(os.environ.get("PARSETALK_SEED", "0")),
                   help="scheduler seed (default: $PARSETALK_SEED or 0)")
    p.add_argument("--edge-budget", type=int, default=DEFAULT_EDGE_BUDGET)
    p.add_argument("--json", action="store_true", help="structured output instead of line blocks")
    p.add_argument("--trace", action="store_true", help="print the message trace after each block")
    return ap


def cmd_run(args: argparse.Namespace) -> int:
    grammar = load_grammar(_read(args.grammar, "toy.grammar"))
    kb = load_kb(_read(args.kb, "toy.kb"))
    corpus = bundled_corpus() if args.corpus is None else args.corpus
    report = run_corpus(corpus, grammar, kb, args.seeds, args.parsers, args.edge_budget, args.trace)
    emit_outputs(report, args.out)
    sys.stdout.write(summary_text(report, compare_reports(report)))
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    grammar = load_grammar(_read(args.grammar, "toy.grammar"))
    kb = load_kb(_read(args.kb, "toy.kb"))
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text(encoding="utf-8")
    tag = PARSER_TAGS[args.parser]
    blocks = []
    traces = []
    for i, line in enumerate((ln for ln in text.splitlines() if ln.strip()), 1):
        tokens = line.split()
        if tag == "PT":
            r = parse(tokens, grammar, kb, seed=args.seed, trace=args.trace)
            blocks.append(AnalysisBlock(i, tag, tokens, r.analyses, r.fragments, r.diagnostics["events"]))
            traces.append(r.diagnostics["trace"])
        else:
            config = ChartConfig(CONTIGUOUS if tag == "CP" else DISC, args.edge_budget)
            try:
                cr = chart_parse(tokens, grammar, kb, config)
                blocks.append(AnalysisBlock(i, tag, tokens, cr.analyses))
            except EdgeBudgetExceeded:
                blocks.append(AnalysisBlock(i, tag, tokens, [], aborted="edge-budget"))
            traces.append([])
    if args.json:
        sys.stdout.write(to_json(blocks))
    else:
        for block, trace in zip(blocks, traces):
            sys.stdout.write(format_block(block))
            for t in trace:
                sys.stdout.write(f"trace {t}\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return cmd_run(args) if args.command == "run" else cmd_parse(args)
    except ConfluenceViolation as exc:
        print(f"confluence violation: {exc}", file=sys.stderr)
        return EXIT_CONFLUENCE
    except ProtocolViolation as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (GrammarError, KBError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
