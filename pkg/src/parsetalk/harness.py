"""Corpus runner comparing predicate call counts of PT, CP and CP.disc."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .chart import CONTIGUOUS, DISC, ChartConfig, ChartResult, EdgeBudgetExceeded, chart_parse
from .checks import CON, SYN, CheckCounters
from .grammar import Grammar, bundled_text, load_grammar
from .kb import KnowledgeBase, load_kb
from .output import AnalysisBlock, format_block, to_json
from .parser import PT, ParseResult, parse

PARSER_TAGS = {"pt": "PT", "cp": "CP", "cpdisc": "CP.disc"}
TAG_ORDER = ("PT", "CP", "CP.disc")
PREDICATES = (SYN, CON)
# The chart's own default cap (10**6 edges) takes hours in pure Python on the
# bundled grammar; the harness uses a cap that the adversarial item exceeds
# and every other corpus item stays well below.
HARNESS_EDGE_BUDGET = 4000
REFERENCE_FACTORS = {"CP": "4-5", "CP.disc": "6-9"}
FLAGS = frozenset({"grammatical", "ungrammatical", "discontinuous", "ambiguous", "adversarial"})


class ConfluenceViolation(Exception):
    def __init__(self, sentence_id: int, seed: int, detail: str):
        self.sentence_id = sentence_id
        self.seed = seed
        super().__init__(f"sentence {sentence_id}: seed {seed} diverges from the first seed ({detail})")


@dataclass(frozen=True)
class CorpusEntry:
    id: int
    tokens: tuple[str, ...]
    flags: frozenset[str] = frozenset({"grammatical"})
    expected_analyses: str | None = None

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def load_corpus(text: str) -> list[CorpusEntry]:
    """Parse ``id<TAB>flags<TAB>sentence`` lines; flags comma-separated or ``-``."""
    entries: list[CorpusEntry] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ValueError(f"corpus line {lineno}: expected 3 tab-separated fields")
        sid, flag_text, sentence = parts
        flags = frozenset() if flag_text.strip() == "-" else frozenset(f.strip() for f in flag_text.split(","))
        unknown = flags - FLAGS
        if unknown:
            raise ValueError(f"corpus line {lineno}: unknown flag(s) {sorted(unknown)}")
        if "ungrammatical" not in flags:
            flags |= {"grammatical"}
        tokens = tuple(sentence.split())
        if not tokens:
            raise ValueError(f"corpus line {lineno}: empty sentence")
        entries.append(CorpusEntry(int(sid), tokens, flags))
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("corpus ids are not unique")
    if ids != sorted(ids):
        raise ValueError("corpus ids are not in increasing order")
    return entries


def bundled_corpus() -> list[CorpusEntry]:
    return load_corpus(bundled_text("corpus.tsv"))


def parse_seeds(spec: str) -> list[int]:
    """``"1..20"`` or ``"1,4,7"`` (or a mix) to a sorted, de-duplicated list."""
    seeds: set[int] = set()
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.update(range(int(lo), int(hi) + 1))
        elif part:
            seeds.add(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {spec!r}")
    return sorted(seeds)


@dataclass
class SentenceRun:
    entry: CorpusEntry
    pt: ParseResult | None = None
    charts: dict[str, ChartResult] = field(default_factory=dict)
    aborted: dict[str, str] = field(default_factory=dict)


@dataclass
class RunReport:
    seeds: list[int] = field(default_factory=list)
    parsers: tuple[str, ...] = TAG_ORDER
    edge_budget: int = HARNESS_EDGE_BUDGET
    runs: list[SentenceRun] = field(default_factory=list)
    # (sentence id, parser tag, predicate) -> count; None marks a budget abort
    counts: dict[tuple[int, str, str], int | None] = field(default_factory=dict)

    def count(self, sentence_id: int, tag: str, predicate: str) -> int | None:
        return self.counts[sentence_id, tag, predicate]

    def rows(self) -> list[tuple[int, str, str, int | None]]:
        order = {t: i for i, t in enumerate(TAG_ORDER)}
        return sorted(
            ((s, t, p, c) for (s, t, p), c in self.counts.items()),
            key=lambda r: (r[0], order[r[1]], PREDICATES.index(r[2])),
        )

    def run(self, sentence_id: int) -> SentenceRun:
        return next(r for r in self.runs if r.entry.id == sentence_id)


def _signature(result: ParseResult) -> tuple:
    return (
        tuple(a.key() for a in result.analyses),
        tuple(f.key() for f in result.fragments),
        result.diagnostics["syn"],
        result.diagnostics["con"],
    )


def run_pt(entry: CorpusEntry, grammar: Grammar, kb: KnowledgeBase, seeds: list[int], trace: bool = False) -> ParseResult:
    """Parse once per seed and insist that every seed agrees with the first."""
    first: ParseResult | None = None
    for seed in seeds:
        result = parse(list(entry.tokens), grammar, kb, seed=seed, trace=trace and first is None)
        if first is None:
            first = result
            continue
        a, b = _signature(first), _signature(result)
        if a != b:
            what = ["analyses", "fragments", "SYN count", "CON count"]
            diff = ", ".join(w for w, x, y in zip(what, a, b) if x != y)
            raise ConfluenceViolation(entry.id, seed, diff)
    assert first is not None
    return first


def run_corpus(
    corpus: str | Path | list[CorpusEntry],
    grammar: str | Path | Grammar,
    kb: str | Path | KnowledgeBase,
    seeds: list[int],
    parsers: tuple[str, ...] = TAG_ORDER,
    edge_budget: int = HARNESS_EDGE_BUDGET,
    trace: bool = False,
) -> RunReport:
    if not isinstance(corpus, list):
        corpus = load_corpus(Path(corpus).read_text(encoding="utf-8"))
    if not isinstance(grammar, Grammar):
        grammar = load_grammar(Path(grammar).read_text(encoding="utf-8"))
    if not isinstance(kb, KnowledgeBase):
        kb = load_kb(Path(kb).read_text(encoding="utf-8"))
    if not seeds:
        raise ValueError("at least one seed is required")
    parsers = tuple(t for t in TAG_ORDER if t in parsers)
    report = RunReport(list(seeds), parsers, edge_budget)
    for entry in corpus:
        run = SentenceRun(entry)
        if "PT" in parsers:
            run.pt = run_pt(entry, grammar, kb, seeds, trace)
            report.counts[entry.id, "PT", SYN] = run.pt.diagnostics["syn"]
            report.counts[entry.id, "PT", CON] = run.pt.diagnostics["con"]
        for mode in (CONTIGUOUS, DISC):
            config = ChartConfig(mode, edge_budget)
            if config.tag not in parsers:
                continue
            counters = CheckCounters()
            try:
                run.charts[config.tag] = chart_parse(list(entry.tokens), grammar, kb, config, counters)
            except EdgeBudgetExceeded as exc:
                run.aborted[config.tag] = str(exc)
                for pred in PREDICATES:
                    report.counts[entry.id, config.tag, pred] = None
                continue
            for pred in PREDICATES:
                report.counts[entry.id, config.tag, pred] = counters.get(config.tag, pred)
        report.runs.append(run)
    return report


# -- factors ------------------------------------------------------------
OK, INF, EXCLUDED, ABORTED = "ok", "inf", "excluded", "aborted"


@dataclass(frozen=True)
class FactorCell:
    value: float | None
    status: str

    def render(self) -> str:
        if self.status == OK:
            return f"{self.value:.4f}"
        return {INF: "inf", EXCLUDED: "", ABORTED: ""}[self.status]


def factor(baseline: int | None, pt: int | None) -> FactorCell:
    """Reduction factor baseline/PT for one sentence."""
    if baseline is None or pt is None:
        return FactorCell(None, ABORTED)
    if pt == 0:
        return FactorCell(None, EXCLUDED) if baseline == 0 else FactorCell(math.inf, INF)
    return FactorCell(baseline / pt, OK)


def mean_factor(cells: list[FactorCell]) -> float | None:
    """Unweighted mean over finite cells; None if there are none."""
    vals = [c.value for c in cells if c.status == OK]
    return sum(vals) / len(vals) if vals else None


@dataclass
class FactorTable:
    cells: dict[tuple[int, str, str], FactorCell] = field(default_factory=dict)
    means: dict[tuple[str, str], float | None] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def mean(self, baseline: str, predicate: str) -> float | None:
        return self.means.get((baseline, predicate))


def compare_reports(
    report: RunReport | list[tuple[int, str, str, int | None]],
) -> FactorTable:
    """Per-sentence CP/PT and CP.disc/PT factors plus their unweighted means.

    Accepts a report or bare count rows, so the table can be rebuilt from
    ``counts.csv`` alone.
    """
    rows = report.rows() if isinstance(report, RunReport) else list(report)
    counts = {(s, t, p): c for s, t, p, c in rows}
    sentences = sorted({s for s, _, _, _ in rows})
    table = FactorTable()
    for base in ("CP", "CP.disc"):
        for pred in PREDICATES:
            col = []
            for s in sentences:
                if (s, "PT", pred) not in counts or (s, base, pred) not in counts:
                    continue
                cell = factor(counts[s, base, pred], counts[s, "PT", pred])
                table.cells[s, base, pred] = cell
                col.append(cell)
                if cell.status != OK:
                    table.notes.append(f"sentence {s} {base}/PT {pred}: {cell.status}, left out of the mean")
            if col:
                table.means[base, pred] = mean_factor(col)
    return table


def counts_from_csv(text: str) -> list[tuple[int, str, str, int | None]]:
    reader = csv.DictReader(io.StringIO(text))
    return [
        (int(r["sentence_id"]), r["parser"], r["predicate"], int(r["count"]) if r["count"] else None)
        for r in reader
    ]


# -- emission -----------------------------------------------------------
def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def counts_csv(report: RunReport) -> str:
    return _csv(
        ["sentence_id", "parser", "predicate", "count"],
        [[s, t, p, "" if c is None else c] for s, t, p, c in report.rows()],
    )


def factors_csv(table: FactorTable) -> str:
    order = {t: i for i, t in enumerate(TAG_ORDER)}
    keys = sorted(table.cells, key=lambda k: (k[0], order[k[1]], PREDICATES.index(k[2])))
    rows = [[s, b, p, table.cells[s, b, p].render(), table.cells[s, b, p].status] for s, b, p in keys]
    for (b, p), m in sorted(table.means.items(), key=lambda kv: (order[kv[0][0]], PREDICATES.index(kv[0][1]))):
        rows.append(["mean", b, p, "" if m is None else f"{m:.4f}", "mean"])
    return _csv(["sentence_id", "baseline", "predicate", "factor", "status"], rows)


def fig_dat(report: RunReport, predicate: str) -> str:
    tags = [t for t in TAG_ORDER if t in report.parsers]
    lines = [f"# calls to {'SYNTAXCHECK' if predicate == SYN else 'CONCEPTCHECK'}; NaN marks an aborted run",
             "# sentence_id " + " ".join(tags)]
    for run in report.runs:
        sid = run.entry.id
        vals = []
        for t in tags:
            c = report.counts.get((sid, t, predicate))
            vals.append("NaN" if c is None else str(c))
        lines.append(f"{sid} " + " ".join(vals))
    return "\n".join(lines) + "\n"


def summary_text(report: RunReport, table: FactorTable) -> str:
    tags = [t for t in TAG_ORDER if t in report.parsers]
    out = [
        f"seeds: {','.join(map(str, report.seeds)) or '-'}",
        f"chart edge budget: {report.edge_budget}",
        "",
        "id  len  " + "  ".join(f"{t + '.' + p:>11}" for t in tags for p in PREDICATES) + "  flags",
    ]
    for run in report.runs:
        sid = run.entry.id
        cells = []
        for t in tags:
            for p in PREDICATES:
                c = report.counts.get((sid, t, p))
                cells.append(f"{'abort' if c is None else c:>11}")
        flags = ",".join(sorted(run.entry.flags))
        out.append(f"{sid:>2}  {len(run.entry.tokens):>3}  " + "  ".join(cells) + f"  {flags}")
    out.append("")
    for base in ("CP", "CP.disc"):
        for p in PREDICATES:
            m = table.mean(base, p)
            if (base, p) in table.means:
                shown = "n/a" if m is None else f"{m:.2f}"
                out.append(f"mean {base}/PT {p}: {shown}   (reference factor {REFERENCE_FACTORS[base]})")
    out.extend(table.notes)
    for run in report.runs:
        for tag, why in run.aborted.items():
            out.append(f"sentence {run.entry.id} {tag}: {why}")
    out.append("note: the chart baseline has no extra subsumption-checking step, so factors are conservative")
    return "\n".join(out) + "\n"


def analysis_blocks(report: RunReport) -> list[AnalysisBlock]:
    blocks = []
    for run in report.runs:
        toks = list(run.entry.tokens)
        if run.pt is not None:
            blocks.append(AnalysisBlock(run.entry.id, "PT", toks, run.pt.analyses, run.pt.fragments,
                                        run.pt.diagnostics["events"]))
        for tag in TAG_ORDER[1:]:
            if tag in run.charts:
                blocks.append(AnalysisBlock(run.entry.id, tag, toks, run.charts[tag].analyses))
            elif tag in run.aborted:
                blocks.append(AnalysisBlock(run.entry.id, tag, toks, [], aborted="edge-budget"))
    return blocks


def emit_outputs(report: RunReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = compare_reports(report)
    blocks = analysis_blocks(report)
    files = {
        "counts.csv": counts_csv(report),
        "factors.csv": factors_csv(table),
        "fig4.dat": fig_dat(report, SYN),
        "fig5.dat": fig_dat(report, CON),
        "summary.txt": summary_text(report, table),
        "analyses.txt": "".join(format_block(b) for b in blocks),
        "analyses.json": to_json(blocks),
    }
    for run in report.runs:
        if run.pt is not None and run.pt.diagnostics["trace"]:
            files[f"trace-{run.entry.id}.txt"] = "\n".join(run.pt.diagnostics["trace"]) + "\n"
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
