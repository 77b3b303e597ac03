"""Bottom-up active chart parser over the same dependency grammar.

No packing: every distinct tree is its own edge with its own interpretation
context.  ``Contiguous`` mode only combines adjacent edges; ``Disc`` combines
any two disjoint edges within one sentence.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .checks import CheckCounters, license_attachment, open_valencies
from .grammar import Grammar, lexical_lookup
from .kb import KnowledgeBase
from .parser import DELIMITERS
from .phrase import PhraseState, TreeKey, is_complete, lexical_phrase

CONTIGUOUS = "Contiguous"
DISC = "Disc"
DEFAULT_EDGE_BUDGET = 1_000_000


class EdgeBudgetExceeded(Exception):
    def __init__(self, edges: int, budget: int):
        self.edges = edges
        self.budget = budget
        super().__init__(f"chart exhausted: {edges} edges exceed budget {budget}")


@dataclass(frozen=True)
class ChartConfig:
    mode: str = CONTIGUOUS
    edge_budget: int = DEFAULT_EDGE_BUDGET

    @property
    def tag(self) -> str:
        return "CP" if self.mode == CONTIGUOUS else "CP.disc"


@dataclass(eq=False)
class Edge:
    phrase: PhraseState
    mask: int
    lo: int
    hi: int
    sentence: int
    active: tuple[str, ...]  # unsaturated valencies of the root

    @property
    def coverage(self) -> frozenset[int]:
        return self.phrase.coverage


@dataclass
class ChartResult:
    analyses: list[PhraseState]
    edges: list[Edge] = field(repr=False, default_factory=list)

    @property
    def all_edges_count(self) -> int:
        return len(self.edges)

    def trees(self) -> set[TreeKey]:
        return {e.phrase.key() for e in self.edges}


def _make_edge(grammar: Grammar, phrase: PhraseState, sentence: int) -> Edge:
    active = open_valencies(grammar, phrase.root_node)
    mask = 0
    for p in phrase.coverage:
        mask |= 1 << p
    return Edge(phrase, mask, min(phrase.coverage), max(phrase.coverage), sentence, active)


def combine_edges(
    grammar: Grammar,
    kb: KnowledgeBase,
    head: Edge,
    mod: Edge,
    config: ChartConfig,
    counters: CheckCounters,
) -> Edge | None:
    if head.mask & mod.mask or head.sentence != mod.sentence:
        return None
    if config.mode == CONTIGUOUS and head.hi + 1 != mod.lo and mod.hi + 1 != head.lo:
        return None
    if not head.active:
        return None
    result = license_attachment(grammar, kb, head.phrase, head.phrase.root, mod.phrase, counters, config.tag)
    if result is None:
        return None
    return _make_edge(grammar, result[1], head.sentence)


def chart_parse(
    tokens: list[str],
    grammar: Grammar,
    kb: KnowledgeBase,
    config: ChartConfig = ChartConfig(),
    counters: CheckCounters | None = None,
) -> ChartResult:
    if not tokens:
        raise ValueError("nothing to parse")
    counters = counters if counters is not None else CheckCounters()
    agenda: deque[Edge] = deque()
    seen: set[TreeKey] = set()
    sentence = 0
    for pos, tok in enumerate(tokens):
        if tok in DELIMITERS:
            sentence += 1
            continue
        for reading in lexical_lookup(grammar, tok):
            ph = lexical_phrase(grammar, kb, reading, pos)
            seen.add(ph.key())
            agenda.append(_make_edge(grammar, ph, sentence))

    chart: list[Edge] = []
    # coverage mask -> chart edges, all of them / only those with an open root valency
    by_mask: dict[int, list[Edge]] = {}
    active_by_mask: dict[int, list[Edge]] = {}
    while agenda:
        edge = agenda.popleft()
        pairs = []
        for mask, group in active_by_mask.items():
            if not mask & edge.mask:
                pairs.extend((other, edge) for other in group)
        if edge.active:
            for mask, group in by_mask.items():
                if not mask & edge.mask:
                    pairs.extend((edge, other) for other in group)
        for h, m in pairs:
            new = combine_edges(grammar, kb, h, m, config, counters)
            if new is None:
                continue
            key = new.phrase.key()
            if key in seen:
                continue
            seen.add(key)
            agenda.append(new)
            if len(chart) + len(agenda) > config.edge_budget:
                raise EdgeBudgetExceeded(len(chart) + len(agenda), config.edge_budget)
        chart.append(edge)
        by_mask.setdefault(edge.mask, []).append(edge)
        if edge.active:
            active_by_mask.setdefault(edge.mask, []).append(edge)

    complete = [e.phrase for e in chart if is_complete(grammar, e.phrase)]
    best = max((len(p.coverage) for p in complete), default=0)
    analyses = sorted((p for p in complete if len(p.coverage) == best), key=lambda p: p.key())
    return ChartResult(analyses, chart)
