"""SYNTAXCHECK and CONCEPTCHECK, with per-parser invocation counters."""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass

from .grammar import FeatureBundle, Grammar, GrammarError, resolve_class
from .kb import (
    Consistent,
    Inconsistent,
    InterpretationContext,
    KnowledgeBase,
    assert_role_filler,
)
from .phrase import PhraseState, WordNode, combine, merged_context

SYN = "SYN"
CON = "CON"


class CheckCounters:
    """Invocation tallies keyed by (parser tag, predicate)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: dict[tuple[str, str], int] = defaultdict(int)

    def incr(self, tag: str, predicate: str) -> None:
        with self._lock:
            self._counts[tag, predicate] += 1

    def get(self, tag: str, predicate: str) -> int:
        return self._counts.get((tag, predicate), 0)

    def snapshot(self) -> list[tuple[str, str, int]]:
        with self._lock:
            return sorted((t, p, c) for (t, p), c in self._counts.items())

    def reset(self) -> None:
        with self._lock:
            for key in self._counts:
                self._counts[key] = 0


def counters_snapshot(counters: CheckCounters) -> list[tuple[str, str, int]]:
    return counters.snapshot()


def counters_reset(counters: CheckCounters) -> None:
    counters.reset()


@dataclass(frozen=True)
class ValencyMatch:
    head: int
    modifier: int
    role: str
    agreement: FeatureBundle
    sem_role: str | None


def open_valencies(grammar: Grammar, node: WordNode) -> tuple[str, ...]:
    """Roles of ``node`` that can still take a filler; empty means inactive."""
    cls = grammar.node_class(node.reading)
    return tuple(v.role_name for v in cls.valencies if not v.saturated(len(node.fillers(v.role_name))))


def syntax_check(
    grammar: Grammar, head: WordNode, modifier: PhraseState, counters: CheckCounters, tag: str
) -> ValencyMatch | None:
    """First valency of ``head`` (declared order) that accepts ``modifier``'s root."""
    counters.incr(tag, SYN)
    if head.position in modifier.coverage:
        raise ValueError("head lies inside the modifier phrase")
    mod = modifier.root_node
    mod_cls = resolve_class(grammar, mod.word_class)
    if not mod_cls.governable:
        return None
    cls = grammar.node_class(head.reading)
    side = "L" if mod.position < head.position else "R"
    for v in cls.valencies:
        if v.direction != side:
            continue
        if v.saturated(len(head.fillers(v.role_name))):
            continue
        if v.modifier_class not in mod_cls.ancestors:
            continue
        if v.modifier_features.items and mod.features.unify(v.modifier_features, v.modifier_features.names()) is None:
            continue
        unified = head.features.unify(mod.features, v.agreement)
        if unified is None:
            continue
        if not _order_ok(cls.order, head, v.role_name, mod.position):
            continue
        return ValencyMatch(head.position, mod.position, v.role_name, unified, v.sem_role)
    return None


def _order_ok(order, head: WordNode, role: str, pos: int) -> bool:
    left = pos < head.position
    for first, second in order:
        for q, r in head.modifiers:
            if (q < head.position) != left:
                continue
            if role == first and r == second and not pos < q:
                return False
            if role == second and r == first and not q < pos:
                return False
    return True


def concept_check(
    kb: KnowledgeBase,
    base_ctx: InterpretationContext,
    match: ValencyMatch,
    head_instance: int,
    filler_instance: int,
    counters: CheckCounters,
    tag: str,
) -> Consistent | Inconsistent:
    if match.sem_role is None:
        raise ValueError("concept_check requires a valency with a semantic role")
    counters.incr(tag, CON)
    return assert_role_filler(kb, base_ctx, head_instance, match.sem_role, filler_instance)


def license_attachment(
    grammar: Grammar,
    kb: KnowledgeBase,
    head_phrase: PhraseState,
    head_pos: int,
    mod_phrase: PhraseState,
    counters: CheckCounters,
    tag: str,
) -> tuple[ValencyMatch, PhraseState] | None:
    """Run both predicates and build the combined phrase if they succeed.

    CONCEPTCHECK only runs after a syntactic match, and only where the valency
    carries a semantic role and both words have concept instances.
    """
    head = head_phrase.node(head_pos)
    match = syntax_check(grammar, head, mod_phrase, counters, tag)
    if match is None:
        return None
    ctx, offset = merged_context(head_phrase, mod_phrase)
    filler = mod_phrase.root_node.instance
    if match.sem_role is not None and head.instance is not None and filler is not None:
        result = concept_check(kb, ctx, match, head.instance, filler + offset, counters, tag)
        if not result:
            return None
        ctx = result.context
    combined = combine(grammar, head_phrase, head_pos, mod_phrase, match.role, ctx, offset)
    if combined is None:
        return None
    return match, combined


def validate_grammar_kb(grammar: Grammar, kb: KnowledgeBase) -> None:
    """Cross-check sem roles and lexical concepts against the KB."""
    for cdef in grammar.classes.values():
        for v in cdef.own_valencies:
            if v.sem_role is not None and v.sem_role not in kb.roles:
                raise GrammarError(f"valency {cdef.name}.{v.role_name}: undeclared KB role {v.sem_role!r}")
    for readings in grammar.lexicon.values():
        for r in readings:
            if r.concept is not None and r.concept not in kb.concepts:
                raise GrammarError(f"lexicon entry {r.surface!r}: undeclared concept {r.concept!r}")
            for _, sem in r.role_sems:
                if sem not in kb.roles:
                    raise GrammarError(f"lexicon entry {r.surface!r}: undeclared KB role {sem!r}")
