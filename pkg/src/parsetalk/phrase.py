"""Immutable dependency-tree values shared by both parsers."""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

from .grammar import FeatureBundle, Grammar, Reading
from .kb import InterpretationContext, KnowledgeBase, instantiate, merge_contexts


@dataclass(frozen=True)
class WordNode:
    position: int
    reading: Reading
    features: FeatureBundle
    head: tuple[int, str] | None = None
    modifiers: tuple[tuple[int, str], ...] = ()
    instance: int | None = None

    @property
    def word_class(self) -> str:
        return self.reading.word_class

    def fillers(self, role: str) -> list[int]:
        return [p for p, r in self.modifiers if r == role]


Edge = tuple[int, str, int]  # (head position, role, modifier position)
TreeKey = tuple[tuple[Edge, ...], tuple[tuple[int, str], ...]]


@dataclass(frozen=True)
class PhraseState:
    nodes: tuple[WordNode, ...]  # sorted by position
    root: int
    coverage: frozenset[int]
    context: InterpretationContext

    @cached_property
    def _by_pos(self) -> dict[int, WordNode]:
        return {n.position: n for n in self.nodes}

    def node(self, position: int) -> WordNode:
        return self._by_pos[position]

    @property
    def root_node(self) -> WordNode:
        return self.node(self.root)

    def edges(self) -> tuple[Edge, ...]:
        return tuple(sorted((n.head[0], n.head[1], n.position) for n in self.nodes if n.head))

    @cached_property
    def _key(self) -> TreeKey:
        return self.edges(), tuple((n.position, n.word_class) for n in self.nodes)

    def key(self) -> TreeKey:
        return self._key

    def right_rim(self) -> list[int]:
        """Head chain from the rightmost word up to the root, bottom first."""
        return self._chain(max(self.coverage))

    def left_rim(self) -> list[int]:
        return self._chain(min(self.coverage))

    def _chain(self, start: int) -> list[int]:
        chain = [start]
        node = self.node(start)
        while node.head is not None:
            node = self.node(node.head[0])
            chain.append(node.position)
        return chain

    def path_to_root(self, pos: int) -> list[int]:
        return self._chain(pos)

    def surface(self) -> str:
        return " ".join(n.reading.surface for n in self.nodes)

    def __str__(self) -> str:
        edges = " ".join(f"{h}-{r}->{m}" for h, r, m in self.edges())
        return f"[{self.surface()}]@{sorted(self.coverage)} root={self.root} {edges}".rstrip()


def lexical_phrase(grammar: Grammar, kb: KnowledgeBase, reading: Reading, position: int) -> PhraseState:
    ctx = InterpretationContext()
    instance = None
    if reading.concept is not None:
        ctx, instance = instantiate(kb, ctx, reading.concept)
    node = WordNode(position, reading, grammar.reading_features(reading), instance=instance)
    return PhraseState((node,), position, frozenset([position]), ctx)


def merged_context(head: PhraseState, mod: PhraseState) -> tuple[InterpretationContext, int]:
    return merge_contexts(head.context, mod.context)


def combine(
    grammar: Grammar,
    head: PhraseState,
    head_pos: int,
    mod: PhraseState,
    role: str,
    context: InterpretationContext,
    offset: int,
) -> PhraseState | None:
    """Non-destructive attachment of ``mod`` under ``head_pos`` of ``head``.

    ``context``/``offset`` come from :func:`merged_context` (possibly extended
    by a concept check).  Returns ``None`` if agreement propagation empties a
    value set.
    """
    nodes = {n.position: n for n in head.nodes}
    for n in mod.nodes:
        inst = None if n.instance is None else n.instance + offset
        nodes[n.position] = replace(n, instance=inst)
    h = nodes[head_pos]
    nodes[head_pos] = replace(h, modifiers=tuple(sorted(h.modifiers + ((mod.root, role),))))
    nodes[mod.root] = replace(nodes[mod.root], head=(head_pos, role))
    valency = grammar.node_class(h.reading).valency(role)
    for feat in valency.agreement if valency else ():
        if not _unify_component(grammar, nodes, head_pos, feat):
            return None
    ordered = tuple(nodes[p] for p in sorted(nodes))
    return PhraseState(ordered, head.root, head.coverage | mod.coverage, context)


def _agree_neighbours(grammar: Grammar, nodes: dict[int, WordNode], pos: int, feat: str):
    n = nodes[pos]
    if n.head is not None:
        hp, role = n.head
        v = grammar.node_class(nodes[hp].reading).valency(role)
        if v is not None and feat in v.agreement:
            yield hp
    cls = grammar.node_class(n.reading)
    for cp, role in n.modifiers:
        v = cls.valency(role)
        if v is not None and feat in v.agreement:
            yield cp


def _unify_component(grammar: Grammar, nodes: dict[int, WordNode], start: int, feat: str) -> bool:
    component, todo = {start}, [start]
    while todo:
        for nb in _agree_neighbours(grammar, nodes, todo.pop(), feat):
            if nb not in component:
                component.add(nb)
                todo.append(nb)
    common = None
    for p in component:
        vals = nodes[p].features.get(feat)
        if vals is not None:
            common = vals if common is None else common & vals
    if common is None:
        return True
    if not common:
        return False
    for p in component:
        f = nodes[p].features
        if f.get(feat) is not None:
            nodes[p] = replace(nodes[p], features=f.override(FeatureBundle.of({feat: common})))
    return True


def unfilled_obligatory(grammar: Grammar, phrase: PhraseState) -> list[tuple[int, str]]:
    missing = []
    for n in phrase.nodes:
        for v in grammar.node_class(n.reading).valencies:
            if v.obligatory and not n.fillers(v.role_name):
                missing.append((n.position, v.role_name))
    return missing


def is_complete(grammar: Grammar, phrase: PhraseState) -> bool:
    return not unfilled_obligatory(grammar, phrase)
