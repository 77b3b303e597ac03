"""The restricted-parallel PARSETALK parser built from word, phrase and container actors.

Control flow per token:

* ``ParserActor`` creates a lexical container for the token (one single-word
  phrase per lexical reading) and asks it to ``analyzeWithContext`` against
  the current context container.
* Head search: every active phrase sends ``performSearchHeadTo`` to the
  context container, which hands ``searchHeadFor`` to each of its phrases;
  each phrase forwards it to its rightmost word, and words forward it up
  their head chain (the right rim).  Every word on the way runs the checks.
* Modifier search (after head search failed) mirrors this: the active
  phrases' left-rim words try to govern each context phrase's root.
* A success triggers ``attach`` -> ``getNextContainer`` -> ``newIn`` ->
  ``copyAndAttach`` -> ``copyHeadFor``/``copyModFor`` -> ``establish`` ->
  ``update`` and finally a success receipt.
* Both searches failing moves the search to the next older container
  (skipping).  When skipping runs into a boundary, a lexical item that can
  still be governed from the right simply waits; other items trigger
  restricted backtracking into retained containers holding untried
  alternatives, and failing that are left as fragments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .checks import CON, SYN, CheckCounters, license_attachment, open_valencies
from .grammar import Grammar, lexical_lookup, resolve_class
from .kb import KnowledgeBase
from .phrase import PhraseState, TreeKey, lexical_phrase, unfilled_obligatory
from .runtime import SUCCESS, Actor, ActorRef, ActorSystem, Message, ProtocolViolation, ReceiptHandler

PT = "PT"
DELIMITERS = frozenset({".", "!", "?"})


@dataclass
class ParseEnv:
    grammar: Grammar
    kb: KnowledgeBase
    counters: CheckCounters
    tag: str = PT


# -- word actors ---------------------------------------------------------


class WordActor(Actor):
    def __init__(self, env: ParseEnv, phrase: PhraseState, position: int, phrase_ref: ActorRef, words: dict):
        self.env = env
        self.phrase = phrase
        self.position = position
        self.node = phrase.node(position)
        self.phrase_ref = phrase_ref
        self.words = words  # position -> WordActor ref, shared with the phrase

    def on_searchHeadFor(self, msg: Message) -> None:
        self._search(msg, "searchHeadFor")

    def on_searchModifierFor(self, msg: Message) -> None:
        self._search(msg, "searchModifierFor")

    def _search(self, msg: Message, name: str) -> None:
        handler = msg.handler
        if self.node.head is not None:
            self.ask(handler, "expect", n=1)
            self.send(self.words[self.node.head[0]], name, **{**msg.args, "rank": msg.rank + 1})
        env = self.env
        if not open_valencies(env.grammar, self.node):
            self.send(handler, "receipt", ok=False)
            return
        result = license_attachment(env.grammar, env.kb, self.phrase, self.position, msg.mod_state, env.counters, env.tag)
        if result is None:
            self.send(handler, "receipt", ok=False)
            return
        match, combined = result
        self.send(self.phrase_ref, "attach", **msg.args, match=match, combined=combined)

    def on_copyHeadFor(self, msg: Message) -> None:
        self._copy(msg, "copyHeadFor")

    def on_copyModFor(self, msg: Message) -> None:
        self._copy(msg, "copyModFor")

    def _copy(self, msg: Message, name: str) -> None:
        self.send(msg.target, "copiedNode", node=self.node)
        for child, _ in self.node.modifiers:
            self.send(self.words[child], name, target=msg.target)

    def on_establish(self, msg: Message) -> None:
        new = msg.combined.node(self.position)
        if (msg.match.modifier, msg.match.role) not in new.modifiers:
            raise ProtocolViolation("establish: dependency missing from combined phrase")
        self.node = new
        self.send(self.words[msg.match.modifier], "update", combined=msg.combined, chain=False)
        if new.head is not None:
            self.send(self.words[new.head[0]], "update", combined=msg.combined, chain=True)
        self.send(self.phrase_ref, "updated", position=self.position, root=new.head is None)

    def on_update(self, msg: Message) -> None:
        self.node = msg.combined.node(self.position)
        is_root = self.node.head is None
        if msg.chain and not is_root:
            self.send(self.words[self.node.head[0]], "update", combined=msg.combined, chain=True)
        self.send(self.phrase_ref, "updated", position=self.position, root=msg.chain and is_root)


# -- phrase actors -------------------------------------------------------


class PhraseActor(Actor):
    def __init__(self, env: ParseEnv, container: ActorRef, state: PhraseState | None = None):
        self.env = env
        self.container = container
        self.state = state
        self.words: dict[int, ActorRef] = {}
        self._pending: dict[str, Any] | None = None

    def start(self) -> None:
        for n in self.state.nodes:
            self.words[n.position] = self.spawn(
                WordActor(self.env, self.state, n.position, self.ref, self.words), "Word"
            )

    def word_refs(self) -> list[ActorRef]:
        return list(self.words.values())

    # search initiation (active side)
    def on_performSearchHead(self, msg: Message) -> None:
        self.ask(msg.handler, "expect", n=1)
        self.send(msg.context, "performSearchHeadTo", mod_state=self.state, mod_ref=self.ref,
                  handler=msg.handler, episode=msg.episode, alternatives=msg.alternatives)
        self.send(msg.handler, "receipt", ok=False)

    def on_performSearchModifier(self, msg: Message) -> None:
        self.ask(msg.handler, "expect", n=1)
        self.send(msg.context, "performSearchModifierTo", gov_state=self.state, gov_ref=self.ref,
                  handler=msg.handler, episode=msg.episode, alternatives=msg.alternatives)
        self.send(msg.handler, "receipt", ok=False)

    # search distribution
    def on_searchHeadFor(self, msg: Message) -> None:
        self.ask(msg.handler, "expect", n=1)
        self.send(self.words[self.state.right_rim()[0]], "searchHeadFor", **msg.args, rank=0)
        self.send(msg.handler, "receipt", ok=False)

    def on_searchModifierFor(self, msg: Message) -> None:
        self.ask(msg.handler, "expect", n=1)
        self.send(self.words[self.state.left_rim()[0]], "searchModifierFor", **msg.args, rank=0)
        self.send(msg.handler, "receipt", ok=False)

    # attachment (governing side)
    def on_attach(self, msg: Message) -> None:
        nxt = self.ask(self.container, "getNextContainer", episode=msg.episode)
        new_phrase = self.ask(nxt, "newIn")
        self.send(new_phrase, "copyAndAttach", head_ref=self.ref, **msg.args)

    # attachment (new phrase side)
    def on_copyAndAttach(self, msg: Message) -> None:
        self._pending = dict(msg.args, nodes={}, acks=set(), root_done=False)
        self.send(msg.head_ref, "copyHeadFor", target=self.ref)
        self.send(msg.mod_ref, "copyModFor", target=self.ref)

    def on_copyHeadFor(self, msg: Message) -> None:
        self.send(self.words[self.state.root], "copyHeadFor", target=msg.target)

    def on_copyModFor(self, msg: Message) -> None:
        self.send(self.words[self.state.root], "copyModFor", target=msg.target)

    def on_copiedNode(self, msg: Message) -> None:
        p = self._pending
        p["nodes"][msg.node.position] = msg.node
        combined: PhraseState = p["combined"]
        if len(p["nodes"]) < len(combined.nodes):
            return
        self.state = combined
        for pos in sorted(p["nodes"]):
            self.words[pos] = self.spawn(WordActor(self.env, combined, pos, self.ref, self.words), "Word")
        # locally held copies get the pre-establish node values
        for pos, node in p["nodes"].items():
            self.system.actor(self.words[pos]).node = node
        match = p["match"]
        p["expected_acks"] = {match.modifier} | set(combined.path_to_root(match.head))
        self.send(self.words[match.head], "establish", match=match, combined=combined)

    def on_updated(self, msg: Message) -> None:
        p = self._pending
        p["acks"].add(msg.position)
        p["root_done"] = p["root_done"] or msg.root
        if p["acks"] >= p["expected_acks"] and p["root_done"]:
            self.ask(self.container, "publish", state=self.state, phrase_ref=self.ref,
                     group=p["group"], rank=p["rank"])
            handler = p["handler"]
            self._pending = None
            self.send(handler, "receipt", ok=True)


# -- containers ------------------------------------------------------------


@dataclass
class _Entry:
    state: PhraseState
    ref: ActorRef
    group: tuple = ()
    rank: int = 0


class ContainerActor(Actor):
    def __init__(self, env: ParseEnv, parser: ActorRef, kind: str, boundary: bool = False):
        self.env = env
        self.parser = parser
        self.kind = kind  # "lexical" | "composite"
        self.boundary = boundary
        self.live: list[_Entry] = []
        self.dormant: list[_Entry] = []
        self.published: list[_Entry] = []
        self.context_link: ActorRef | None = None
        self.history_link: ActorRef | None = None
        self.retained = False
        self.next: dict[int, ActorRef] = {}

    @property
    def span(self) -> frozenset[int]:
        return self.live[0].state.coverage if self.live else frozenset()

    def add_lexical(self, states: list[PhraseState]) -> None:
        for st in states:
            actor = PhraseActor(self.env, self.ref, st)
            ref = self.spawn(actor, "Phrase")
            actor.start()
            self.live.append(_Entry(st, ref))

    def on_analyzeWithContext(self, msg: Message) -> None:
        handler = self.ask(self.parser, "createReceiptHandler", owner=self.ref, episode=msg.episode)
        self.ask(handler, "expect", n=len(self.live))
        name = "performSearchHead" if msg.mode == "head" else "performSearchModifier"
        for e in self.live:
            self.send(e.ref, name, context=msg.context, handler=handler,
                      episode=msg.episode, alternatives=msg.alternatives)

    def _targets(self, alternatives: bool) -> list[_Entry]:
        return self.dormant if alternatives else self.live

    def on_performSearchHeadTo(self, msg: Message) -> None:
        targets = self._targets(msg.alternatives)
        self.ask(msg.handler, "expect", n=len(targets))
        for e in targets:
            self.send(e.ref, "searchHeadFor", mod_state=msg.mod_state, mod_ref=msg.mod_ref,
                      handler=msg.handler, episode=msg.episode, group=(e.state.key(), msg.mod_state.key()))
        self.send(msg.handler, "receipt", ok=False)

    def on_performSearchModifierTo(self, msg: Message) -> None:
        targets = self._targets(msg.alternatives)
        self.ask(msg.handler, "expect", n=len(targets))
        for e in targets:
            self.send(msg.gov_ref, "searchModifierFor", mod_state=e.state, mod_ref=e.ref,
                      handler=msg.handler, episode=msg.episode, group=(msg.gov_state.key(), e.state.key()))
        self.send(msg.handler, "receipt", ok=False)

    def on_searchTerminated(self, msg: Message) -> None:
        self.send(self.parser, "searchResult", episode=msg.episode, status=msg.status)

    def on_getNextContainer(self, msg: Message) -> ActorRef:
        ref = self.next.get(msg.episode)
        if ref is None:
            actor = ContainerActor(self.env, self.parser, "composite")
            ref = self.spawn(actor, "Container")
            actor.history_link = self.ref
            self.next[msg.episode] = ref
        return ref

    def on_takeNextContainer(self, msg: Message) -> ActorRef | None:
        return self.next.pop(msg.episode, None)

    def on_newIn(self, msg: Message) -> ActorRef:
        return self.spawn(PhraseActor(self.env, self.ref), "Phrase")

    def on_publish(self, msg: Message) -> None:
        self.published.append(_Entry(msg.state, msg.phrase_ref, msg.group, msg.rank))

    def on_finalize(self, msg: Message) -> dict:
        """Pick the lowest attachment per (governor, modifier) pair as live."""
        best: dict[tuple, _Entry] = {}
        for e in sorted(self.published, key=lambda e: (e.rank, e.state.key())):
            if e.group not in best:
                best[e.group] = e
        chosen = {id(e) for e in best.values()}
        seen: set[TreeKey] = set()
        live, dormant = [], []
        for e in sorted(self.published, key=lambda e: e.state.key()):
            k = e.state.key()
            if k in seen:
                continue
            seen.add(k)
            (live if id(e) in chosen else dormant).append(e)
        self.live, self.dormant, self.published = live, dormant, []
        self.context_link = msg.context_link
        return self.on_describe(msg)

    def on_describe(self, msg: Message) -> dict:
        return dict(
            kind=self.kind,
            boundary=self.boundary,
            span=self.span,
            live=[e.state for e in self.live],
            dormant=[e.state for e in self.dormant],
            retained=self.retained,
        )

    def on_retain(self, msg: Message) -> None:
        self.retained = True

    def on_reopen(self, msg: Message) -> None:
        """Backtracking commit: untried alternatives replace the pursued analysis."""
        self.live, self.dormant = self.dormant, []

    def on_delete(self, msg: Message) -> None:
        for e in self.live + self.dormant + self.published:
            phrase = self.system.actors.get(e.ref.id)
            if phrase is not None:
                for w in phrase.word_refs():
                    self.system.terminate(w)
            self.system.terminate(e.ref)
        self.system.terminate(self.ref)


# -- parser actor ------------------------------------------------------------


@dataclass
class _Slot:
    ref: ActorRef
    kind: str
    span: frozenset[int]
    boundary: bool = False
    dormant: int = 0
    retained: bool = False


class ParserActor(Actor):
    def __init__(self, env: ParseEnv):
        self.env = env
        self.tokens: list[str] = []
        self.i = 0
        self.stack: list[_Slot] = []
        self.fragments: list[_Slot] = []
        self.events: list[dict] = []
        self.episodes: list[dict] = []
        self.done = False
        self._episode = 0
        self._waitable = _right_governable_classes(env.grammar)

    def on_analyze(self, msg: Message) -> None:
        self.tokens = list(msg.tokens)
        self.i = 0
        self._next_token()

    def on_createReceiptHandler(self, msg: Message) -> ActorRef:
        return self.spawn(ReceiptHandler(msg.owner, msg.episode), "ReceiptHandler")

    # token-level progression
    def _next_token(self) -> None:
        if self.i >= len(self.tokens):
            self.done = True
            return
        token = self.tokens[self.i]
        self.active = self._init_word(token, self.i)
        self.ctx_idx = len(self.stack) - 1
        self.backtrack_queue: list[int] | None = None
        if self.active.boundary:
            self._settle()
            return
        self._search_or_boundary("head")

    def _init_word(self, token: str, position: int) -> _Slot:
        env = self.env
        boundary = token in DELIMITERS
        actor = ContainerActor(env, self.ref, "lexical", boundary=boundary)
        ref = self.spawn(actor, "LexicalContainer")
        actor.add_lexical([lexical_phrase(env.grammar, env.kb, r, position) for r in lexical_lookup(env.grammar, token)])
        actor.history_link = self.stack[-1].ref if self.stack else None
        actor.context_link = self._current_context_ref()
        return _Slot(ref, "lexical", frozenset([position]), boundary)

    def _current_context_ref(self) -> ActorRef | None:
        return self.stack[-1].ref if self.stack else None

    def _context_ok(self) -> bool:
        return self.ctx_idx >= 0 and not self.stack[self.ctx_idx].boundary

    def _search_or_boundary(self, mode: str, alternatives: bool = False) -> None:
        if self._context_ok():
            self._start_episode(mode, alternatives)
        else:
            self._boundary()

    def _start_episode(self, mode: str, alternatives: bool) -> None:
        self._episode += 1
        self.mode = mode
        self.alternatives = alternatives
        ctx = self.stack[self.ctx_idx]
        self.episodes.append(dict(
            episode=self._episode, mode=mode, alternatives=alternatives,
            active=sorted(self.active.span), context=sorted(ctx.span), token=self.i, success=None,
        ))
        self.send(self.active.ref, "analyzeWithContext", context=ctx.ref, mode=mode,
                  episode=self._episode, alternatives=alternatives)

    def on_searchResult(self, msg: Message) -> None:
        if msg.episode != self._episode:
            raise ProtocolViolation(f"stale search result for episode {msg.episode}")
        ok = msg.status == SUCCESS
        self.episodes[-1]["success"] = ok
        if ok:
            self._attached()
        elif self.mode == "head":
            self._start_episode("modifier", self.alternatives)
        elif self.alternatives:
            self._next_backtrack_candidate()
        else:
            self._skip()

    def _attached(self) -> None:
        ctx = self.stack[self.ctx_idx]
        governor, modifier = (ctx, self.active) if self.mode == "head" else (self.active, ctx)
        nxt = self.ask(governor.ref, "takeNextContainer", episode=self._episode)
        link = self.stack[self.ctx_idx - 1].ref if self.ctx_idx > 0 else None
        info = self.ask(nxt, "finalize", context_link=link)
        self.ask(governor.ref, "retain")
        self.ask(modifier.ref, "delete")
        skipped = self.stack[self.ctx_idx + 1:]
        for s in skipped:
            self.events.append(dict(kind="skip", over=sorted(s.span), active=sorted(self.active.span), outcome="attached"))
        if self.alternatives:
            self.ask(ctx.ref, "reopen")
            self.events.append(dict(kind="backtrack", reopened=sorted(ctx.span), token=self.i, outcome="reanalysis"))
        self.fragments.extend(skipped)
        self.stack = self.stack[:self.ctx_idx]
        self.active = _Slot(nxt, "composite", info["span"], dormant=len(info["dormant"]))
        self.ctx_idx = len(self.stack) - 1
        self.backtrack_queue = None
        self._search_or_boundary("head")

    def _skip(self) -> None:
        self.ctx_idx -= 1
        self._search_or_boundary("head")

    def _boundary(self) -> None:
        active = self.active
        passed = sorted(set().union(*(s.span for s in self.stack[self.ctx_idx + 1:])))
        self.events.append(dict(kind="skip", over=passed, active=sorted(active.span), outcome="boundary"))
        if active.kind != "lexical" or active.boundary or self._can_wait(active):
            self._settle()
            return
        self.backtrack_queue = [
            i for i in range(len(self.stack) - 1, -1, -1)
            if not self._crosses_boundary(i) and self.stack[i].kind == "composite" and self._has_dormant(i)
        ]
        self._next_backtrack_candidate()

    def _crosses_boundary(self, idx: int) -> bool:
        return any(s.boundary for s in self.stack[idx:])

    def _has_dormant(self, idx: int) -> bool:
        return bool(self.ask(self.stack[idx].ref, "describe")["dormant"])

    def _next_backtrack_candidate(self) -> None:
        if not self.backtrack_queue:
            self.events.append(dict(kind="fragment", span=sorted(self.active.span), token=self.i))
            self.alternatives = False
            self._settle()
            return
        self.ctx_idx = self.backtrack_queue.pop(0)
        self.events.append(dict(kind="backtrack", reopened=sorted(self.stack[self.ctx_idx].span), token=self.i, outcome="attempt"))
        self._start_episode("head", True)

    def _can_wait(self, slot: _Slot) -> bool:
        desc = self.ask(slot.ref, "describe")
        return any(st.root_node.word_class in self._waitable for st in desc["live"])

    def _settle(self) -> None:
        self.stack.append(self.active)
        self.i += 1
        self._next_token()


def _right_governable_classes(grammar: Grammar) -> frozenset[str]:
    """Classes some word to their right could still take as a modifier."""
    targets = {v.modifier_class for name in grammar.classes for v in resolve_class(grammar, name).valencies if v.direction == "L"}
    out = set()
    for name in grammar.classes:
        rc = resolve_class(grammar, name)
        if rc.governable and targets & set(rc.ancestors):
            out.add(name)
    return frozenset(out)


# -- public API ----------------------------------------------------------------


@dataclass
class ParseResult:
    tokens: list[str]
    analyses: list[PhraseState]
    fragments: list[PhraseState]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def skip_events(self) -> list[dict]:
        return [e for e in self.diagnostics["events"] if e["kind"] == "skip"]

    @property
    def backtrack_events(self) -> list[dict]:
        return [e for e in self.diagnostics["events"] if e["kind"] == "backtrack"]


def parse(
    tokens: list[str],
    grammar: Grammar,
    kb: KnowledgeBase,
    seed: int = 0,
    counters: CheckCounters | None = None,
    trace: bool = False,
    tag: str = PT,
) -> ParseResult:
    if not tokens:
        raise ValueError("nothing to parse")
    counters = counters if counters is not None else CheckCounters()
    syn0, con0 = counters.get(tag, SYN), counters.get(tag, CON)
    env = ParseEnv(grammar, kb, counters, tag)
    system = ActorSystem(seed, trace=trace)
    parser = ParserActor(env)
    pref = system.spawn(parser, "Parser")
    system.send(pref, "analyze", tokens=list(tokens))
    report = system.run_until_quiescent()
    if not parser.done:
        raise ProtocolViolation("parser did not consume all tokens before quiescence")
    if report.outstanding_sync:
        raise ProtocolViolation("synchronous request outstanding at quiescence")

    slots = [s for s in parser.stack if not s.boundary]
    descs = [(s, system.ask(s.ref, "describe")) for s in slots]
    analyses: list[PhraseState] = []
    fragments: list[PhraseState] = []
    if descs:
        top = max(range(len(descs)), key=lambda i: (len(descs[i][1]["span"]), i))
        analyses = list(descs[top][1]["live"])
        fragments = [d["live"][0] for i, (_, d) in enumerate(descs) if i != top]
    for s in parser.fragments:
        if system.is_alive(s.ref):
            fragments.append(system.ask(s.ref, "describe")["live"][0])
    fragments.sort(key=lambda p: min(p.coverage))
    handlers = [a for a in system.actors.values() if isinstance(a, ReceiptHandler)]
    diagnostics = dict(
        events=parser.events,
        episodes=parser.episodes,
        unfilled=[unfilled_obligatory(grammar, a) for a in analyses],
        syn=counters.get(tag, SYN) - syn0,
        con=counters.get(tag, CON) - con0,
        delivered=report.delivered,
        dead_letters=[str(e) for e in report.dead_letters],
        receipt_handlers=[h.state for h in handlers],
        trace=system.trace_lines() if trace else [],
    )
    return ParseResult(list(tokens), analyses, fragments, diagnostics)
