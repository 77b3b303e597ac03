"""Analysis blocks: the line format and the structured (JSON) document.

Both parsers render through here so their outputs differ only in the parser
tag.  Field order in the JSON document is fixed so golden files stay stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .phrase import PhraseState


@dataclass
class AnalysisBlock:
    sentence_id: int | str
    parser: str
    tokens: list[str]
    analyses: list[PhraseState]
    fragments: list[PhraseState] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    aborted: str | None = None


def _phrase_doc(p: PhraseState) -> dict:
    return {
        "root": p.root,
        "span": sorted(p.coverage),
        "words": [[n.position, n.reading.surface, n.word_class] for n in p.nodes],
        "edges": [[h, r, m] for h, r, m in p.edges()],
    }


def block_lines(block: AnalysisBlock) -> list[str]:
    lines = [f"sentence {block.sentence_id} parser={block.parser} tokens={len(block.tokens)}"]
    if block.aborted:
        lines.append(f"aborted {block.aborted}")
    for i, p in enumerate(block.analyses, 1):
        lines.append(f"analysis {i} root={p.root} span={','.join(map(str, sorted(p.coverage)))}")
        lines.extend(f"edge {h} -{r}-> {m}" for h, r, m in p.edges())
    for p in block.fragments:
        lines.append(f"fragment root={p.root} span={','.join(map(str, sorted(p.coverage)))} [{p.surface()}]")
    for e in block.events:
        if e["kind"] == "skip":
            over = ",".join(map(str, e["over"])) or "-"
            active = ",".join(map(str, e["active"]))
            lines.append(f"skip active={active} over={over} outcome={e['outcome']}")
        elif e["kind"] == "backtrack":
            lines.append(f"backtrack token={e['token']} reopened={','.join(map(str, e['reopened']))} outcome={e['outcome']}")
    lines.append("end")
    return lines


def format_block(block: AnalysisBlock) -> str:
    return "\n".join(block_lines(block)) + "\n"


def block_doc(block: AnalysisBlock) -> dict:
    return {
        "sentence": block.sentence_id,
        "parser": block.parser,
        "tokens": list(block.tokens),
        "aborted": block.aborted,
        "analyses": [_phrase_doc(p) for p in block.analyses],
        "fragments": [_phrase_doc(p) for p in block.fragments],
        "events": [e for e in block.events if e["kind"] in ("skip", "backtrack")],
    }


def to_json(blocks: list[AnalysisBlock]) -> str:
    return json.dumps([block_doc(b) for b in blocks], indent=2) + "\n"
