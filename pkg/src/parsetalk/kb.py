"""Terminological knowledge base and persistent interpretation contexts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

TOP = "TOP"


class KBError(Exception):
    pass


@dataclass(frozen=True)
class RoleDef:
    name: str
    domain: str
    range: str
    max_fillers: int | None = None  # None = unbounded


@dataclass
class KnowledgeBase:
    concepts: set[str]
    parents: dict[str, tuple[str, ...]]
    roles: dict[str, RoleDef]
    closure: dict[str, frozenset[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if TOP not in self.concepts:
            raise KBError("knowledge base needs a TOP concept")
        for c, ps in self.parents.items():
            for p in ps:
                if p not in self.concepts:
                    raise KBError(f"concept {c}: undeclared parent {p!r}")
        for c in self.concepts:
            if c != TOP and not self.parents.get(c):
                raise KBError(f"concept {c} has no parent (only TOP may be a root)")
        for c in self.concepts:
            self.closure[c] = self._ancestors(c, ())
        for r in self.roles.values():
            for c in (r.domain, r.range):
                if c not in self.concepts:
                    raise KBError(f"role {r.name}: undeclared concept {c!r}")
            if r.max_fillers is not None and r.max_fillers < 1:
                raise KBError(f"role {r.name}: max must be >= 1")

    def _ancestors(self, concept: str, path: tuple[str, ...]) -> frozenset[str]:
        if concept in path:
            raise KBError(f"isa cycle through {concept}")
        if concept in self.closure:
            return self.closure[concept]
        result = {concept}
        for p in self.parents.get(concept, ()):
            result |= self._ancestors(p, path + (concept,))
        return frozenset(result)

    def check_concept(self, concept: str) -> None:
        if concept not in self.concepts:
            raise KBError(f"unknown concept {concept!r}")


def subsumes(kb: KnowledgeBase, general: str, specific: str) -> bool:
    kb.check_concept(general)
    kb.check_concept(specific)
    return general in kb.closure[specific]


@dataclass(frozen=True)
class InterpretationContext:
    """Immutable set of concept instances plus role assertions.

    Instance ids are indices into ``instances``.
    """

    instances: tuple[str, ...] = ()
    assertions: tuple[tuple[int, str, int], ...] = ()

    def fillers(self, holder: int, role: str) -> int:
        return sum(1 for h, r, _ in self.assertions if h == holder and r == role)


@dataclass(frozen=True)
class Consistent:
    context: InterpretationContext

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Inconsistent:
    kind: str  # domain-violation | range-violation | cardinality-violation
    reason: str

    def __bool__(self) -> bool:
        return False


def instantiate(kb: KnowledgeBase, ctx: InterpretationContext, concept: str) -> tuple[InterpretationContext, int]:
    """Return the extended context and the fresh instance id."""
    kb.check_concept(concept)
    return InterpretationContext(ctx.instances + (concept,), ctx.assertions), len(ctx.instances)


def merge_contexts(a: InterpretationContext, b: InterpretationContext) -> tuple[InterpretationContext, int]:
    """Disjoint union; ids of ``b`` are shifted by the returned offset."""
    off = len(a.instances)
    shifted = tuple((h + off, r, f + off) for h, r, f in b.assertions)
    return InterpretationContext(a.instances + b.instances, a.assertions + shifted), off


def assert_role_filler(
    kb: KnowledgeBase, ctx: InterpretationContext, holder: int, role: str, filler: int
) -> Consistent | Inconsistent:
    rdef = kb.roles.get(role)
    if rdef is None:
        raise KBError(f"unknown role {role!r}")
    n = len(ctx.instances)
    for inst in (holder, filler):
        if not 0 <= inst < n:
            raise KBError(f"unknown instance {inst}")
    hc, fc = ctx.instances[holder], ctx.instances[filler]
    if not subsumes(kb, rdef.domain, hc):
        return Inconsistent("domain-violation", f"{hc} is not a {rdef.domain}")
    if not subsumes(kb, rdef.range, fc):
        return Inconsistent("range-violation", f"{fc} is not a {rdef.range}")
    if rdef.max_fillers is not None and ctx.fillers(holder, role) >= rdef.max_fillers:
        return Inconsistent("cardinality-violation", f"{role} of instance {holder} already has {rdef.max_fillers}")
    return Consistent(InterpretationContext(ctx.instances, ctx.assertions + ((holder, role, filler),)))


def validate_context(kb: KnowledgeBase, ctx: InterpretationContext) -> list[str]:
    """Full re-validation; returns the list of violated invariants (empty if sound)."""
    problems = []
    counts: dict[tuple[int, str], int] = {}
    for h, r, f in ctx.assertions:
        rdef = kb.roles.get(r)
        if rdef is None:
            problems.append(f"unknown role {r}")
            continue
        if not (0 <= h < len(ctx.instances) and 0 <= f < len(ctx.instances)):
            problems.append(f"dangling instance in ({h}, {r}, {f})")
            continue
        if not subsumes(kb, rdef.domain, ctx.instances[h]):
            problems.append(f"domain violation ({h}, {r}, {f})")
        if not subsumes(kb, rdef.range, ctx.instances[f]):
            problems.append(f"range violation ({h}, {r}, {f})")
        counts[h, r] = counts.get((h, r), 0) + 1
        if rdef.max_fillers is not None and counts[h, r] > rdef.max_fillers:
            problems.append(f"cardinality violation ({h}, {r})")
    return problems


def load_kb(source_text: str) -> KnowledgeBase:
    concepts: set[str] = set()
    parents: dict[str, tuple[str, ...]] = {}
    roles: dict[str, RoleDef] = {}
    for lineno, raw in enumerate(source_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^concept\s+(\S+)(?:\s+isa\s+(\S+))?$", line)
        if m:
            concepts.add(m.group(1))
            if m.group(2):
                parents[m.group(1)] = tuple(p for p in m.group(2).split(",") if p)
            continue
        m = re.match(r"^role\s+(\S+)\s+(.*)$", line)
        if m:
            attrs = dict(a.split("=", 1) for a in m.group(2).split() if "=" in a)
            if "domain" not in attrs or "range" not in attrs:
                raise KBError(f"line {lineno}: role needs domain= and range=")
            mx = attrs.get("max")
            roles[m.group(1)] = RoleDef(m.group(1), attrs["domain"], attrs["range"], int(mx) if mx else None)
            continue
        raise KBError(f"line {lineno}: cannot parse {line!r}")
    return KnowledgeBase(concepts, parents, roles)


@lru_cache(maxsize=None)
def toy_kb() -> KnowledgeBase:
    from .grammar import bundled_text

    return load_kb(bundled_text("toy.kb"))
