"""Lexicalized dependency grammar: word classes, valencies, lexicon.

The grammar file is line oriented::

    feature number = sg|pl                  # inventory declaration
    class NOUN : NOMINAL
      feature number = sg|pl
      valency det dir=L class=DETERMINER agree=number opt max=1 sem=has-reference
      order det < attr
      ungovernable
    lex "server" class=NOUN feature number=sg concept=SERVER role subject=crash-patient

Indented lines belong to the most recent ``class``.  ``role <valency>=<kb role>``
on a lexicon entry overrides the semantic role of one valency for that reading.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

TOP_CLASS = "WORD"
UNKNOWN_CLASS = "UNKNOWN"
UNBOUNDED = None


class GrammarError(Exception):
    """Raised for malformed or inconsistent grammar files."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class FeatureBundle:
    """Flat feature structure; each attribute maps to a non-empty value set."""

    items: tuple[tuple[str, frozenset[str]], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Iterable[str]] | None = None) -> "FeatureBundle":
        mapping = mapping or {}
        return cls(tuple(sorted((k, frozenset(v)) for k, v in mapping.items())))

    def as_dict(self) -> dict[str, frozenset[str]]:
        return dict(self.items)

    def get(self, name: str) -> frozenset[str] | None:
        for key, values in self.items:
            if key == name:
                return values
        return None

    def names(self) -> set[str]:
        return {k for k, _ in self.items}

    def override(self, other: "FeatureBundle") -> "FeatureBundle":
        merged = self.as_dict()
        merged.update(other.as_dict())
        return FeatureBundle.of(merged)

    def unify(self, other: "FeatureBundle", names: Iterable[str] | None = None) -> "FeatureBundle | None":
        """Intersect per attribute; ``None`` when some intersection is empty.

        Attributes missing on one side are unconstrained there.  With ``names``
        only those attributes are intersected and the rest of ``self`` is kept.
        """
        mine = self.as_dict()
        theirs = other.as_dict()
        keys = set(names) if names is not None else set(mine) | set(theirs)
        for key in keys:
            if key in mine and key in theirs:
                common = mine[key] & theirs[key]
                if not common:
                    return None
                mine[key] = common
            elif key in theirs and names is None:
                mine[key] = theirs[key]
        return FeatureBundle.of(mine)

    def __str__(self) -> str:
        return ",".join(f"{k}={'|'.join(sorted(v))}" for k, v in self.items)


@dataclass(frozen=True)
class ValencySpec:
    role_name: str
    direction: str  # "L" or "R"
    modifier_class: str
    modifier_features: FeatureBundle = FeatureBundle()
    agreement: tuple[str, ...] = ()
    obligatory: bool = False
    max_fillers: int | None = UNBOUNDED
    sem_role: str | None = None

    def saturated(self, count: int) -> bool:
        return self.max_fillers is not None and count >= self.max_fillers


@dataclass(frozen=True)
class WordClassDef:
    name: str
    parent: str | None
    own_features: FeatureBundle = FeatureBundle()
    own_valencies: tuple[ValencySpec, ...] = ()
    order: tuple[tuple[str, str], ...] = ()
    governable: bool = True


@dataclass(frozen=True)
class ResolvedWordClass:
    name: str
    ancestors: tuple[str, ...]  # self first, top class last
    features: FeatureBundle
    valencies: tuple[ValencySpec, ...]
    order: tuple[tuple[str, str], ...]
    governable: bool

    def valency(self, role_name: str) -> ValencySpec | None:
        for v in self.valencies:
            if v.role_name == role_name:
                return v
        return None


@dataclass(frozen=True)
class Reading:
    surface: str
    word_class: str
    features: FeatureBundle = FeatureBundle()
    concept: str | None = None
    role_sems: tuple[tuple[str, str], ...] = ()


@dataclass
class Grammar:
    classes: dict[str, WordClassDef]
    feature_inventory: dict[str, frozenset[str]]
    lexicon: dict[str, list[Reading]]
    _resolved: dict[str, ResolvedWordClass] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        _validate(self)

    def is_subclass(self, name: str, ancestor: str) -> bool:
        return ancestor in resolve_class(self, name).ancestors

    def node_class(self, reading: Reading) -> ResolvedWordClass:
        """Resolved class of a reading, with its lexical sem-role overrides applied."""
        base = resolve_class(self, reading.word_class)
        if not reading.role_sems:
            return base
        key = f"{reading.word_class}|{reading.role_sems}"
        cached = self._resolved.get(key)
        if cached is None:
            sems = dict(reading.role_sems)
            vals = tuple(
                ValencySpec(**{**v.__dict__, "sem_role": sems.get(v.role_name, v.sem_role)})
                for v in base.valencies
            )
            cached = ResolvedWordClass(base.name, base.ancestors, base.features, vals, base.order, base.governable)
            self._resolved[key] = cached
        return cached

    def reading_features(self, reading: Reading) -> FeatureBundle:
        return resolve_class(self, reading.word_class).features.override(reading.features)


def resolve_class(grammar: Grammar, name: str) -> ResolvedWordClass:
    cached = grammar._resolved.get(name)
    if cached is not None:
        return cached
    if name not in grammar.classes:
        raise GrammarError(f"unknown word class {name!r}")
    chain = []
    cur: str | None = name
    while cur is not None:
        if cur in chain:
            raise GrammarError(f"inheritance cycle through {cur!r}")
        chain.append(cur)
        cur = grammar.classes[cur].parent
    features = FeatureBundle()
    valencies: list[ValencySpec] = []
    order: list[tuple[str, str]] = []
    for cname in reversed(chain):
        cdef = grammar.classes[cname]
        features = features.override(cdef.own_features)
        for v in cdef.own_valencies:
            for i, old in enumerate(valencies):
                if old.role_name == v.role_name:
                    valencies[i] = v
                    break
            else:
                valencies.append(v)
        order.extend(p for p in cdef.order if p not in order)
    resolved = ResolvedWordClass(
        name=name,
        ancestors=tuple(chain),
        features=features,
        valencies=tuple(valencies),
        order=tuple(order),
        governable=grammar.classes[name].governable,
    )
    grammar._resolved[name] = resolved
    return resolved


def lexical_lookup(grammar: Grammar, token: str) -> list[Reading]:
    readings = grammar.lexicon.get(token)
    if readings:
        return list(readings)
    return [Reading(surface=token, word_class=UNKNOWN_CLASS)]


def _validate(grammar: Grammar) -> None:
    if not grammar.lexicon:
        raise GrammarError("lexicon is empty")
    tops = [c.name for c in grammar.classes.values() if c.parent is None]
    if len(tops) != 1:
        raise GrammarError(f"expected exactly one top class, found {sorted(tops)}")
    for cdef in grammar.classes.values():
        if cdef.parent is not None and cdef.parent not in grammar.classes:
            raise GrammarError(f"class {cdef.name}: undeclared parent {cdef.parent!r}")
    for name in grammar.classes:
        resolve_class(grammar, name)  # detects cycles
    for cdef in grammar.classes.values():
        _check_features(grammar, cdef.own_features, f"class {cdef.name}")
        for v in cdef.own_valencies:
            if v.modifier_class not in grammar.classes:
                raise GrammarError(f"class {cdef.name}: valency {v.role_name} references undeclared class {v.modifier_class!r}")
            _check_features(grammar, v.modifier_features, f"valency {v.role_name}")
            for f in v.agreement:
                if f not in grammar.feature_inventory:
                    raise GrammarError(f"valency {v.role_name}: undeclared agreement feature {f!r}")
    for name in grammar.classes:
        roles = [v.role_name for v in resolve_class(grammar, name).valencies]
        if len(roles) != len(set(roles)):
            raise GrammarError(f"class {name}: repeated valency role")
        for a, b in resolve_class(grammar, name).order:
            if a not in roles or b not in roles:
                raise GrammarError(f"class {name}: order refers to unknown role ({a} < {b})")
    if UNKNOWN_CLASS not in grammar.classes:
        raise GrammarError(f"grammar must declare class {UNKNOWN_CLASS}")
    for readings in grammar.lexicon.values():
        for r in readings:
            if r.word_class not in grammar.classes:
                raise GrammarError(f"lexicon entry {r.surface!r}: undeclared class {r.word_class!r}")
            _check_features(grammar, r.features, f"lexicon entry {r.surface!r}")
            roles = {v.role_name for v in resolve_class(grammar, r.word_class).valencies}
            for role, _ in r.role_sems:
                if role not in roles:
                    raise GrammarError(f"lexicon entry {r.surface!r}: class {r.word_class} has no valency {role!r}")


def _check_features(grammar: Grammar, bundle: FeatureBundle, where: str) -> None:
    for name, values in bundle.items:
        allowed = grammar.feature_inventory.get(name)
        if allowed is None:
            raise GrammarError(f"{where}: undeclared feature {name!r}")
        if not values:
            raise GrammarError(f"{where}: empty value set for {name!r}")
        if not values <= allowed:
            raise GrammarError(f"{where}: values {sorted(values - allowed)} not allowed for {name!r}")


_LEX_RE = re.compile(r'^lex\s+"([^"]+)"\s*(.*)$')


def _values(text: str) -> frozenset[str]:
    return frozenset(v.strip() for v in text.split("|") if v.strip())


def load_grammar(source_text: str) -> Grammar:
    inventory: dict[str, frozenset[str]] = {}
    classes: dict[str, dict] = {}
    lexicon: dict[str, list[Reading]] = {}
    current: dict | None = None

    for lineno, raw in enumerate(source_text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip() if not raw.lstrip().startswith("lex") else raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        indented = line[0].isspace()
        words = line.split()
        head = words[0]
        if not indented:
            current = None
            if head == "feature":
                m = re.match(r"^feature\s+(\S+)\s*=\s*(\S+)$", line)
                if not m:
                    raise GrammarError("malformed feature declaration", lineno)
                inventory[m.group(1)] = _values(m.group(2))
            elif head == "class":
                m = re.match(r"^class\s+(\S+)(?:\s*:\s*(\S+))?$", line)
                if not m:
                    raise GrammarError("malformed class declaration", lineno)
                name = m.group(1)
                if name in classes:
                    raise GrammarError(f"class {name} declared twice", lineno)
                current = classes[name] = dict(
                    name=name, parent=m.group(2), features={}, valencies=[], order=[], governable=True, line=lineno
                )
            elif head == "lex":
                reading = _parse_lex(line, lineno)
                lexicon.setdefault(reading.surface, []).append(reading)
            else:
                raise GrammarError(f"unknown directive {head!r}", lineno)
            continue
        if current is None:
            raise GrammarError("indented line outside a class block", lineno)
        if head == "feature":
            m = re.match(r"^\s*feature\s+(\S+)\s*=\s*(\S+)$", line)
            if not m:
                raise GrammarError("malformed class feature", lineno)
            current["features"][m.group(1)] = _values(m.group(2))
        elif head == "valency":
            current["valencies"].append(_parse_valency(words[1:], lineno))
        elif head == "order":
            if len(words) != 4 or words[2] != "<":
                raise GrammarError("malformed order constraint", lineno)
            current["order"].append((words[1], words[3]))
        elif head == "ungovernable":
            current["governable"] = False
        else:
            raise GrammarError(f"unknown class directive {head!r}", lineno)

    defs = {}
    for name, c in classes.items():
        if c["parent"] is not None and c["parent"] not in classes:
            raise GrammarError(f"class {name}: undeclared parent {c['parent']!r}", c["line"])
        defs[name] = WordClassDef(
            name=name,
            parent=c["parent"],
            own_features=FeatureBundle.of(c["features"]),
            own_valencies=tuple(c["valencies"]),
            order=tuple(c["order"]),
            governable=c["governable"],
        )
    for name, c in classes.items():
        seen = set()
        cur = name
        while cur is not None:
            if cur in seen:
                raise GrammarError(f"inheritance cycle through class {name}", c["line"])
            seen.add(cur)
            cur = defs[cur].parent
    return Grammar(classes=defs, feature_inventory=inventory, lexicon=lexicon)


def _parse_valency(words: list[str], lineno: int) -> ValencySpec:
    if not words:
        raise GrammarError("valency without role name", lineno)
    kw = dict(role_name=words[0])
    spec_features: dict[str, frozenset[str]] = {}
    for w in words[1:]:
        if w in ("opt", "obl"):
            kw["obligatory"] = w == "obl"
        elif "=" in w:
            key, val = w.split("=", 1)
            if key == "dir":
                if val not in ("L", "R"):
                    raise GrammarError(f"bad direction {val!r}", lineno)
                kw["direction"] = val
            elif key == "class":
                kw["modifier_class"] = val
            elif key == "agree":
                kw["agreement"] = tuple(f for f in val.split(",") if f)
            elif key == "max":
                if not val.isdigit() or int(val) < 1:
                    raise GrammarError(f"bad max {val!r}", lineno)
                kw["max_fillers"] = int(val)
            elif key == "sem":
                kw["sem_role"] = val
            elif key.startswith("feat."):
                spec_features[key[5:]] = _values(val)
            else:
                raise GrammarError(f"unknown valency attribute {key!r}", lineno)
        else:
            raise GrammarError(f"unexpected token {w!r} in valency", lineno)
    if "direction" not in kw or "modifier_class" not in kw:
        raise GrammarError("valency needs dir= and class=", lineno)
    kw["modifier_features"] = FeatureBundle.of(spec_features)
    return ValencySpec(**kw)


def _parse_lex(line: str, lineno: int) -> Reading:
    m = _LEX_RE.match(line.strip())
    if not m:
        raise GrammarError("malformed lexicon entry", lineno)
    surface, rest = m.group(1), m.group(2).split()
    word_class = concept = None
    features: dict[str, frozenset[str]] = {}
    sems: list[tuple[str, str]] = []
    i = 0
    while i < len(rest):
        w = rest[i]
        if w in ("feature", "role"):
            if i + 1 >= len(rest) or "=" not in rest[i + 1]:
                raise GrammarError(f"{w} needs <name>=<value>", lineno)
            key, val = rest[i + 1].split("=", 1)
            if w == "feature":
                features[key] = _values(val)
            else:
                sems.append((key, val))
            i += 2
            continue
        if w.startswith("class="):
            word_class = w[6:]
        elif w.startswith("concept="):
            concept = w[8:]
        else:
            raise GrammarError(f"unexpected token {w!r} in lexicon entry", lineno)
        i += 1
    if word_class is None:
        raise GrammarError("lexicon entry without class=", lineno)
    return Reading(surface, word_class, FeatureBundle.of(features), concept, tuple(sems))


def dump_grammar(grammar: Grammar) -> str:
    """Serialize back to the line format; ``load_grammar`` inverts it."""
    out = []
    for name, values in grammar.feature_inventory.items():
        out.append(f"feature {name} = {'|'.join(sorted(values))}")
    for cdef in grammar.classes.values():
        out.append(f"class {cdef.name}" + (f" : {cdef.parent}" if cdef.parent else ""))
        for fname, values in cdef.own_features.items:
            out.append(f"  feature {fname} = {'|'.join(sorted(values))}")
        for v in cdef.own_valencies:
            parts = [f"  valency {v.role_name}", f"dir={v.direction}", f"class={v.modifier_class}"]
            parts += [f"feat.{k}={'|'.join(sorted(vals))}" for k, vals in v.modifier_features.items]
            if v.agreement:
                parts.append(f"agree={','.join(v.agreement)}")
            parts.append("obl" if v.obligatory else "opt")
            if v.max_fillers is not None:
                parts.append(f"max={v.max_fillers}")
            if v.sem_role:
                parts.append(f"sem={v.sem_role}")
            out.append(" ".join(parts))
        for a, b in cdef.order:
            out.append(f"  order {a} < {b}")
        if not cdef.governable:
            out.append("  ungovernable")
    for readings in grammar.lexicon.values():
        for r in readings:
            parts = [f'lex "{r.surface}"', f"class={r.word_class}"]
            parts += [f"feature {k}={'|'.join(sorted(vals))}" for k, vals in r.features.items]
            if r.concept:
                parts.append(f"concept={r.concept}")
            parts += [f"role {k}={v}" for k, v in r.role_sems]
            out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def bundled_text(name: str) -> str:
    return resources.files("parsetalk.data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def toy_grammar() -> Grammar:
    return load_grammar(bundled_text("toy.grammar"))
