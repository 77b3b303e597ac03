"""Restricted-parallel object-oriented lexicalized dependency parsing."""

from .grammar import Grammar, load_grammar, lexical_lookup, resolve_class, toy_grammar
from .kb import KnowledgeBase, load_kb, toy_kb
from .checks import CheckCounters
from .parser import ParseResult, parse

__all__ = [
    "CheckCounters",
    "Grammar",
    "KnowledgeBase",
    "ParseResult",
    "lexical_lookup",
    "load_grammar",
    "load_kb",
    "parse",
    "resolve_class",
    "toy_grammar",
    "toy_kb",
]
