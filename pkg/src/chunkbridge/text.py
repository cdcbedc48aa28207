"""Tokenization, canonicalization, and sentence splitting.

Every component that looks at text (chunking, entity extraction, query
recognition, embedding) goes through these helpers so that "the same word"
means the same thing everywhere.
"""

from __future__ import annotations

import re

# Word tokens are lowercase alphanumerics with internal apostrophes or
# hyphens, so "Horner's" and "iron-sulfur" survive as single tokens.
_WORD_RE = re.compile(r"[a-z0-9][a-z0-9'\-]*")

# Word tokens plus , and ; kept as standalone marks; used by the relation
# scanner where punctuation separates conjunction groups.
_WORD_OR_SEP_RE = re.compile(r"[a-z0-9][a-z0-9'\-]*|[,;]")

_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")

# Small built-in stoplist: articles, conjunctions, prepositions, pronouns,
# auxiliaries, and the connective verbs used by the relation patterns (those
# must never become dictionary entities or the patterns stop matching).
STOPWORDS = frozenset(
    """
    a an the and or but nor so yet of in on at to from by with without for
    as into onto over under between among through during before after above
    below up down out off again further once here there when where why how
    all any both each few more most other some such no not only own same
    than too very can will just should now this that these those i you he
    she it we they them his her its our their what which who whom be been
    being am is are was were do does did doing have has had having would
    could may might must shall about across against along around behind
    beneath beside besides beyond near upon via within toward towards
    until unless although though while since whether belongs belong
    contains contain depends depend dependent
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens of *text*, punctuation dropped."""
    return _WORD_RE.findall(text.lower())


def tokenize_with_separators(text: str) -> list[str]:
    """Like tokenize() but keeps "," and ";" as separator tokens."""
    return _WORD_OR_SEP_RE.findall(text.lower())


def canonicalize(text: str) -> str:
    """Canonical form: lowercase tokens joined by single spaces."""
    return " ".join(tokenize(text))


def split_sentences(text: str) -> list[str]:
    """Split on sentence-final punctuation followed by whitespace.

    Deliberately simple and deterministic; no abbreviation handling.
    """
    parts = _SENTENCE_RE.split(text.strip())
    return [p.strip() for p in parts if p.strip()]


def first_sentence(text: str) -> str:
    sentences = split_sentences(text)
    return sentences[0] if sentences else ""
