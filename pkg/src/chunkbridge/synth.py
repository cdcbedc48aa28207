"""Synthetic corpora and query workloads for benchmarks and tests.

Everything is driven by a seeded random.Random, so a (parameters, seed)
pair always regenerates the identical corpus.

Construction rules the extractor relies on:
- entity names are capitalized pseudowords (a fraction are two-token names
  sharing a small prefix pool), so frequency extraction finds them;
- filler vocabulary carries digits ("w48213"), which the extractor ignores
  by design, so fillers can repeat without becoming dictionary entries;
- sentence templates keep a stopword next to every entity slot so no
  accidental cross-boundary bigram reaches the frequency threshold;
- each planted adjacency ("modifier") pair occurs exactly once, so the
  pair itself stays below the threshold while both names stay recognizable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ingest import CorpusDocument
from .text import STOPWORDS

_SYLLABLES = (
    "bar bel cor dan dor fen gal har jen kal kor lan lor mar mel nor pel "
    "quin ral sel tar tor val ven wor xan yor zan bri cla dru fra gre pla sta tri"
).split()

# small closed pool of ordinary words used inside templates; these (and a
# few of their adjacent pairs) intentionally become dictionary entries, a
# bounded, realistic amount of extraction noise
_MENTION_TEMPLATES = (
    "The record for {e} was filed by the {f} desk under {f}.",
    "Notes on {e} are kept in the {f} ledger beside {f}.",
    "A survey of {e} is archived in {f} with the {f} annex.",
    "The registry lists {e} under {f} for the {f} shelf.",
    "An entry about {e} is stored in {f} near the {f} room.",
)

_FILLER_TEMPLATES = (
    "The {f} file sits in the {f} room beside the {f} shelf.",
    "A {f} ledger from {f} was moved to the {f} annex.",
    "The {f} desk keeps {f} with the {f} registry.",
    "Some {f} notes from {f} are filed under {f}.",
)

_QUERY_TEMPLATES_ONE = (
    "Where is {a} described in the records?",
    "What does the archive say about {a}?",
    "Which catalog mentions {a}?",
)

_QUERY_TEMPLATES_TWO = (
    "What links {a} and {b} in the records?",
    "How does {a} relate to {b}?",
    "Which entries mention {a} near {b}?",
)

_QUERY_TEMPLATES_THREE = (
    "What connects {a} with {b} and {c}?",
    "Which records cover {a}, {b} and {c} together?",
)


@dataclass
class SynthCorpus:
    documents: list[CorpusDocument]
    entities: list[str]                     # canonical planted names, rank order
    relations: list[tuple[str, str, str]]   # planted (child, parent, kind)


def _pseudoword(rng: random.Random, used: set[str]) -> str:
    while True:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3)))
        if word not in used and word not in STOPWORDS:
            used.add(word)
            return word


def _display(name: str) -> str:
    return " ".join(part.capitalize() for part in name.split(" "))


def generate_corpus(
    n_chunks: int,
    seed: int,
    vocab_size: int | None = None,
    chunk_len: int = 32,
    multi_token_fraction: float = 0.15,
    hot_fraction: float = 0.02,
    parent_probability: float = 0.4,
) -> SynthCorpus:
    """Generate a corpus that chunks to at least *n_chunks* chunks of
    *chunk_len* tokens, with planted entities and relations."""
    if n_chunks < 1:
        raise ValueError("n_chunks must be >= 1")
    rng = random.Random(seed)
    if vocab_size is None:
        vocab_size = max(300, n_chunks // 15)

    used: set[str] = set()
    prefix_pool = [_pseudoword(rng, used) for _ in range(40)]
    entities: list[str] = []
    n_multi = int(vocab_size * multi_token_fraction)
    for i in range(vocab_size):
        if i < n_multi:
            entities.append(f"{rng.choice(prefix_pool)} {_pseudoword(rng, used)}")
        else:
            entities.append(_pseudoword(rng, used))
    rng.shuffle(entities)

    # planted concept forest: each entity gets at most one earlier parent
    relations: list[tuple[str, str, str]] = []
    kinds = ("belongs_to", "contains", "depends_on", "modifier")
    for i in range(1, len(entities)):
        if rng.random() < parent_probability:
            parent = entities[rng.randrange(i)]
            kind = kinds[rng.randrange(4)]
            relations.append((entities[i], parent, kind))

    def filler() -> str:
        return f"w{rng.randrange(10_000_000)}"

    sentences: list[str] = []
    total_tokens = 0

    def add(sentence: str) -> None:
        nonlocal total_tokens
        sentences.append(sentence)
        total_tokens += len(sentence.split())

    n_hot = max(1, int(len(entities) * hot_fraction))
    for rank, entity in enumerate(entities):
        occurrences = 3 + (rng.randint(10, 40) if rank < n_hot else rng.choice((0, 0, 0, 1, 2)))
        for _ in range(occurrences):
            template = rng.choice(_MENTION_TEMPLATES)
            add(template.format(e=_display(entity), f=filler()))

    for child, parent, kind in relations:
        c, p = _display(child), _display(parent)
        if kind == "belongs_to":
            add(f"{c} belongs to {p}.")
        elif kind == "contains":
            add(f"{p} contains {c}.")
        elif kind == "depends_on":
            add(f"{c} is dependent on {p}.")
        else:  # modifier: adjacency, planted exactly once
            add(f"The {p} {c} units are filed under {filler()}.")

    target_tokens = n_chunks * chunk_len
    while total_tokens < target_tokens:
        template = rng.choice(_FILLER_TEMPLATES)
        add(template.format(f=filler()))

    rng.shuffle(sentences)
    documents: list[CorpusDocument] = []
    pos = 0
    doc_no = 0
    while pos < len(sentences):
        size = rng.randint(40, 60)
        documents.append(
            CorpusDocument(doc_id=f"doc-{doc_no:05d}", text=" ".join(sentences[pos : pos + size]))
        )
        pos += size
        doc_no += 1
    return SynthCorpus(documents=documents, entities=entities, relations=relations)


def zipf_weights(n: int, s: float) -> list[float]:
    """Unnormalized Zipf weights 1/rank^s for ranks 1..n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [1.0 / (rank ** s) for rank in range(1, n + 1)]


def generate_queries(
    entities: list[str],
    n: int,
    seed: int,
    zipf_s: float | None = None,
    max_entities: int = 3,
) -> list[str]:
    """Entity-bearing natural-language queries.

    Entities are sampled uniformly, or Zipf(s)-weighted by rank in
    *entities* when *zipf_s* is given (the skewed workload the sorting
    ablation uses).
    """
    if not entities:
        raise ValueError("entities must be non-empty")
    rng = random.Random(seed)
    weights = zipf_weights(len(entities), zipf_s) if zipf_s is not None else None
    cum_weights = None
    if weights is not None:
        cum_weights = []
        acc = 0.0
        for w in weights:
            acc += w
            cum_weights.append(acc)

    def pick_distinct(count: int) -> list[str]:
        chosen: list[str] = []
        while len(chosen) < count:
            if cum_weights is None:
                e = entities[rng.randrange(len(entities))]
            else:
                e = rng.choices(entities, cum_weights=cum_weights)[0]
            if e not in chosen:
                chosen.append(e)
        return chosen

    queries: list[str] = []
    for _ in range(n):
        count = rng.randint(1, min(max_entities, len(entities), 3))
        names = [_display(e) for e in pick_distinct(count)]
        if count == 1:
            q = rng.choice(_QUERY_TEMPLATES_ONE).format(a=names[0])
        elif count == 2:
            q = rng.choice(_QUERY_TEMPLATES_TWO).format(a=names[0], b=names[1])
        else:
            q = rng.choice(_QUERY_TEMPLATES_THREE).format(a=names[0], b=names[1], c=names[2])
        queries.append(q)
    return queries
