"""Corpus ingestion: chunking, entity/relation extraction, index building.

The build path is fully deterministic for a given corpus and config: every
hash is fixed-seed, extraction scans documents in order, and filter inserts
happen in dictionary order with ascending pair ids.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import CHUNKS_PER_ABSTRACT, Config
from .cuckoo import CapacityError, CuckooIndex, FilterStats
from .embed import HashingEmbedder
from .forest import (
    Abstract,
    Forest,
    ForestBuildReport,
    RelationEdge,
    assemble_forest,
    build_abstracts,
    filter_relations,
)
from .text import STOPWORDS, split_sentences, tokenize, tokenize_with_separators


class InputFormatError(ValueError):
    """Malformed corpus/sidecar input; carries the offending line number."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class BuildError(RuntimeError):
    """Index construction failed (e.g. the filter rejected an entity)."""


@dataclass(frozen=True)
class CorpusDocument:
    doc_id: str
    text: str


# -- chunk store ---------------------------------------------------------------


class ChunkStore:
    """Chunk texts plus their embedding matrix (float32, unit rows)."""

    def __init__(self, texts: Sequence[str], embeddings: np.ndarray):
        embeddings = np.asarray(embeddings, dtype=np.float32)
        if embeddings.ndim != 2 or embeddings.shape[0] != len(texts):
            raise ValueError("embeddings must be one float32 row per chunk")
        self.texts = list(texts)
        self.embeddings = embeddings

    def __len__(self) -> int:
        return len(self.texts)

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def score(self, query_vec: np.ndarray, chunk_ids: np.ndarray | None = None) -> np.ndarray:
        """Float64 dot products of the query against the given chunk rows
        (all chunks when chunk_ids is None).

        Per-row products are float32 and the row sum accumulates in
        float64, so a chunk's score is bit-identical whether it is scored
        inside a candidate pool or in a full scan. The naive baseline and
        the candidate ranking both call this.
        """
        q = np.asarray(query_vec, dtype=np.float32)
        rows = self.embeddings if chunk_ids is None else self.embeddings[chunk_ids]
        return (rows * q).sum(axis=1, dtype=np.float64)


# -- entity dictionary ---------------------------------------------------------


class EntityDictionary:
    """Canonical entity strings with counts and a longest-match scanner."""

    def __init__(self, counts: Mapping[str, int]):
        self._counts: dict[str, int] = {}
        self._by_tokens: dict[tuple[str, ...], str] = {}
        self._first_tokens: set[str] = set()
        self._max_tokens = 0
        for entity, count in counts.items():
            tokens = tuple(entity.split(" "))
            if not entity or " ".join(tokenize(entity)) != entity:
                raise ValueError(f"entity not in canonical form: {entity!r}")
            self._counts[entity] = int(count)
            self._by_tokens[tokens] = entity
            self._first_tokens.add(tokens[0])
            self._max_tokens = max(self._max_tokens, len(tokens))

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, entity: str) -> bool:
        return entity in self._counts

    def entities(self) -> list[str]:
        return list(self._counts)

    def count_of(self, entity: str) -> int:
        return self._counts[entity]

    def counts(self) -> dict[str, int]:
        return dict(self._counts)

    def update_counts(self, counts: Mapping[str, int]) -> None:
        """Replace counts (entries absent from *counts* drop to 0)."""
        for entity in self._counts:
            self._counts[entity] = int(counts.get(entity, 0))

    def match_spans(self, tokens: Sequence[str]) -> list[tuple[int, int, str]]:
        """Non-overlapping (start, end, entity) spans, longest match first,
        scanning left to right."""
        spans: list[tuple[int, int, str]] = []
        by_tokens = self._by_tokens
        first = self._first_tokens
        n = len(tokens)
        i = 0
        while i < n:
            if tokens[i] not in first:
                i += 1
                continue
            for length in range(min(self._max_tokens, n - i), 0, -1):
                entity = by_tokens.get(tuple(tokens[i : i + length]))
                if entity is not None:
                    spans.append((i, i + length, entity))
                    i += length
                    break
            else:
                i += 1
        return spans

    def match_text(self, text: str) -> list[str]:
        """Entities occurring in *text*, deduplicated, first-match order."""
        seen: dict[str, None] = {}
        for _, _, entity in self.match_spans(tokenize(text)):
            seen.setdefault(entity)
        return list(seen)


# -- document chunking ---------------------------------------------------------


def chunk_document(text: str, chunk_len: int) -> list[str]:
    """Pack whole sentences into chunks of roughly *chunk_len* tokens.

    A sentence never splits across chunks unless it alone exceeds the
    budget, in which case it becomes its own oversized chunk. Empty input
    yields no chunks.
    """
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    chunks: list[str] = []
    current: list[str] = []
    current_tokens = 0
    for sentence in split_sentences(text):
        n = len(sentence.split())
        if current and current_tokens + n > chunk_len:
            chunks.append(" ".join(current))
            current = []
            current_tokens = 0
        current.append(sentence)
        current_tokens += n
    if current:
        chunks.append(" ".join(current))
    return chunks


# -- entity extraction ---------------------------------------------------------

_CAP_SPAN_RE = re.compile(r"\b[A-Z][A-Za-z'\-]*(?:[ \t]+[A-Z][A-Za-z'\-]*)+")


def _no_digits(token: str) -> bool:
    return not any(c.isdigit() for c in token)


def extract_entities(
    documents: Iterable[CorpusDocument],
    min_count: int = 2,
    stopwords: frozenset[str] = STOPWORDS,
) -> EntityDictionary:
    """Heuristic entity extraction, deterministic and dependency-free.

    Candidates are capitalized multi-word spans (boundary stopwords
    stripped), plus alphabetic unigrams (len >= 3) and bigrams whose tokens
    are neither stopwords nor digit-bearing. A candidate survives when its
    corpus count reaches *min_count*. A candidate picked up by several
    rules keeps its highest count.
    """
    span_counts: Counter[str] = Counter()
    unigram_counts: Counter[str] = Counter()
    bigram_counts: Counter[str] = Counter()
    for doc in documents:
        for match in _CAP_SPAN_RE.finditer(doc.text):
            tokens = tokenize(match.group())
            while tokens and tokens[0] in stopwords:
                tokens.pop(0)
            while tokens and tokens[-1] in stopwords:
                tokens.pop()
            if tokens and all(_no_digits(t) for t in tokens):
                span_counts[" ".join(tokens)] += 1
        tokens = tokenize(doc.text)
        for i, tok in enumerate(tokens):
            if len(tok) >= 3 and tok not in stopwords and _no_digits(tok):
                unigram_counts[tok] += 1
            if i + 1 < len(tokens):
                nxt = tokens[i + 1]
                if (
                    tok not in stopwords
                    and nxt not in stopwords
                    and _no_digits(tok)
                    and _no_digits(nxt)
                ):
                    bigram_counts[f"{tok} {nxt}"] += 1
    merged: dict[str, int] = {}
    for source in (span_counts, unigram_counts, bigram_counts):
        for candidate, count in source.items():
            if count > merged.get(candidate, 0):
                merged[candidate] = count
    return EntityDictionary(
        {c: n for c, n in merged.items() if n >= min_count}
    )


# -- relation extraction -------------------------------------------------------

_SEPARATORS = frozenset({",", ";", "and", "or"})
_TRAILING_ARTICLES = ("the", "a", "an")

# gap token tuple -> (kind, which side is the child)
_VERB_PATTERNS: dict[tuple[str, ...], tuple[str, str]] = {
    ("belongs", "to"): ("belongs_to", "left"),
    ("belong", "to"): ("belongs_to", "left"),
    ("contains",): ("contains", "right"),
    ("contain",): ("contains", "right"),
    ("depends", "on"): ("depends_on", "left"),
    ("depend", "on"): ("depends_on", "left"),
    ("is", "dependent", "on"): ("depends_on", "left"),
    ("are", "dependent", "on"): ("depends_on", "left"),
}

VERB_CONFIDENCE = 2
MODIFIER_CONFIDENCE = 1


def extract_relations(
    documents: Iterable[CorpusDocument],
    dictionary: EntityDictionary,
) -> list[RelationEdge]:
    """Pattern-based relation extraction over single sentences.

    Entity spans come from the dictionary's longest-match scanner. Runs of
    spans separated only by conjunctions or commas form groups, and a
    pattern between two groups applies pairwise, so "The cell contains
    mitochondria and ribosomes" yields two contains edges. Bare adjacency
    ("Horner's syndrome patients") links right to left with modifier
    confidence; explicit verb patterns rank higher.
    """
    edges: list[RelationEdge] = []
    for doc in documents:
        for sentence in split_sentences(doc.text):
            tokens = tokenize_with_separators(sentence)
            spans = dictionary.match_spans(tokens)
            if len(spans) < 2:
                continue
            groups: list[list[str]] = [[spans[0][2]]]
            gaps: list[tuple[str, ...]] = []
            for prev, cur in zip(spans, spans[1:]):
                gap = tuple(tokens[prev[1] : cur[0]])
                if gap and all(t in _SEPARATORS for t in gap):
                    groups[-1].append(cur[2])
                else:
                    gaps.append(gap)
                    groups.append([cur[2]])
            for left, gap, right in zip(groups, gaps, groups[1:]):
                while gap and gap[-1] in _TRAILING_ARTICLES:
                    gap = gap[:-1]
                if not gap:
                    for parent in left:
                        for child in right:
                            edges.append(
                                RelationEdge(child, parent, "modifier", MODIFIER_CONFIDENCE)
                            )
                    continue
                pattern = _VERB_PATTERNS.get(gap)
                if pattern is None:
                    continue
                kind, child_side = pattern
                children, parents = (left, right) if child_side == "left" else (right, left)
                for child in children:
                    for parent in parents:
                        edges.append(RelationEdge(child, parent, kind, VERB_CONFIDENCE))
    return edges


# -- sidecar / corpus readers ----------------------------------------------------


def read_corpus_jsonl(path: str) -> list[CorpusDocument]:
    """Read {"doc_id": ..., "text": ...} JSON lines; blank lines skipped."""
    documents = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise InputFormatError(path, line_no, "expected a JSON object")
            doc_id = record.get("doc_id")
            text = record.get("text")
            if not isinstance(doc_id, str) or not doc_id.strip():
                raise InputFormatError(path, line_no, "doc_id must be a non-empty string")
            if not isinstance(text, str) or not text.strip():
                raise InputFormatError(path, line_no, "text must be a non-empty string")
            documents.append(CorpusDocument(doc_id=doc_id, text=text))
    return documents


def read_entities_jsonl(path: str) -> EntityDictionary:
    """Read {"entity": ...} JSON lines into a dictionary (counts start 0,
    filled from the corpus scan during build)."""
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(path, line_no, f"invalid JSON: {exc.msg}") from exc
            entity = record.get("entity") if isinstance(record, dict) else None
            if not isinstance(entity, str):
                raise InputFormatError(path, line_no, "entity must be a string")
            canonical = " ".join(tokenize(entity))
            if not canonical:
                raise InputFormatError(path, line_no, f"entity has no tokens: {entity!r}")
            counts.setdefault(canonical, 0)
    return EntityDictionary(counts)


_TSV_HEADER = ("child", "parent", "kind", "confidence")


def read_relations_tsv(path: str) -> list[RelationEdge]:
    """Read child<TAB>parent<TAB>kind<TAB>confidence rows; an optional
    header row is skipped."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if line_no == 1 and tuple(c.strip().lower() for c in cols) == _TSV_HEADER:
                continue
            if len(cols) != 4:
                raise InputFormatError(path, line_no, f"expected 4 columns, got {len(cols)}")
            child = " ".join(tokenize(cols[0]))
            parent = " ".join(tokenize(cols[1]))
            kind = cols[2].strip()
            if not child or not parent:
                raise InputFormatError(path, line_no, "empty child or parent")
            try:
                confidence = int(cols[3])
            except ValueError as exc:
                raise InputFormatError(path, line_no, f"bad confidence {cols[3]!r}") from exc
            try:
                edges.append(RelationEdge(child, parent, kind, confidence))
            except ValueError as exc:
                raise InputFormatError(path, line_no, str(exc)) from exc
    return edges


# -- index bundle / build --------------------------------------------------------


@dataclass
class IndexBundle:
    """Everything a query needs: chunks, forest, filter, dictionary."""

    store: ChunkStore
    forest: Forest
    filter: CuckooIndex
    dictionary: EntityDictionary
    config: Config
    embedder: object = None

    def __post_init__(self) -> None:
        if self.embedder is None:
            self.embedder = HashingEmbedder(self.config.embed_dim)


@dataclass
class BuildReport:
    document_count: int = 0
    chunk_count: int = 0
    abstract_count: int = 0
    entity_count: int = 0
    indexed_entities: int = 0
    relations_raw: int = 0
    relations_kept: int = 0
    forest: ForestBuildReport = field(default_factory=ForestBuildReport)
    filter: FilterStats | None = None

    def to_dict(self) -> dict:
        return {
            "document_count": self.document_count,
            "chunk_count": self.chunk_count,
            "abstract_count": self.abstract_count,
            "entity_count": self.entity_count,
            "indexed_entities": self.indexed_entities,
            "relations_raw": self.relations_raw,
            "relations_kept": self.relations_kept,
            "forest": self.forest.to_dict(),
            "filter": self.filter.to_dict() if self.filter else None,
        }


def build_index(
    documents: Sequence[CorpusDocument],
    config: Config,
    embedder=None,
    entities: EntityDictionary | None = None,
    relations: Sequence[RelationEdge] | None = None,
) -> tuple[IndexBundle, BuildReport]:
    """Build the full retrieval index from a corpus.

    *entities*/*relations* replace the built-in extractors when supplied
    (external NER / relation tooling). Raises BuildError if the filter
    cannot place an entity even after resizing.
    """
    config.validate()
    if not documents:
        raise BuildError("corpus is empty")
    report = BuildReport(document_count=len(documents))

    chunk_texts = [
        chunk for doc in documents for chunk in chunk_document(doc.text, config.chunk_len)
    ]
    if not chunk_texts:
        raise BuildError("corpus produced no chunks")
    report.chunk_count = len(chunk_texts)

    if embedder is None:
        embedder = HashingEmbedder(config.embed_dim)
    store = ChunkStore(chunk_texts, embedder.embed_batch(chunk_texts))

    abstracts = build_abstracts(chunk_texts)
    report.abstract_count = len(abstracts)

    sidecar_dictionary = entities is not None
    dictionary = entities if sidecar_dictionary else extract_entities(
        documents, min_count=config.min_entity_count
    )
    report.entity_count = len(dictionary)

    raw_edges = list(relations) if relations is not None else extract_relations(
        documents, dictionary
    )
    report.relations_raw = len(raw_edges)
    kept_edges = filter_relations(raw_edges)
    report.relations_kept = len(kept_edges)

    # occurrence scan: entity -> abstracts whose chunks mention it
    occurrences: dict[str, set[int]] = {}
    scan_counts: Counter[str] = Counter()
    for chunk_id, text in enumerate(chunk_texts):
        spans = dictionary.match_spans(tokenize(text))
        pair_id = chunk_id // CHUNKS_PER_ABSTRACT
        for _, _, entity in spans:
            occurrences.setdefault(entity, set()).add(pair_id)
            scan_counts[entity] += 1
    if sidecar_dictionary:
        dictionary.update_counts(scan_counts)

    # concept -> abstract of its first occurrence
    concept_to_abstract = {
        entity: min(pair_ids) for entity, pair_ids in occurrences.items()
    }

    forest, forest_report = assemble_forest(abstracts, kept_edges, concept_to_abstract)
    report.forest = forest_report

    filt = CuckooIndex(
        bucket_count=config.initial_buckets,
        max_kicks=config.max_kicks,
        rng_seed=config.rng_seed,
    )
    indexed = 0
    for entity in dictionary.entities():
        pair_ids = occurrences.get(entity)
        if not pair_ids:
            continue
        indexed += 1
        for pair_id in sorted(pair_ids):
            outcome = filt.insert(entity, pair_id)
            if outcome == "failed":
                raise CapacityError(
                    f"filter could not place entity {entity!r} even after resizing"
                )
    report.indexed_entities = indexed
    report.filter = filt.stats()

    bundle = IndexBundle(
        store=store,
        forest=forest,
        filter=filt,
        dictionary=dictionary,
        config=config,
        embedder=embedder,
    )
    return bundle, report
