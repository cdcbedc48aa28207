"""Query serving: entity recognition, candidate expansion, top-k, prompt.

The pipeline: embed the query, recognize dictionary entities in it, union
their filter payloads into an initial abstract set (bumping temperatures),
expand that set through the forest, rank the candidate chunks by cosine
similarity, and assemble the prompt. When recognition or lookup yields
nothing, the pipeline falls back to scoring the whole chunk pool. Dirty
filter buckets are resorted at the end of each served query.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import CHUNKS_PER_ABSTRACT, MAX_EXPANSION_DEPTH
from .ingest import ChunkStore, EntityDictionary, IndexBundle

SYSTEM_LINE = "System: Answer the question using the provided information."


@dataclass
class ContextResult:
    query: str
    entities: list[str] = field(default_factory=list)
    initial_abstracts: list[int] = field(default_factory=list)
    expanded_abstracts: list[int] = field(default_factory=list)
    candidate_count: int = 0
    selected_chunks: list[tuple[int, float]] = field(default_factory=list)
    selected_abstracts: list[int] = field(default_factory=list)
    fallback: bool = False
    prompt: str = ""
    timing_us: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "fallback": self.fallback,
            "entities": self.entities,
            "initial_abstracts": self.initial_abstracts,
            "expanded_abstracts": self.expanded_abstracts,
            "candidate_count": self.candidate_count,
            "chunks": [{"id": cid, "score": score} for cid, score in self.selected_chunks],
            "selected_abstracts": self.selected_abstracts,
            "prompt": self.prompt,
            "timing_us": self.timing_us,
        }


def recognize_query_entities(query: str, dictionary: EntityDictionary) -> list[str]:
    """Dictionary entities present in the query, longest match first,
    deduplicated in first-match order (one temperature bump per entity)."""
    return dictionary.match_text(query)


def select_top_k(
    candidate_ids: np.ndarray | list[int],
    query_vec: np.ndarray,
    k: int,
    store: ChunkStore,
) -> list[tuple[int, float]]:
    """Top-k candidates by cosine score, descending; ties break toward the
    lower chunk id. Returns fewer than k when the pool is smaller."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = np.asarray(candidate_ids, dtype=np.int64)
    if ids.size == 0:
        return []
    scores = store.score(query_vec, ids)
    order = np.lexsort((ids, -scores))[:k]
    return [(int(ids[i]), float(scores[i])) for i in order]


def assemble_prompt(
    query: str,
    chunk_texts: list[str],
    abstract_summaries: list[str],
) -> str:
    """Fixed prompt template; byte-stable for identical inputs.

    Sections are separated by single blank lines; empty selections leave
    their section header with no body lines.
    """
    parts = [SYSTEM_LINE, "", "Information:"]
    parts.extend(chunk_texts)
    parts.extend(["", "Abstracts:"])
    parts.extend(abstract_summaries)
    parts.extend(["", "Question:", query])
    return "\n".join(parts)


def retrieve_context(
    query: str,
    bundle: IndexBundle,
    k: int | None = None,
    max_depth: int | None = None,
    resort: bool = True,
) -> ContextResult:
    """Serve one query end to end; see the module docstring for the steps.

    *resort=False* suppresses the end-of-query bucket resort (temperatures
    still accumulate); the sorting ablation benchmark uses it.
    """
    if k is None:
        k = bundle.config.k
    if max_depth is None:
        max_depth = bundle.config.max_depth
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 1 <= max_depth <= MAX_EXPANSION_DEPTH:
        raise ValueError(f"max_depth must be in 1..{MAX_EXPANSION_DEPTH}")

    result = ContextResult(query=query)
    timing = result.timing_us
    clock = time.perf_counter_ns

    t0 = clock()
    query_vec = bundle.embedder.embed(query)
    t1 = clock()
    timing["embed"] = (t1 - t0) // 1000

    entities = recognize_query_entities(query, bundle.dictionary)
    result.entities = entities
    t2 = clock()
    timing["recognize"] = (t2 - t1) // 1000

    filt = bundle.filter
    initial: set[int] = set()
    for entity in entities:
        pair_ids = filt.lookup(entity)
        if pair_ids is not None:
            initial.update(pair_ids)
            filt.increment_temperature(entity)
    result.initial_abstracts = sorted(initial)
    t3 = clock()
    timing["lookup"] = (t3 - t2) // 1000

    if initial:
        expanded = bundle.forest.expand(initial, max_depth)
        candidates = bundle.forest.chunk_ids(expanded)
        result.expanded_abstracts = sorted(expanded)
        candidate_ids = np.fromiter(candidates, dtype=np.int64, count=len(candidates))
    else:
        # no recognized entity reached the filter: full-pool fallback
        result.fallback = True
        candidate_ids = np.arange(len(bundle.store), dtype=np.int64)
    result.candidate_count = int(candidate_ids.size)
    t4 = clock()
    timing["expand"] = (t4 - t3) // 1000

    result.selected_chunks = select_top_k(candidate_ids, query_vec, k, bundle.store)
    result.selected_abstracts = sorted(
        {cid // CHUNKS_PER_ABSTRACT for cid, _ in result.selected_chunks}
    )
    t5 = clock()
    timing["select"] = (t5 - t4) // 1000

    result.prompt = assemble_prompt(
        query,
        [bundle.store.texts[cid] for cid, _ in result.selected_chunks],
        [bundle.forest.abstracts[pid].summary for pid in result.selected_abstracts],
    )
    if resort:
        filt.resort_dirty_buckets()
    timing["total"] = (clock() - t0) // 1000
    return result
