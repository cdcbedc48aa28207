"""chunkbridge: entity-indexed retrieval over a forest of chunk abstracts.

Build an index from a corpus (build_index), persist it (save_index /
load_index), and serve queries (retrieve_context). The engine recognizes
dictionary entities in the query, looks them up in a cuckoo filter whose
slots map entities to abstract groups of chunks, expands the hit abstracts
through a concept forest, and ranks only the candidate chunks, assembling
a ready-to-use prompt. A naive full-scan baseline and a benchmark harness
live in chunkbridge.bench.
"""

from .bench import (
    BenchReport,
    FalseNegativeError,
    measure_fpr,
    naive_retrieve,
    run_ablation,
    run_speed_comparison,
)
from .config import Config
from .cuckoo import CapacityError, CuckooIndex, FilterStats
from .embed import EmbeddingError, HashingEmbedder, RemoteEmbedder, cosine_similarity
from .forest import (
    Abstract,
    Forest,
    RelationEdge,
    assemble_forest,
    build_abstracts,
    filter_relations,
)
from .indexfile import CorruptIndexError, load_index, save_index
from .ingest import (
    BuildError,
    ChunkStore,
    CorpusDocument,
    EntityDictionary,
    IndexBundle,
    InputFormatError,
    build_index,
    chunk_document,
    extract_entities,
    extract_relations,
    read_corpus_jsonl,
    read_entities_jsonl,
    read_relations_tsv,
)
from .retrieve import (
    ContextResult,
    assemble_prompt,
    recognize_query_entities,
    retrieve_context,
    select_top_k,
)

__version__ = "0.1.0"

__all__ = [
    "Abstract",
    "BenchReport",
    "BuildError",
    "CapacityError",
    "ChunkStore",
    "Config",
    "ContextResult",
    "CorpusDocument",
    "CorruptIndexError",
    "CuckooIndex",
    "EmbeddingError",
    "EntityDictionary",
    "FalseNegativeError",
    "FilterStats",
    "Forest",
    "HashingEmbedder",
    "IndexBundle",
    "InputFormatError",
    "RelationEdge",
    "RemoteEmbedder",
    "assemble_forest",
    "assemble_prompt",
    "build_abstracts",
    "build_index",
    "chunk_document",
    "cosine_similarity",
    "extract_entities",
    "extract_relations",
    "filter_relations",
    "load_index",
    "measure_fpr",
    "naive_retrieve",
    "read_corpus_jsonl",
    "read_entities_jsonl",
    "read_relations_tsv",
    "recognize_query_entities",
    "retrieve_context",
    "run_ablation",
    "run_speed_comparison",
    "save_index",
    "select_top_k",
    "__version__",
]
