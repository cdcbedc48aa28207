"""Binary index file: header, then four CRC-guarded segments.

Layout (all integers little-endian):

    magic "BRGX" | u16 format version | u32 len | canonical-JSON config

then segments in fixed order, each framed as

    4-byte tag | u64 payload length | payload | u32 CRC32(payload)

  CHNK  u32 chunk_count, u32 dim, per chunk u32-length-prefixed UTF-8
        text, then the raw float32 embedding matrix
  FRST  u32 abstract_count, per abstract: u32 pair_id, i64 parent (-1 =
        none), u32 child_count, u32 children[] (sorted), u32-length-
        prefixed UTF-8 summary
  FLTR  inner magic "BRGF", u16 version, u32 bucket_count, then per slot:
        u16 fingerprint, u32 temperature, u64 entity_hash, u32 pair id
        count, u32 pair_ids[]
  DICT  u32 entry_count, per entry u32-length-prefixed UTF-8 entity and
        u64 occurrence count, sorted by entity

Saving an identical bundle always produces identical bytes: the config
echo is canonical JSON, children and dictionary entries are sorted, and
filter slots are written in slot order.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from typing import BinaryIO

import numpy as np

from .config import CHUNKS_PER_ABSTRACT, Config
from .cuckoo import SLOTS_PER_BUCKET, CuckooIndex
from .embed import HashingEmbedder
from .forest import Abstract, Forest
from .ingest import ChunkStore, EntityDictionary, IndexBundle

MAGIC = b"BRGX"
FORMAT_VERSION = 1
FILTER_MAGIC = b"BRGF"
FILTER_VERSION = 1
_SEGMENT_ORDER = (b"CHNK", b"FRST", b"FLTR", b"DICT")


class CorruptIndexError(RuntimeError):
    """The index file is malformed or fails its CRC checks."""


# -- writing ---------------------------------------------------------------------


def _pack_str(out: bytearray, text: str) -> None:
    data = text.encode("utf-8")
    out += struct.pack("<I", len(data))
    out += data


def _chunk_payload(store: ChunkStore) -> bytes:
    out = bytearray(struct.pack("<II", len(store), store.dim))
    for text in store.texts:
        _pack_str(out, text)
    out += store.embeddings.astype("<f4", copy=False).tobytes()
    return bytes(out)


def _forest_payload(forest: Forest) -> bytes:
    out = bytearray(struct.pack("<I", len(forest)))
    for a in forest.abstracts:
        parent = -1 if a.parent is None else a.parent
        children = sorted(a.children)
        out += struct.pack("<IqI", a.pair_id, parent, len(children))
        out += struct.pack(f"<{len(children)}I", *children) if children else b""
        _pack_str(out, a.summary)
    return bytes(out)


def _filter_payload(filt: CuckooIndex) -> bytes:
    slots = filt.export_slots()  # raises while the stash is occupied
    out = bytearray(FILTER_MAGIC + struct.pack("<HI", FILTER_VERSION, filt.bucket_count))
    for fp, temp, entity_hash, pair_ids in slots:
        out += struct.pack("<HIQI", fp, temp, entity_hash, len(pair_ids))
        out += struct.pack(f"<{len(pair_ids)}I", *pair_ids) if pair_ids else b""
    return bytes(out)


def _dictionary_payload(dictionary: EntityDictionary) -> bytes:
    counts = dictionary.counts()
    out = bytearray(struct.pack("<I", len(counts)))
    for entity in sorted(counts):
        _pack_str(out, entity)
        out += struct.pack("<Q", counts[entity])
    return bytes(out)


def save_index(bundle: IndexBundle, path: str) -> None:
    """Serialize the bundle; output bytes are a pure function of content."""
    bundle.config.validate()
    config_json = json.dumps(
        bundle.config.to_dict(), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    payloads = {
        b"CHNK": _chunk_payload(bundle.store),
        b"FRST": _forest_payload(bundle.forest),
        b"FLTR": _filter_payload(bundle.filter),
        b"DICT": _dictionary_payload(bundle.dictionary),
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(config_json)))
        fh.write(config_json)
        for tag in _SEGMENT_ORDER:
            payload = payloads[tag]
            fh.write(tag)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)
            fh.write(struct.pack("<I", zlib.crc32(payload)))


# -- reading ---------------------------------------------------------------------


class _Reader:
    def __init__(self, data: bytes, context: str):
        self.data = data
        self.pos = 0
        self.context = context

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptIndexError(f"{self.context}: truncated at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptIndexError(f"{self.context}: bad UTF-8: {exc}") from exc

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise CorruptIndexError(
                f"{self.context}: {len(self.data) - self.pos} trailing bytes"
            )


def _read_segments(fh: BinaryIO, path: str) -> tuple[Config, dict[bytes, bytes]]:
    head = fh.read(4)
    if head != MAGIC:
        raise CorruptIndexError(f"{path}: bad magic {head!r}")
    raw = fh.read(2)
    if len(raw) != 2:
        raise CorruptIndexError(f"{path}: truncated header")
    (version,) = struct.unpack("<H", raw)
    if version != FORMAT_VERSION:
        raise CorruptIndexError(f"{path}: unsupported format version {version}")
    raw = fh.read(4)
    if len(raw) != 4:
        raise CorruptIndexError(f"{path}: truncated header")
    (cfg_len,) = struct.unpack("<I", raw)
    cfg_raw = fh.read(cfg_len)
    if len(cfg_raw) != cfg_len:
        raise CorruptIndexError(f"{path}: truncated config")
    try:
        config = Config.from_dict(json.loads(cfg_raw))
    except (ValueError, TypeError) as exc:
        raise CorruptIndexError(f"{path}: bad config echo: {exc}") from exc
    segments: dict[bytes, bytes] = {}
    for expected_tag in _SEGMENT_ORDER:
        tag = fh.read(4)
        if tag != expected_tag:
            raise CorruptIndexError(f"{path}: expected segment {expected_tag!r}, got {tag!r}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise CorruptIndexError(f"{path}: truncated segment header")
        (length,) = struct.unpack("<Q", raw)
        payload = fh.read(length)
        if len(payload) != length:
            raise CorruptIndexError(f"{path}: truncated segment {tag!r}")
        raw = fh.read(4)
        if len(raw) != 4:
            raise CorruptIndexError(f"{path}: missing CRC for segment {tag!r}")
        (crc,) = struct.unpack("<I", raw)
        if zlib.crc32(payload) != crc:
            raise CorruptIndexError(f"{path}: CRC mismatch in segment {tag.decode()}")
        segments[tag] = payload
    if fh.read(1):
        raise CorruptIndexError(f"{path}: trailing bytes after last segment")
    return config, segments


def load_index(path: str, embedder=None) -> IndexBundle:
    """Load an index file; CRC or structure problems raise
    CorruptIndexError. *embedder* overrides the default query embedder."""
    with open(path, "rb") as fh:
        config, segments = _read_segments(fh, path)

    r = _Reader(segments[b"CHNK"], f"{path}:CHNK")
    chunk_count, dim = r.unpack("<II")
    if dim != config.embed_dim:
        raise CorruptIndexError(f"{path}: dim {dim} does not match config {config.embed_dim}")
    texts = [r.take_str() for _ in range(chunk_count)]
    matrix = np.frombuffer(r.take(4 * chunk_count * dim), dtype="<f4")
    matrix = matrix.reshape(chunk_count, dim).copy()
    r.expect_end()
    store = ChunkStore(texts, matrix)

    r = _Reader(segments[b"FRST"], f"{path}:FRST")
    (abstract_count,) = r.unpack("<I")
    abstracts = []
    for i in range(abstract_count):
        pair_id, parent, child_count = r.unpack("<IqI")
        if pair_id != i:
            raise CorruptIndexError(f"{path}: abstract {i} has pair_id {pair_id}")
        children = set(r.unpack(f"<{child_count}I")) if child_count else set()
        summary = r.take_str()
        first = pair_id * CHUNKS_PER_ABSTRACT
        last = min(first + CHUNKS_PER_ABSTRACT - 1, chunk_count - 1)
        abstracts.append(
            Abstract(
                pair_id=pair_id,
                summary=summary,
                first_chunk=first,
                last_chunk=last,
                parent=None if parent == -1 else int(parent),
                children=children,
            )
        )
    r.expect_end()
    forest = Forest(abstracts)

    r = _Reader(segments[b"FLTR"], f"{path}:FLTR")
    if r.take(4) != FILTER_MAGIC:
        raise CorruptIndexError(f"{path}: bad filter magic")
    filter_version, bucket_count = r.unpack("<HI")
    if filter_version != FILTER_VERSION:
        raise CorruptIndexError(f"{path}: unsupported filter version {filter_version}")
    if bucket_count <= 0 or bucket_count & (bucket_count - 1):
        raise CorruptIndexError(f"{path}: bucket_count {bucket_count} not a power of two")
    slots = []
    for _ in range(bucket_count * SLOTS_PER_BUCKET):
        fp, temp, entity_hash, n_ids = r.unpack("<HIQI")
        pair_ids = list(r.unpack(f"<{n_ids}I")) if n_ids else []
        slots.append((fp, temp, entity_hash, pair_ids))
    r.expect_end()
    try:
        filt = CuckooIndex.from_slots(
            bucket_count, slots, max_kicks=config.max_kicks, rng_seed=config.rng_seed
        )
    except ValueError as exc:
        raise CorruptIndexError(f"{path}: {exc}") from exc

    r = _Reader(segments[b"DICT"], f"{path}:DICT")
    (entry_count,) = r.unpack("<I")
    counts: dict[str, int] = {}
    for _ in range(entry_count):
        entity = r.take_str()
        (count,) = r.unpack("<Q")
        counts[entity] = count
    r.expect_end()
    try:
        dictionary = EntityDictionary(counts)
    except ValueError as exc:
        raise CorruptIndexError(f"{path}: {exc}") from exc

    return IndexBundle(
        store=store,
        forest=forest,
        filter=filt,
        dictionary=dictionary,
        config=config,
        embedder=embedder or HashingEmbedder(config.embed_dim),
    )
