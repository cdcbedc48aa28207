"""Entity index: a cuckoo filter whose slots carry retrieval payloads.

Each occupied slot stores a 12-bit fingerprint, the full 64-bit entity hash,
a 32-bit access temperature, and the head of a linked list of fixed-size
blocks holding the abstract pair ids the entity maps to. Two candidate
buckets per entity (partial-key XOR scheme, see hashing.bucket_indices),
four slots per bucket, random-walk eviction bounded by max_kicks, and
automatic doubling when an eviction chain is exhausted.

The full entity hash makes lookups exact (a fingerprint match is confirmed
against the hash before a payload is returned) and lets resize re-derive
both candidate buckets for every record. Raw fingerprint-only matching is
still available via fingerprint_probe() for false-positive measurement.

Temperatures order slots inside their bucket: buckets touched since the
last resort pass are remembered as dirty, and resort_dirty_buckets()
stable-sorts each one so hot entities are scanned first. Callers decide
when to resort (the retrieval layer does it at the end of each query).

Concurrency contract: concurrent lookups are safe with each other and with
temperature bumps; insert/delete/resize/resort are writer operations the
caller must serialize externally. This class takes no locks itself.
"""

from __future__ import annotations

import random
from array import array
from dataclasses import dataclass
from typing import Iterator, Literal

from .hashing import (
    FINGERPRINT_MASK,
    FP_HASH,
    bucket_indices_from_hash,
    fingerprint_from_hash,
    hash64,
)

SLOTS_PER_BUCKET = 4
BLOCK_CAPACITY = 3
TEMPERATURE_MAX = 0xFFFFFFFF

CREATED = "created"
APPENDED = "appended"
FAILED = "failed"

InsertOutcome = Literal["created", "appended", "failed"]

# array typecodes assumed 2/4/8 bytes; checked once at import
assert array("H").itemsize == 2 and array("I").itemsize == 4 and array("Q").itemsize == 8


class CapacityError(RuntimeError):
    """Raised when the table cannot hold its records even after doubling."""


class BlockNode:
    """One block of up to BLOCK_CAPACITY pair ids; occupied slots contiguous."""

    __slots__ = ("pair_ids", "next")

    def __init__(self) -> None:
        self.pair_ids: list[int] = []
        self.next: BlockNode | None = None


class BlockList:
    """Head/tail bookkeeping for a slot's chain of BlockNodes.

    Tracks the largest pair id seen so the common case (ids appended in
    ascending order, as the index builder does) dedups without walking.
    """

    __slots__ = ("head", "tail", "size", "max_pair")

    def __init__(self) -> None:
        self.head = BlockNode()
        self.tail = self.head
        self.size = 0
        self.max_pair = -1

    def append(self, pair_id: int) -> bool:
        """Add *pair_id* unless already present; returns True if added."""
        if pair_id <= self.max_pair:
            node: BlockNode | None = self.head
            while node is not None:
                if pair_id in node.pair_ids:
                    return False
                node = node.next
        else:
            self.max_pair = pair_id
        tail = self.tail
        if len(tail.pair_ids) == BLOCK_CAPACITY:
            tail = BlockNode()
            self.tail.next = tail
            self.tail = tail
        tail.pair_ids.append(pair_id)
        self.size += 1
        return True

    def pair_ids(self) -> list[int]:
        out: list[int] = []
        node: BlockNode | None = self.head
        while node is not None:
            out.extend(node.pair_ids)
            node = node.next
        return out

    def node_count(self) -> int:
        count = 0
        node: BlockNode | None = self.head
        while node is not None:
            count += 1
            node = node.next
        return count

    @classmethod
    def from_pair_ids(cls, pair_ids: list[int]) -> "BlockList":
        """Rebuild a chain from a flat id list (distinct ids assumed)."""
        bl = cls()
        for i in range(0, len(pair_ids), BLOCK_CAPACITY):
            if bl.head.pair_ids:
                node = BlockNode()
                bl.tail.next = node
                bl.tail = node
            bl.tail.pair_ids.extend(pair_ids[i : i + BLOCK_CAPACITY])
        bl.size = len(pair_ids)
        bl.max_pair = max(pair_ids, default=-1)
        return bl


@dataclass
class FilterStats:
    bucket_count: int
    slot_count: int
    occupied_slots: int
    load_factor: float
    kick_count: int
    resize_count: int
    failed_insert_count: int
    load_at_first_resize: float | None
    stash_occupied: bool

    def to_dict(self) -> dict:
        return {
            "bucket_count": self.bucket_count,
            "slot_count": self.slot_count,
            "occupied_slots": self.occupied_slots,
            "load_factor": self.load_factor,
            "kick_count": self.kick_count,
            "resize_count": self.resize_count,
            "failed_insert_count": self.failed_insert_count,
            "load_at_first_resize": self.load_at_first_resize,
            "stash_occupied": self.stash_occupied,
        }


# a record travels as [fingerprint, temperature, entity_hash, BlockList]
_FP, _TEMP, _HASH, _BLOCKS = range(4)


class CuckooIndex:
    """Cuckoo filter mapping entity strings to sets of abstract pair ids."""

    def __init__(self, bucket_count: int = 1024, max_kicks: int = 500, rng_seed: int = 0):
        if bucket_count <= 0 or bucket_count & (bucket_count - 1):
            raise ValueError(f"bucket_count must be a power of two, got {bucket_count}")
        if max_kicks < 1:
            raise ValueError("max_kicks must be >= 1")
        self.max_kicks = max_kicks
        self._rng = random.Random(rng_seed)
        self.kick_count = 0
        self.resize_count = 0
        self.failed_insert_count = 0
        self.load_at_first_resize: float | None = None
        self._stash: list | None = None  # one homeless record
        self._dirty: set[int] = set()
        self._init_table(bucket_count)

    def _init_table(self, bucket_count: int) -> None:
        n = bucket_count * SLOTS_PER_BUCKET
        try:
            self._fps = array("H", bytes(2 * n))
            self._temps = array("I", bytes(4 * n))
            self._hashes = array("Q", bytes(8 * n))
            self._blocks: list[BlockList | None] = [None] * n
        except MemoryError as exc:
            raise CapacityError(f"cannot allocate table of {bucket_count} buckets") from exc
        self.bucket_count = bucket_count
        self._mask = bucket_count - 1
        self.occupied = 0

    # -- basic probes ------------------------------------------------------

    def _candidate_buckets(self, h: int, fp: int) -> tuple[int, int]:
        mask = self._mask
        i1 = h & mask
        return i1, i1 ^ (FP_HASH[fp] & mask)

    def _find_slot(self, h: int, fp: int) -> int:
        """Slot index holding (fp, h), or -1. Scans i1 then i2 in slot order."""
        i1, i2 = self._candidate_buckets(h, fp)
        fps = self._fps
        hashes = self._hashes
        base = i1 * SLOTS_PER_BUCKET
        for s in range(base, base + SLOTS_PER_BUCKET):
            if fps[s] == fp and hashes[s] == h:
                return s
        if i2 != i1:
            base = i2 * SLOTS_PER_BUCKET
            for s in range(base, base + SLOTS_PER_BUCKET):
                if fps[s] == fp and hashes[s] == h:
                    return s
        return -1

    def _stash_matches(self, h: int, fp: int) -> bool:
        st = self._stash
        return st is not None and st[_FP] == fp and st[_HASH] == h

    def lookup(self, entity: str) -> list[int] | None:
        """Pair ids for *entity*, or None when absent.

        A fingerprint match alone is not enough; the stored 64-bit entity
        hash must also match before the payload is returned.
        """
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            blocks = self._blocks[s]
            return blocks.pair_ids() if blocks is not None else []
        if self._stash_matches(h, fp):
            return self._stash[_BLOCKS].pair_ids()
        return None

    def fingerprint_probe(self, entity: str) -> bool:
        """Membership by fingerprint alone, ignoring the stored entity hash.

        This is the raw filter answer whose false-positive rate the
        benchmark reports.
        """
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        i1, i2 = self._candidate_buckets(h, fp)
        fps = self._fps
        base = i1 * SLOTS_PER_BUCKET
        for s in range(base, base + SLOTS_PER_BUCKET):
            if fps[s] == fp:
                return True
        if i2 != i1:
            base = i2 * SLOTS_PER_BUCKET
            for s in range(base, base + SLOTS_PER_BUCKET):
                if fps[s] == fp:
                    return True
        st = self._stash
        return st is not None and st[_FP] == fp

    def contains(self, entity: str) -> bool:
        return self.lookup(entity) is not None

    # -- insertion ---------------------------------------------------------

    def insert(self, entity: str, pair_id: int) -> InsertOutcome:
        """Map *entity* to *pair_id*.

        Returns "appended" when the entity already had a slot (the id joins
        its block list, duplicates ignored), "created" when a new slot was
        claimed, possibly after eviction and one automatic resize, and
        "failed" when even the resize could not place the record.
        """
        if not entity:
            raise ValueError("entity must be a non-empty string")
        if pair_id < 0:
            raise ValueError("pair_id must be >= 0")
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            self._blocks[s].append(pair_id)
            return APPENDED
        if self._stash_matches(h, fp):
            self._stash[_BLOCKS].append(pair_id)
            return APPENDED
        blocks = BlockList()
        blocks.append(pair_id)
        leftover = self._place([fp, 0, h, blocks])
        if leftover is None:
            return CREATED
        # eviction chain exhausted: stash the homeless record, double the
        # table (which re-places everything including the stash), and see
        # whether that settled it
        self._stash = leftover
        self.resize()
        if self._stash is not None:
            self.failed_insert_count += 1
            return FAILED
        return CREATED

    def _try_bucket(self, bucket: int, record: list) -> bool:
        base = bucket * SLOTS_PER_BUCKET
        fps = self._fps
        for s in range(base, base + SLOTS_PER_BUCKET):
            if fps[s] == 0:
                self._write_slot(s, record)
                self.occupied += 1
                self._dirty.add(bucket)
                return True
        return False

    def _write_slot(self, s: int, record: list) -> None:
        self._fps[s] = record[_FP]
        self._temps[s] = record[_TEMP]
        self._hashes[s] = record[_HASH]
        self._blocks[s] = record[_BLOCKS]

    def _read_slot(self, s: int) -> list:
        return [self._fps[s], self._temps[s], self._hashes[s], self._blocks[s]]

    def _clear_slot(self, s: int) -> None:
        self._fps[s] = 0
        self._temps[s] = 0
        self._hashes[s] = 0
        self._blocks[s] = None

    def _place(self, record: list) -> list | None:
        """Home *record*, evicting if needed. Returns the homeless record
        when the kick chain exceeds max_kicks, else None."""
        mask = self._mask
        i1, i2 = self._candidate_buckets(record[_HASH], record[_FP])
        if self._try_bucket(i1, record) or (i2 != i1 and self._try_bucket(i2, record)):
            return None
        rng = self._rng
        i = i1 if rng.getrandbits(1) else i2
        current = record
        for _ in range(self.max_kicks):
            # swap with a random occupant of bucket i, then chase the
            # occupant to its alternate bucket
            s = i * SLOTS_PER_BUCKET + rng.randrange(SLOTS_PER_BUCKET)
            evicted = self._read_slot(s)
            self._write_slot(s, current)
            self._dirty.add(i)
            self.kick_count += 1
            current = evicted
            i ^= FP_HASH[current[_FP]] & mask
            if self._try_bucket(i, current):
                return None
        return current

    # -- deletion ----------------------------------------------------------

    def delete(self, entity: str) -> bool:
        """Remove the entity and its whole block list; True if present."""
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            self._clear_slot(s)
            self.occupied -= 1
            self._dirty.add(s // SLOTS_PER_BUCKET)
            return True
        if self._stash_matches(h, fp):
            self._stash = None
            return True
        return False

    # -- temperatures ------------------------------------------------------

    def increment_temperature(self, entity: str) -> bool:
        """Bump the access counter (saturating); marks the bucket dirty."""
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            t = self._temps[s]
            if t < TEMPERATURE_MAX:
                self._temps[s] = t + 1
            self._dirty.add(s // SLOTS_PER_BUCKET)
            return True
        if self._stash_matches(h, fp):
            st = self._stash
            if st[_TEMP] < TEMPERATURE_MAX:
                st[_TEMP] += 1
            return True
        return False

    def temperature_of(self, entity: str) -> int | None:
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            return self._temps[s]
        if self._stash_matches(h, fp):
            return self._stash[_TEMP]
        return None

    def resort_dirty_buckets(self) -> int:
        """Reorder every dirty bucket; returns how many were processed.

        Occupied slots are stable-sorted by descending temperature and
        compacted ahead of empty slots; fingerprint, hash, temperature, and
        block list move together.
        """
        dirty = sorted(self._dirty)
        self._dirty.clear()
        for bucket in dirty:
            self._resort_bucket(bucket)
        return len(dirty)

    def _resort_bucket(self, bucket: int) -> None:
        base = bucket * SLOTS_PER_BUCKET
        fps = self._fps
        records = [
            self._read_slot(s) for s in range(base, base + SLOTS_PER_BUCKET) if fps[s]
        ]
        records.sort(key=lambda r: r[_TEMP], reverse=True)  # list.sort is stable
        for offset, record in enumerate(records):
            self._write_slot(base + offset, record)
        for offset in range(len(records), SLOTS_PER_BUCKET):
            self._clear_slot(base + offset)

    # -- resize ------------------------------------------------------------

    def resize(self) -> None:
        """Double the bucket count and re-place every record.

        Candidate buckets are recomputed from each record's stored entity
        hash; fingerprints, temperatures, and block lists are preserved.
        The stash is drained into the table. All buckets end resorted.
        """
        if self.resize_count == 0:
            self.load_at_first_resize = self.load_factor()
        self.resize_count += 1
        records = [self._read_slot(s) for s in range(len(self._fps)) if self._fps[s]]
        if self._stash is not None:
            records.append(self._stash)
            self._stash = None
        self._init_table(self.bucket_count * 2)
        self._dirty.clear()
        homeless: list[list] = []
        for record in records:
            leftover = self._place(record)
            if leftover is not None:
                homeless.append(leftover)
        for record in homeless:
            leftover = self._place(record)
            if leftover is not None:
                if self._stash is None:
                    self._stash = leftover
                else:
                    raise CapacityError(
                        "multiple records unplaceable after doubling; table corrupt"
                    )
        self._resort_all()

    def _resort_all(self) -> None:
        for bucket in range(self.bucket_count):
            self._resort_bucket(bucket)
        self._dirty.clear()

    # -- introspection -----------------------------------------------------

    def load_factor(self) -> float:
        return self.occupied / (self.bucket_count * SLOTS_PER_BUCKET)

    def stats(self) -> FilterStats:
        return FilterStats(
            bucket_count=self.bucket_count,
            slot_count=self.bucket_count * SLOTS_PER_BUCKET,
            occupied_slots=self.occupied,
            load_factor=self.load_factor(),
            kick_count=self.kick_count,
            resize_count=self.resize_count,
            failed_insert_count=self.failed_insert_count,
            load_at_first_resize=self.load_at_first_resize,
            stash_occupied=self._stash is not None,
        )

    def block_node_count(self, entity: str) -> int | None:
        """Number of block nodes backing the entity's pair-id list."""
        h = hash64(entity)
        fp = fingerprint_from_hash(h)
        s = self._find_slot(h, fp)
        if s >= 0:
            blocks = self._blocks[s]
            return blocks.node_count() if blocks is not None else 0
        if self._stash_matches(h, fp):
            return self._stash[_BLOCKS].node_count()
        return None

    def iter_slots(self) -> Iterator[tuple[int, int, int, int, list[int]]]:
        """Yield (bucket, fingerprint, temperature, entity_hash, pair_ids)
        for every slot in slot order; empty slots yield zeros and []."""
        for s in range(len(self._fps)):
            blocks = self._blocks[s]
            yield (
                s // SLOTS_PER_BUCKET,
                self._fps[s],
                self._temps[s],
                self._hashes[s],
                blocks.pair_ids() if blocks is not None else [],
            )

    @property
    def stash_occupied(self) -> bool:
        return self._stash is not None

    def candidate_buckets_of_hash(self, h: int, fp: int) -> tuple[int, int]:
        """Candidate buckets under the current table size (for audits)."""
        return bucket_indices_from_hash(h, fp, self.bucket_count)

    # -- slot-level (de)serialization helpers ------------------------------

    def export_slots(self) -> list[tuple[int, int, int, list[int]]]:
        """(fingerprint, temperature, entity_hash, pair_ids) per slot, in
        slot order, including empty slots. Refuses while the stash holds a
        record, because a stashed record has no slot to round-trip through."""
        if self._stash is not None:
            raise CapacityError("cannot serialize while the overflow stash is occupied")
        out = []
        for s in range(len(self._fps)):
            blocks = self._blocks[s]
            out.append(
                (
                    self._fps[s],
                    self._temps[s],
                    self._hashes[s],
                    blocks.pair_ids() if blocks is not None else [],
                )
            )
        return out

    @classmethod
    def from_slots(
        cls,
        bucket_count: int,
        slots: list[tuple[int, int, int, list[int]]],
        max_kicks: int = 500,
        rng_seed: int = 0,
    ) -> "CuckooIndex":
        """Rebuild a filter from export_slots() output; slot order is kept
        exactly, block lists are re-chunked into 3-ary nodes."""
        if len(slots) != bucket_count * SLOTS_PER_BUCKET:
            raise ValueError("slot list length does not match bucket_count")
        filt = cls(bucket_count=bucket_count, max_kicks=max_kicks, rng_seed=rng_seed)
        occupied = 0
        for s, (fp, temp, h, pair_ids) in enumerate(slots):
            if fp == 0:
                continue
            if not 0 < fp <= FINGERPRINT_MASK:
                raise ValueError(f"slot {s}: fingerprint {fp} out of range")
            filt._fps[s] = fp
            filt._temps[s] = temp
            filt._hashes[s] = h
            filt._blocks[s] = BlockList.from_pair_ids(list(pair_ids))
            occupied += 1
        filt.occupied = occupied
        return filt
