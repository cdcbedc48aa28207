"""Cuckoo index behaviour against a shadow-map oracle.

The oracle is a plain dict mapping entity -> ordered deduplicated pair-id
list; every filter operation is mirrored there and lookups must agree
exactly, across evictions and resizes.
"""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chunkbridge.cuckoo import (
    BLOCK_CAPACITY,
    SLOTS_PER_BUCKET,
    TEMPERATURE_MAX,
    BlockList,
    CapacityError,
    CuckooIndex,
)
from chunkbridge.hashing import fingerprint_of, hash64

# -- block lists -----------------------------------------------------------


def test_block_list_append_and_dedup():
    bl = BlockList()
    assert bl.append(3) is True
    assert bl.append(3) is False
    assert bl.append(7) is True
    assert bl.append(5) is True  # out-of-order id still deduplicated by scan
    assert bl.append(5) is False
    assert bl.pair_ids() == [3, 7, 5]
    assert bl.size == 3


@pytest.mark.parametrize("m", range(1, 31))
def test_block_node_count_law(m):
    bl = BlockList.from_pair_ids(list(range(m)))
    assert bl.node_count() == math.ceil(m / BLOCK_CAPACITY)
    assert bl.pair_ids() == list(range(m))


def test_block_list_node_count_via_filter():
    filt = CuckooIndex(bucket_count=8)
    for m in range(1, 31):
        entity = f"entity {m}"
        for pid in range(m):
            filt.insert(entity, pid)
        assert filt.block_node_count(entity) == math.ceil(m / BLOCK_CAPACITY)
        assert filt.lookup(entity) == list(range(m))
        filt.delete(entity)


# -- insert / lookup / delete against the shadow map ------------------------


def _apply(filt, model, op, entity, pid):
    if op == "insert":
        outcome = filt.insert(entity, pid)
        if entity in model:
            assert outcome == "appended"
            if pid not in model[entity]:
                model[entity].append(pid)
        else:
            assert outcome == "created"
            model[entity] = [pid]
    elif op == "delete":
        removed = filt.delete(entity)
        assert removed == (entity in model)
        model.pop(entity, None)


@given(
    st.lists(
        st.tuples(
            st.sampled_from(["insert", "insert", "insert", "delete"]),
            st.integers(min_value=0, max_value=24),
            st.integers(min_value=0, max_value=50),
        ),
        max_size=120,
    )
)
@settings(max_examples=60, deadline=None)
def test_shadow_map_property(ops):
    filt = CuckooIndex(bucket_count=4, max_kicks=50, rng_seed=7)
    model: dict[str, list[int]] = {}
    names = [f"name {i}" for i in range(25)]
    for op, ei, pid in ops:
        _apply(filt, model, op, names[ei], pid)
    for name in names:
        assert filt.lookup(name) == model.get(name)
    assert filt.occupied == len(model) or filt.stash_occupied
    probe_hits = sum(filt.fingerprint_probe(n) for n in model)
    assert probe_hits == len(model)  # members always probe positive


def test_insert_outcomes_and_validation():
    filt = CuckooIndex(bucket_count=8)
    assert filt.insert("alpha", 1) == "created"
    assert filt.insert("alpha", 2) == "appended"
    assert filt.insert("alpha", 2) == "appended"
    assert filt.lookup("alpha") == [1, 2]
    with pytest.raises(ValueError):
        filt.insert("", 1)
    with pytest.raises(ValueError):
        filt.insert("alpha", -1)


def test_lookup_and_delete_missing():
    filt = CuckooIndex(bucket_count=8)
    assert filt.lookup("ghost") is None
    assert filt.delete("ghost") is False
    assert filt.temperature_of("ghost") is None


# -- resize ------------------------------------------------------------------


def test_fill_until_resize_preserves_everything():
    filt = CuckooIndex(bucket_count=4, max_kicks=500, rng_seed=3)
    inserted: dict[str, list[int]] = {}
    i = 0
    while filt.stats().resize_count == 0:
        name = f"word{i}"
        filt.insert(name, i)
        filt.insert(name, i + 1)
        inserted[name] = [i, i + 1]
        i += 1
        assert i < 10_000
    stats = filt.stats()
    assert stats.bucket_count == 8
    assert stats.load_at_first_resize is not None
    assert 0.0 < stats.load_at_first_resize <= 1.0
    for name, pids in inserted.items():
        assert filt.lookup(name) == pids


def test_manual_resize_preserves_payloads_and_temperatures():
    filt = CuckooIndex(bucket_count=8, rng_seed=1)
    for i in range(20):
        filt.insert(f"item {i}", i)
    for i in range(0, 20, 3):
        filt.increment_temperature(f"item {i}")
        filt.increment_temperature(f"item {i}")
    before = {f"item {i}": (filt.lookup(f"item {i}"), filt.temperature_of(f"item {i}")) for i in range(20)}
    filt.resize()
    assert filt.bucket_count == 16
    for name, (pids, temp) in before.items():
        assert filt.lookup(name) == pids
        assert filt.temperature_of(name) == temp


def test_partial_key_audit_after_resizes():
    # Every occupied slot must sit in one of the two buckets derivable
    # from its stored hash and fingerprint, even after displacement and
    # table doubling.
    filt = CuckooIndex(bucket_count=4, max_kicks=100, rng_seed=9)
    for i in range(120):
        filt.insert(f"audit {i}", i)
    assert filt.stats().resize_count >= 1
    seen = 0
    for bucket, fp, _temp, h, pair_ids in filt.iter_slots():
        if fp == 0:
            continue
        seen += 1
        assert bucket in filt.candidate_buckets_of_hash(h, fp)
        assert pair_ids  # occupied slots carry at least one pair id
    assert seen == filt.occupied


# -- temperatures and bucket resorting ---------------------------------------


def test_temperature_increment_and_saturation():
    filt = CuckooIndex(bucket_count=8)
    filt.insert("hot", 1)
    assert filt.temperature_of("hot") == 0
    assert filt.increment_temperature("hot") is True
    assert filt.increment_temperature("hot") is True
    assert filt.temperature_of("hot") == 2
    assert filt.increment_temperature("cold") is False
    # saturation at the 32-bit ceiling
    slots = filt.export_slots()
    slots = [
        (fp, TEMPERATURE_MAX if fp else temp, h, pids)
        for fp, temp, h, pids in slots
    ]
    filt2 = CuckooIndex.from_slots(8, slots)
    assert filt2.temperature_of("hot") == TEMPERATURE_MAX
    filt2.increment_temperature("hot")
    assert filt2.temperature_of("hot") == TEMPERATURE_MAX


def test_resort_orders_buckets_by_temperature():
    filt = CuckooIndex(bucket_count=4, rng_seed=2)
    rng = random.Random(5)
    names = [f"w{i}" for i in range(14)]
    for i, name in enumerate(names):
        filt.insert(name, i)
    for name in names:
        for _ in range(rng.randrange(0, 6)):
            filt.increment_temperature(name)
    touched = filt.resort_dirty_buckets()
    assert touched > 0
    assert filt.resort_dirty_buckets() == 0  # dirty set drained
    per_bucket: dict[int, list[tuple[int, int]]] = {}
    for bucket, fp, temp, _h, _pids in filt.iter_slots():
        per_bucket.setdefault(bucket, []).append((fp, temp))
    for slots in per_bucket.values():
        occupied = [t for fp, t in slots if fp != 0]
        empties_after = [fp for fp, _ in slots[len(occupied):]]
        assert all(fp == 0 for fp in empties_after)  # occupied form a prefix
        assert occupied == sorted(occupied, reverse=True)
    # membership unchanged by resorting
    for i, name in enumerate(names):
        assert filt.lookup(name) == [i]


def test_resort_is_stable_for_ties():
    filt = CuckooIndex(bucket_count=1, rng_seed=0)
    # single bucket: four records, all temperature zero; order must survive
    names = []
    for i in range(4):
        name = f"tie {i}"
        if filt.insert(name, i) == "created" and filt.bucket_count == 1:
            names.append(name)
    before = [row[1] for row in filt.iter_slots()][: len(names)]
    filt._dirty.add(0)
    filt.resort_dirty_buckets()
    after = [row[1] for row in filt.iter_slots()][: len(names)]
    assert before == after


# -- stash semantics ----------------------------------------------------------


def _make_stashed(filt, entity, pair_ids):
    h = hash64(entity.encode("utf-8"))
    blocks = BlockList()
    for pid in pair_ids:
        blocks.append(pid)
    filt._stash = [fingerprint_of(entity), 0, h, blocks]


def test_stash_is_consulted_by_lookup_delete_and_temperature():
    filt = CuckooIndex(bucket_count=4)
    filt.insert("resident", 9)
    _make_stashed(filt, "overflow entry", [1, 2])
    assert filt.stash_occupied
    assert filt.lookup("overflow entry") == [1, 2]
    assert filt.fingerprint_probe("overflow entry") is True
    assert filt.insert("overflow entry", 3) == "appended"
    assert filt.lookup("overflow entry") == [1, 2, 3]
    assert filt.increment_temperature("overflow entry") is True
    assert filt.temperature_of("overflow entry") == 1
    with pytest.raises(CapacityError):
        filt.export_slots()
    assert filt.delete("overflow entry") is True
    assert not filt.stash_occupied
    assert filt.lookup("overflow entry") is None
    filt.export_slots()  # fine once the stash is clear


# -- slot-level round trip -----------------------------------------------------


def test_export_from_slots_roundtrip():
    filt = CuckooIndex(bucket_count=8, rng_seed=4)
    for i in range(25):
        filt.insert(f"rt {i}", i)
        filt.insert(f"rt {i}", 100 + i)
    filt.increment_temperature("rt 3")
    slots = filt.export_slots()
    clone = CuckooIndex.from_slots(8, slots, max_kicks=500, rng_seed=4)
    assert clone.export_slots() == slots
    assert clone.occupied == filt.occupied
    for i in range(25):
        assert clone.lookup(f"rt {i}") == [i, 100 + i]
    assert clone.temperature_of("rt 3") == 1


def test_from_slots_validation():
    with pytest.raises(ValueError):
        CuckooIndex.from_slots(8, [])
    bad = [(0, 0, 0, [])] * (8 * SLOTS_PER_BUCKET)
    bad[0] = (0x1000, 0, 0, [1])
    with pytest.raises(ValueError):
        CuckooIndex.from_slots(8, bad)


def test_deterministic_given_seed():
    def build():
        filt = CuckooIndex(bucket_count=4, max_kicks=200, rng_seed=42)
        for i in range(60):
            filt.insert(f"det {i}", i)
        return filt

    a, b = build(), build()
    assert a.export_slots() == b.export_slots()
    assert a.stats().to_dict() == b.stats().to_dict()


def test_stats_fields():
    filt = CuckooIndex(bucket_count=8)
    filt.insert("a", 1)
    stats = filt.stats().to_dict()
    for key in (
        "bucket_count",
        "slot_count",
        "occupied_slots",
        "load_factor",
        "resize_count",
        "kick_count",
        "failed_insert_count",
        "load_at_first_resize",
        "stash_occupied",
    ):
        assert key in stats
    assert stats["occupied_slots"] == 1
    assert stats["load_factor"] == pytest.approx(1 / 32)
