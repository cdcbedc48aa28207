"""Acceptance gate: one test per shipped guarantee.

Each test exercises a guarantee end to end at its stated scale, records a
single pass/fail summary line (printed after the run), and then asserts.
Heavyweight shared state (the benchmark corpus and its index) is built once
per module. Timing-sensitive tests warm the CPU first and use replicated
measurements with a median decision so a single scheduler burst cannot
flip the outcome; see each test's docstring.
"""

from __future__ import annotations

import dataclasses
import gc
import math
import random
import statistics
import time
from pathlib import Path

import pytest

from conftest import record_criterion
from oracles import (
    bfs_expand,
    filter_relations_oracle,
    random_edge_set,
    random_parent_array,
    topk_oracle,
)

from chunkbridge import (
    Config,
    CuckooIndex,
    build_index,
    filter_relations,
    load_index,
    retrieve_context,
    save_index,
)
from chunkbridge.bench import measure_fpr, run_ablation, run_speed_comparison
from chunkbridge.forest import Abstract, Forest
from chunkbridge.ingest import CorpusDocument
from chunkbridge.retrieve import recognize_query_entities
from chunkbridge.synth import generate_corpus, generate_queries

DATA_DIR = Path(__file__).parent / "data"


# -- shared benchmark corpus ---------------------------------------------------


@pytest.fixture(scope="module")
def bench_corpus():
    """Thousands-of-abstracts corpus used by the load-factor and ablation tests."""
    return generate_corpus(n_chunks=11000, seed=101, vocab_size=3050, chunk_len=32)


@pytest.fixture(scope="module")
def bench_bundle(bench_corpus):
    config = Config(chunk_len=32, embed_dim=128, initial_buckets=1024, rng_seed=101)
    bundle, _ = build_index(bench_corpus.documents, config)
    return bundle


def _forest_from_parents(parents):
    abstracts = [
        Abstract(pair_id=i, summary="", first_chunk=5 * i, last_chunk=5 * i + 4)
        for i in range(len(parents))
    ]
    for node, parent in enumerate(parents):
        if parent is not None:
            abstracts[node].parent = parent
            abstracts[parent].children.add(node)
    return Forest(abstracts)


def _spin_cpu(filt, entity_lists, seconds):
    """Busy-loop on untimed probes so the CPU reaches steady clock speed."""
    probe = filt.fingerprint_probe
    t_end = time.perf_counter() + seconds
    while time.perf_counter() < t_end:
        for entities in entity_lists:
            for entity in entities:
                probe(entity)


# -- 1: the filter never loses a live entry ------------------------------------


def test_criterion_01_no_false_negatives_shadow_map():
    rng = random.Random(1001)
    filt = CuckooIndex(bucket_count=4096, rng_seed=7)
    shadow: dict[str, set[int]] = {}
    pool = [f"e{i}" for i in range(12000)]
    ops = 100_000
    false_negatives = 0
    mismatches = 0
    failed_inserts = 0
    t0 = time.perf_counter()
    for op in range(ops):
        r = rng.random()
        entity = pool[rng.randrange(len(pool))]
        if r < 0.5:
            pair_id = rng.randrange(10000)
            if filt.insert(entity, pair_id) == "failed":
                failed_inserts += 1
            else:
                shadow.setdefault(entity, set()).add(pair_id)
        elif r < 0.8:
            got = filt.lookup(entity)
            want = shadow.get(entity)
            if want is not None:
                if got is None:
                    false_negatives += 1
                elif set(got) != want:
                    mismatches += 1
            elif got is not None:
                mismatches += 1
        else:
            lived = entity in shadow
            if filt.delete(entity) != lived:
                mismatches += 1
            shadow.pop(entity, None)
        if op % 10000 == 9999 and shadow:
            sample = rng.sample(sorted(shadow), min(100, len(shadow)))
            for probe in sample:
                got = filt.lookup(probe)
                if got is None:
                    false_negatives += 1
                elif set(got) != shadow[probe]:
                    mismatches += 1
    for probe, want in shadow.items():
        got = filt.lookup(probe)
        if got is None:
            false_negatives += 1
        elif set(got) != want:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    passed = (
        false_negatives == 0
        and mismatches == 0
        and failed_inserts == 0
        and elapsed < 60
    )
    record_criterion(
        1,
        passed,
        f"10^5 random insert/lookup/delete ops vs shadow map: "
        f"{false_negatives} false negatives, {mismatches} payload mismatches, "
        f"{failed_inserts} failed inserts, {len(shadow)} live at end, {elapsed:.1f}s",
    )
    assert passed


# -- 2: false-positive rate at scale --------------------------------------------


def test_criterion_02_false_positive_rate():
    t0 = time.perf_counter()
    filt = CuckooIndex(bucket_count=2**15, rng_seed=9)
    members = [f"m{i}" for i in range(100_000)]
    for i, member in enumerate(members):
        filt.insert(member, i % 1000)
    non_members = [f"x{i}" for i in range(100_000)]
    measured = measure_fpr(filt, members, non_members)
    load = filt.load_factor()
    # two buckets of four slots probed against a 12-bit tag
    theory = 2 * 4 * load / 4096
    elapsed = time.perf_counter() - t0
    passed = (
        measured["fingerprint_fpr"] <= 0.005
        and load <= 0.95
        and measured["false_negatives"] == 0
        and elapsed < 60
    )
    record_criterion(
        2,
        passed,
        f"100k members / 100k non-members at load {load:.3f}: fingerprint FPR "
        f"{measured['fingerprint_fpr']:.4%} (theory ~{theory:.4%}, bound 0.5%), "
        f"payload FPR {measured['payload_fpr']:.4%}, {elapsed:.1f}s",
    )
    assert passed


# -- 3: realistic load factor before any resize ---------------------------------


def test_criterion_03_load_factor_before_doubling(bench_corpus, bench_bundle):
    stats = bench_bundle.filter.stats()
    abstracts = len(bench_bundle.forest)
    if stats.resize_count == 0:
        load_before_doubling = stats.load_factor
    else:
        load_before_doubling = stats.load_at_first_resize or 0.0
    passed = load_before_doubling > 0.70 and abstracts >= 2000
    record_criterion(
        3,
        passed,
        f"benchmark corpus ({len(bench_bundle.store)} chunks, {abstracts} abstracts, "
        f"{stats.occupied_slots} entities indexed): load {load_before_doubling:.3f} "
        f"with {stats.resize_count} resizes (bound > 0.70)",
    )
    assert passed


# -- 4: block-list space law -----------------------------------------------------


def test_criterion_04_block_node_count_law():
    failures = []
    for m in range(1, 31):
        filt = CuckooIndex(bucket_count=8, rng_seed=1)
        for pair_id in range(m):
            filt.insert("probe", pair_id)
        nodes = filt.block_node_count("probe")
        if nodes != math.ceil(m / 3):
            failures.append((m, nodes))
    passed = not failures
    record_criterion(
        4,
        passed,
        f"block-node count equals ceil(m/3) for m in 1..30"
        + (f"; failures: {failures}" if failures else ""),
    )
    assert passed


# -- 5: hierarchy expansion matches a BFS oracle ---------------------------------


def test_criterion_05_expand_matches_bfs_oracle():
    rng = random.Random(5005)
    checked = 0
    first_failure = None
    for _ in range(1000):
        n = rng.randint(1, 40)
        parents = random_parent_array(rng, n)
        forest = _forest_from_parents(parents)
        seeds = set(rng.sample(range(n), rng.randint(1, min(4, n))))
        previous = None
        for depth in range(4):
            got = forest.expand(seeds, depth)
            want = bfs_expand(parents, seeds, depth)
            if got != want and first_failure is None:
                first_failure = f"oracle mismatch n={n} seeds={sorted(seeds)} d={depth}"
            if depth == 0 and got != seeds and first_failure is None:
                first_failure = f"identity broken n={n} seeds={sorted(seeds)}"
            if previous is not None and not previous <= got and first_failure is None:
                first_failure = f"monotonicity broken n={n} d={depth}"
            previous = got
            checked += 1
    passed = first_failure is None
    record_criterion(
        5,
        passed,
        f"expansion equals bidirectional depth-bounded BFS on 1000 random forests, "
        f"depths 0..3 ({checked} expansions), identity and monotonicity hold"
        + (f"; {first_failure}" if first_failure else ""),
    )
    assert passed


# -- 6: relation filtering matches a brute-force oracle ---------------------------


def test_criterion_06_relation_filtering_oracle():
    rng = random.Random(6006)
    first_failure = None
    for i in range(1000):
        edges = random_edge_set(rng)
        got = filter_relations(edges)
        want = filter_relations_oracle(edges)
        if got != want and first_failure is None:
            first_failure = f"oracle mismatch on set {i} ({len(edges)} edges)"
        if filter_relations(got) != got and first_failure is None:
            first_failure = f"not idempotent on set {i}"
    passed = first_failure is None
    record_criterion(
        6,
        passed,
        "relation filtering equals brute-force reduction oracle on 1000 random "
        "edge sets and is idempotent" + (f"; {first_failure}" if first_failure else ""),
    )
    assert passed


# -- 7: selection equals the restricted exhaustive oracle -------------------------


def test_criterion_07_selection_matches_restricted_oracle(small_bundle, small_synth):
    queries = generate_queries(small_synth.entities, n=88, seed=71)
    queries += [
        "zzz qqq unknown thing?",
        "What about flibbertigibbet seven?",
        "",
        "the of and a",
        "Where is Xylophone Mountain in the records?",
        "plugh xyzzy",
        "1234 5678",
        "Tell me everything.",
        "q",
        "What links aaaa and bbbb?",
        "Which catalog mentions zzyzx?",
        "How does nothingness relate to emptiness?",
    ]
    mismatches = 0
    for query in queries:
        res = retrieve_context(query, small_bundle)
        if res.fallback:
            pool = list(range(len(small_bundle.store)))
        else:
            pool = sorted(small_bundle.forest.chunk_ids(set(res.expanded_abstracts)))
        qvec = small_bundle.embedder.embed(query)
        expected = topk_oracle(
            small_bundle.store.embeddings, qvec, pool, small_bundle.config.k
        )
        if res.selected_chunks != expected:
            mismatches += 1
    passed = mismatches == 0
    record_criterion(
        7,
        passed,
        f"{len(queries)} queries: selected chunks equal the exhaustive top-k oracle "
        f"restricted to the candidate pool (exact ids, scores, order); "
        f"{mismatches} mismatches",
    )
    assert passed


# -- 8: engine beats the full scan -----------------------------------------------


def test_criterion_08_speedup_over_full_scan():
    t0 = time.perf_counter()
    corpus = generate_corpus(n_chunks=45000, seed=81, vocab_size=8000, chunk_len=32)
    config = Config(chunk_len=32, embed_dim=128, initial_buckets=4096, rng_seed=81)
    bundle, _ = build_index(corpus.documents, config)
    queries = generate_queries(corpus.entities, n=100, seed=82)
    report = run_speed_comparison(queries, bundle, iterations=5, warmup=1)
    elapsed = time.perf_counter() - t0
    passed = (
        len(bundle.store) >= 50000
        and report.speedup_median >= 2.0
        and elapsed < 300
    )
    record_criterion(
        8,
        passed,
        f"{len(bundle.store)} chunks, 100 entity-rich queries: median engine "
        f"{report.engine.median_us:.0f}us vs naive {report.naive.median_us:.0f}us, "
        f"median per-query speedup {report.speedup_median:.1f}x (bound 2x), "
        f"median pool {report.pool_size_median:.0f}, {elapsed:.0f}s",
    )
    assert passed


# -- 9: lookup cost stays flat across scale ---------------------------------------


def test_criterion_09_lookup_scale_ratio():
    def build(count, buckets):
        filt = CuckooIndex(bucket_count=buckets, rng_seed=3)
        for i in range(count):
            filt.insert(f"n{i}", i % 997)
        return filt

    def mean_lookup_us(filt, probes):
        lookup = filt.lookup
        for probe in probes:
            lookup(probe)
        t0 = time.perf_counter_ns
        gc.disable()
        try:
            start = t0()
            for _ in range(3):
                for probe in probes:
                    lookup(probe)
            total = t0() - start
        finally:
            gc.enable()
        return total / (3 * len(probes)) / 1000.0

    t0 = time.perf_counter()
    rng = random.Random(9009)
    small = build(10_000, 2**12)
    big = build(1_000_000, 2**19)
    probes_small = [f"n{rng.randrange(10_000)}" for _ in range(20000)]
    probes_big = [f"n{rng.randrange(1_000_000)}" for _ in range(20000)]
    small_us = mean_lookup_us(small, probes_small)
    big_us = mean_lookup_us(big, probes_big)
    ratio = big_us / small_us
    elapsed = time.perf_counter() - t0
    passed = ratio <= 2.0
    record_criterion(
        9,
        passed,
        f"mean lookup {small_us:.2f}us at 10^4 entities (load "
        f"{small.load_factor():.2f}) vs {big_us:.2f}us at 10^6 (load "
        f"{big.load_factor():.2f}): ratio {ratio:.2f} (bound 2.0), {elapsed:.0f}s",
    )
    assert passed


# -- 10: bucket sorting helps latency and never changes results -------------------


def test_criterion_10_sorting_ablation(bench_corpus, bench_bundle):
    """Direction: replicated short runs on cold filter clones, median decides.

    The round-1 penalty is a fixed total cost (each entity's first bump
    moves it to the front of its bucket), so rounds are sized to that
    transition window and the whole run is replicated nine times on
    identical cold clones; the median replication decides, which a single
    scheduler burst cannot flip. Parity: the same queries served with
    resorting enabled and disabled must select identical chunks.
    """
    rare_first = list(reversed(bench_corpus.entities))
    queries = generate_queries(rare_first, n=1600, seed=102, zipf_s=1.0)
    held_out = generate_queries(bench_corpus.entities[:400], n=100, seed=103)
    cold_slots = [
        (fp, 0, h, ids) for fp, _, h, ids in bench_bundle.filter.export_slots()
    ]
    bucket_count = bench_bundle.filter.bucket_count
    config = bench_bundle.config

    def cold_clone():
        clone = CuckooIndex.from_slots(
            bucket_count, cold_slots, max_kicks=config.max_kicks,
            rng_seed=config.rng_seed,
        )
        return dataclasses.replace(bench_bundle, filter=clone)

    spin_lists = [
        recognize_query_entities(q, bench_bundle.dictionary) for q in held_out
    ]
    drops = []
    gc.disable()
    try:
        for _ in range(9):
            bundle = cold_clone()
            _spin_cpu(bundle.filter, spin_lists, 0.4)
            report = run_ablation(
                queries, bundle, rounds=3, sorting=True, warmup_queries=held_out
            )
            means = [r.stats.mean_us for r in report.rounds]
            rest = statistics.fmean(means[1:])
            drops.append((means[0] - rest) / means[0] * 100.0)
    finally:
        gc.enable()
    median_drop = statistics.median(drops)
    direction_ok = median_drop > 0

    parity_queries = queries[:300]
    bundle_on = cold_clone()
    bundle_off = cold_clone()
    parity_mismatches = 0
    for query in parity_queries:
        res_on = retrieve_context(query, bundle_on, resort=True)
        res_off = retrieve_context(query, bundle_off, resort=False)
        if (
            res_on.selected_chunks != res_off.selected_chunks
            or res_on.prompt != res_off.prompt
            or res_on.expanded_abstracts != res_off.expanded_abstracts
        ):
            parity_mismatches += 1
    parity_ok = parity_mismatches == 0

    passed = direction_ok and parity_ok
    positive_runs = sum(1 for d in drops if d > 0)
    record_criterion(
        10,
        passed,
        f"Zipf workload, sorting on: median round-1 to rounds-2+ latency drop "
        f"{median_drop:+.1f}% over 9 replications ({positive_runs}/9 positive; "
        f"drops {', '.join(f'{d:+.1f}' for d in sorted(drops))}); sorting off: "
        f"{parity_mismatches} result mismatches across {len(parity_queries)} queries",
    )
    assert passed


# -- 11: determinism, persistence, prompt layout ----------------------------------


def test_criterion_11_determinism_and_persistence(small_synth, tmp_path):
    config = Config(chunk_len=32, embed_dim=64, initial_buckets=256, rng_seed=11)
    bundle_a, _ = build_index(small_synth.documents, config)
    bundle_b, _ = build_index(small_synth.documents, config)
    path_a = tmp_path / "a.idx"
    path_b = tmp_path / "b.idx"
    save_index(bundle_a, str(path_a))
    save_index(bundle_b, str(path_b))
    bytes_equal = path_a.read_bytes() == path_b.read_bytes()

    loaded = load_index(str(path_a))
    queries = generate_queries(small_synth.entities, n=30, seed=31)
    queries.append("zzz gibberish fallback?")

    def signature(res):
        return (
            res.entities,
            res.initial_abstracts,
            res.expanded_abstracts,
            res.selected_chunks,
            res.selected_abstracts,
            res.fallback,
            res.prompt,
        )

    output_mismatches = sum(
        1
        for q in queries
        if signature(retrieve_context(q, bundle_a)) != signature(retrieve_context(q, loaded))
    )

    docs = [
        CorpusDocument(
            doc_id="almanac",
            text=(
                "Harlow Basin lies east of the old survey line. Harlow Basin floods briefly each spring. "
                "The water drains toward Miller Flat within a day. Miller Flat stays dry the rest of the year. "
                "Surveyors mapped Miller Flat twice. Harlow Basin belongs to Miller Flat. "
                "The northern rim of Harlow Basin holds thin soil. Grasses return to the rim by late summer. "
                "Miller Flat contains Harlow Basin and Stone Creek. Stone Creek runs shallow over gravel. "
                "Stone Creek freezes first in autumn. Ice on Stone Creek stays thin near the springs. "
                "Field notes from the basin mention quick storms. The notes describe short afternoon winds. "
                "Harlow Basin and Stone Creek meet at the flat. Water marks show on the stones there."
            ),
        )
    ]
    golden_config = Config(chunk_len=24, embed_dim=64, k=3, initial_buckets=64, rng_seed=0)
    golden_bundle, _ = build_index(docs, golden_config)
    res = retrieve_context("When does Harlow Basin flood?", golden_bundle)
    golden = (DATA_DIR / "golden_prompt.txt").read_text(encoding="utf-8")
    prompt_matches = res.prompt == golden

    passed = bytes_equal and output_mismatches == 0 and prompt_matches
    record_criterion(
        11,
        passed,
        f"rebuild byte-identical: {bytes_equal}; save/load preserved outputs on "
        f"{len(queries)} queries ({output_mismatches} mismatches); golden prompt "
        f"match: {prompt_matches}",
    )
    assert passed
