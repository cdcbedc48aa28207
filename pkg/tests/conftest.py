"""Shared fixtures and the acceptance-criterion reporter.

Acceptance tests call :func:`record_criterion` before their final assert;
the collected lines are printed in the terminal summary so every criterion
gets exactly one visible pass/fail line even under output capture.
"""

from __future__ import annotations

import pytest

from chunkbridge import Config, build_index
from chunkbridge.synth import generate_corpus, generate_queries

_CRITERION_LINES: list[tuple[int, str]] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _CRITERION_LINES.append((number, f"[{status}] criterion {number}: {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_synth():
    """A small deterministic synthetic corpus for unit-level tests."""
    return generate_corpus(n_chunks=400, seed=11, vocab_size=150, chunk_len=32)


@pytest.fixture(scope="session")
def small_bundle(small_synth):
    config = Config(chunk_len=32, embed_dim=64, initial_buckets=256, rng_seed=11)
    bundle, report = build_index(small_synth.documents, config)
    return bundle


@pytest.fixture(scope="session")
def small_queries(small_synth):
    return generate_queries(small_synth.entities, n=40, seed=12)
