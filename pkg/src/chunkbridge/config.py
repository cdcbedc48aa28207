"""Build/runtime configuration shared by the library and the CLI."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields

ENV_PREFIX = "CHUNKBRIDGE_"

CHUNKS_PER_ABSTRACT = 5
MAX_EXPANSION_DEPTH = 3


@dataclass
class Config:
    chunk_len: int = 128          # target tokens per chunk
    embed_dim: int = 256          # embedding dimensionality
    k: int = 5                    # chunks returned per query
    max_depth: int = 3            # hierarchy expansion depth, 1..3
    min_entity_count: int = 2     # extraction frequency threshold
    initial_buckets: int = 1024   # filter buckets, power of two
    max_kicks: int = 500          # eviction chain bound
    rng_seed: int = 0             # eviction RNG / synthetic workloads

    def validate(self) -> None:
        if self.chunk_len < 1:
            raise ValueError("chunk_len must be >= 1")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 1 <= self.max_depth <= MAX_EXPANSION_DEPTH:
            raise ValueError(f"max_depth must be in 1..{MAX_EXPANSION_DEPTH}")
        if self.min_entity_count < 1:
            raise ValueError("min_entity_count must be >= 1")
        if self.initial_buckets <= 0 or self.initial_buckets & (self.initial_buckets - 1):
            raise ValueError("initial_buckets must be a power of two")
        if self.max_kicks < 1:
            raise ValueError("max_kicks must be >= 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")

    def to_dict(self) -> dict[str, int]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**{k: int(v) for k, v in data.items()})
        cfg.validate()
        return cfg

    @classmethod
    def from_env(cls, environ: dict[str, str] | None = None) -> "Config":
        """Defaults overridden by CHUNKBRIDGE_<FIELD> environment variables."""
        env = os.environ if environ is None else environ
        values: dict[str, int] = {}
        for f in fields(cls):
            raw = env.get(ENV_PREFIX + f.name.upper())
            if raw is not None:
                try:
                    values[f.name] = int(raw)
                except ValueError as exc:
                    raise ValueError(
                        f"{ENV_PREFIX + f.name.upper()} must be an integer, got {raw!r}"
                    ) from exc
        cfg = cls(**values)
        cfg.validate()
        return cfg
