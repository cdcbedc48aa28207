"""Abstract forest: fixed-size chunk groups linked into concept trees.

Consecutive chunks are grouped five at a time; each group gets an abstract
(pair id = group index) carrying an extractive summary of its chunks.
Relation edges between concepts, after filtering, induce parent/child links
between the abstracts the concepts first appear in. The result is a forest:
every abstract has at most one parent and cycles are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .config import CHUNKS_PER_ABSTRACT
from .text import first_sentence

RELATION_KINDS = ("belongs_to", "contains", "depends_on", "modifier")


@dataclass(frozen=True)
class RelationEdge:
    """Directed concept relation: child points to parent."""

    child: str
    parent: str
    kind: str
    confidence: int

    def __post_init__(self) -> None:
        if self.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if self.confidence < 0:
            raise ValueError("confidence must be >= 0")


@dataclass
class Abstract:
    """Summary node covering chunks [first_chunk, last_chunk]."""

    pair_id: int
    summary: str
    first_chunk: int
    last_chunk: int
    parent: int | None = None
    children: set[int] = field(default_factory=set)


@dataclass
class ForestBuildReport:
    installed: int = 0
    skipped_unmapped: int = 0
    rejected_cycles: int = 0
    skipped_conflicts: int = 0

    def to_dict(self) -> dict[str, int]:
        return {
            "installed": self.installed,
            "skipped_unmapped": self.skipped_unmapped,
            "rejected_cycles": self.rejected_cycles,
            "skipped_conflicts": self.skipped_conflicts,
        }


def lead_sentence_summary(chunk_texts: Sequence[str]) -> str:
    """Default extractive summarizer: first sentence of each chunk."""
    return " ".join(s for s in (first_sentence(t) for t in chunk_texts) if s)


def build_abstracts(
    chunk_texts: Sequence[str],
    summarizer: Callable[[Sequence[str]], str] = lead_sentence_summary,
) -> list[Abstract]:
    """One abstract per run of CHUNKS_PER_ABSTRACT chunks, tail clamped.

    Abstract i covers chunks [5i, min(5i+4, n-1)]; len(chunk_texts) == n
    yields ceil(n / 5) abstracts.
    """
    n = len(chunk_texts)
    abstracts = []
    for pair_id in range((n + CHUNKS_PER_ABSTRACT - 1) // CHUNKS_PER_ABSTRACT):
        first = pair_id * CHUNKS_PER_ABSTRACT
        last = min(first + CHUNKS_PER_ABSTRACT - 1, n - 1)
        abstracts.append(
            Abstract(
                pair_id=pair_id,
                summary=summarizer(chunk_texts[first : last + 1]),
                first_chunk=first,
                last_chunk=last,
            )
        )
    return abstracts


# -- relation filtering ------------------------------------------------------


def _reachable(adj: Mapping[str, list[str]], start: str, goal: str) -> bool:
    if start == goal:
        return True
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt == goal:
                return True
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def filter_relations(edges: Iterable[RelationEdge]) -> list[RelationEdge]:
    """Reduce raw edges to a clean single-parent DAG. Idempotent.

    In order: drop self-edges; collapse duplicate (child, parent) pairs to
    the highest-confidence one (ties: first seen); break 2-cycles keeping
    the higher-confidence direction (ties: earlier edge); break longer
    cycles by rejecting the latest edge that would close one; remove
    transitively implied edges; keep at most one parent per child (highest
    confidence, ties: earliest).
    """
    # self-edges
    ordered = [e for e in edges if e.child != e.parent]

    # duplicates: highest confidence wins, first occurrence on ties
    best: dict[tuple[str, str], tuple[int, RelationEdge]] = {}
    for pos, e in enumerate(ordered):
        key = (e.child, e.parent)
        if key not in best or e.confidence > best[key][1].confidence:
            if key in best:
                pos = best[key][0]  # keep the original position
            best[key] = (pos, e)
    survivors = [e for _, e in sorted(best.values(), key=lambda item: item[0])]

    # 2-cycles
    keys = {(e.child, e.parent): i for i, e in enumerate(survivors)}
    dropped: set[int] = set()
    for i, e in enumerate(survivors):
        j = keys.get((e.parent, e.child))
        if j is None or i in dropped or j in dropped:
            continue
        other = survivors[j]
        if e.confidence > other.confidence:
            dropped.add(j)
        elif e.confidence < other.confidence:
            dropped.add(i)
        else:
            dropped.add(max(i, j))  # tie: the earlier edge stays
    survivors = [e for i, e in enumerate(survivors) if i not in dropped]

    # longer cycles: scan in order, reject any edge closing a cycle
    adj: dict[str, list[str]] = {}
    acyclic: list[RelationEdge] = []
    for e in survivors:
        if _reachable(adj, e.parent, e.child):
            continue
        adj.setdefault(e.child, []).append(e.parent)
        acyclic.append(e)

    # transitive reduction: drop child->parent when the parent is reachable
    # through some other outgoing edge of the child. Reachability sets are
    # built in reverse topological order (adj is a DAG at this point).
    nodes: set[str] = set()
    indeg: dict[str, int] = {}
    for u, targets in adj.items():
        nodes.add(u)
        for v in targets:
            nodes.add(v)
            indeg[v] = indeg.get(v, 0) + 1
    queue = [n for n in nodes if indeg.get(n, 0) == 0]
    topo: list[str] = []
    while queue:
        n = queue.pop()
        topo.append(n)
        for v in adj.get(n, ()):
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    reach: dict[str, set[str]] = {}
    for n in reversed(topo):
        acc: set[str] = set()
        for v in adj.get(n, ()):
            acc.add(v)
            acc |= reach[v]
        reach[n] = acc
    reduced = [
        e
        for e in acyclic
        if not any(e.parent in reach[w] for w in adj[e.child] if w != e.parent)
    ]

    # single parent per child: strictly higher confidence replaces the held
    # edge, so ties keep the earlier one
    chosen: dict[str, tuple[int, RelationEdge]] = {}
    for pos, e in enumerate(reduced):
        held = chosen.get(e.child)
        if held is None or e.confidence > held[1].confidence:
            chosen[e.child] = (pos, e)
    return [e for _, e in sorted(chosen.values(), key=lambda item: item[0])]


# -- the forest --------------------------------------------------------------


class Forest:
    """Parent/child structure over abstracts, pair ids dense 0..n-1."""

    def __init__(self, abstracts: Sequence[Abstract]):
        for i, a in enumerate(abstracts):
            if a.pair_id != i:
                raise ValueError("abstract pair_ids must be dense and ordered")
        self.abstracts = list(abstracts)

    def __len__(self) -> int:
        return len(self.abstracts)

    def _check_id(self, pair_id: int) -> None:
        if not 0 <= pair_id < len(self.abstracts):
            raise ValueError(f"invalid pair_id {pair_id}")

    def expand(self, initial: Iterable[int], depth: int) -> set[int]:
        """The initial abstracts plus ancestors and descendants within
        *depth* hops. depth=0 returns the initial set itself."""
        if depth < 0:
            raise ValueError("depth must be >= 0")
        seeds = set(initial)
        for pair_id in seeds:
            self._check_id(pair_id)
        out = set(seeds)
        for seed in seeds:
            node = self.abstracts[seed].parent
            hops = 0
            while node is not None and hops < depth:
                out.add(node)
                node = self.abstracts[node].parent
                hops += 1
            frontier = [seed]
            for _ in range(depth):
                nxt: list[int] = []
                for pid in frontier:
                    for child in self.abstracts[pid].children:
                        if child not in out:
                            out.add(child)
                        nxt.append(child)
                frontier = nxt
        return out

    def chunk_ids(self, pair_ids: Iterable[int]) -> set[int]:
        """Union of the chunk spans of the given abstracts."""
        out: set[int] = set()
        for pid in pair_ids:
            self._check_id(pid)
            a = self.abstracts[pid]
            out.update(range(a.first_chunk, a.last_chunk + 1))
        return out

    def roots(self) -> list[int]:
        return [a.pair_id for a in self.abstracts if a.parent is None]

    def depth_of(self, pair_id: int) -> int:
        self._check_id(pair_id)
        depth = 0
        node = self.abstracts[pair_id].parent
        while node is not None:
            depth += 1
            node = self.abstracts[node].parent
        return depth

    def shape(self) -> dict[str, int]:
        return {
            "abstracts": len(self.abstracts),
            "roots": len(self.roots()),
            "edges": sum(1 for a in self.abstracts if a.parent is not None),
            "max_depth": max((self.depth_of(a.pair_id) for a in self.abstracts), default=0),
        }


def assemble_forest(
    abstracts: Sequence[Abstract],
    edges: Sequence[RelationEdge],
    concept_to_abstract: Mapping[str, int],
) -> tuple[Forest, ForestBuildReport]:
    """Install concept edges as abstract parent links.

    Edges are applied in (confidence desc, input order) sequence. An edge is
    skipped when either concept is unmapped, rejected when both concepts map
    to the same abstract or the link would create a cycle, and skipped when
    the child abstract already has a parent.
    """
    forest = Forest(abstracts)
    report = ForestBuildReport()
    nodes = forest.abstracts
    order = sorted(range(len(edges)), key=lambda i: (-edges[i].confidence, i))
    for i in order:
        e = edges[i]
        child_pid = concept_to_abstract.get(e.child)
        parent_pid = concept_to_abstract.get(e.parent)
        if child_pid is None or parent_pid is None:
            report.skipped_unmapped += 1
            continue
        if child_pid == parent_pid:
            report.rejected_cycles += 1
            continue
        if nodes[child_pid].parent is not None:
            report.skipped_conflicts += 1
            continue
        # would parent_pid -> ... -> child_pid already hold upward?
        node = parent_pid
        cycle = False
        while node is not None:
            if node == child_pid:
                cycle = True
                break
            node = nodes[node].parent
        if cycle:
            report.rejected_cycles += 1
            continue
        nodes[child_pid].parent = parent_pid
        nodes[parent_pid].children.add(child_pid)
        report.installed += 1
    return forest, report
