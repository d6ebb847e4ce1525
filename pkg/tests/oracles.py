"""Independent reference implementations used to check the engine.

None of these import engine internals beyond plain data structures.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

CATALOG_PATH = Path(__file__).resolve().parent.parent / "src" / "edg_typer" / "data" / "builtin_attrs.json"


def reachability(nodes: list[str], edges: set[tuple[str, str]]) -> dict[str, set[str]]:
    """Reflexive transitive closure by Floyd-Warshall over integer bit rows."""
    idx = {n: i for i, n in enumerate(nodes)}
    rows = [1 << i for i in range(len(nodes))]
    for u, v in edges:
        rows[idx[u]] |= 1 << idx[v]
    for k in range(len(nodes)):
        bit, rk = 1 << k, rows[k]
        for i in range(len(nodes)):
            if rows[i] & bit:
                rows[i] |= rk
    return {a: {b for b in nodes if rows[idx[a]] >> idx[b] & 1} for a in nodes}


def scc_partition(nodes: list[str], edges: set[tuple[str, str]]) -> set[frozenset[str]]:
    """SCCs as classes of pairwise mutual reachability."""
    reach = reachability(nodes, edges)
    return {frozenset(b for b in nodes if b in reach[a] and a in reach[b]) for a in nodes}


def random_digraph(rng: random.Random, max_nodes: int = 50) -> tuple[list[str], set[tuple[str, str]]]:
    n = rng.randint(1, max_nodes)
    nodes = [f"m.n{i:02d}" for i in range(n)]
    p = rng.choice([0.01, 0.03, 0.06, 0.1, 0.2])
    edges = {(a, b) for a in nodes for b in nodes if a != b and rng.random() < p}
    return nodes, edges


def forced_large_scc_digraph(rng: random.Random, max_nodes: int = 50) -> tuple[list[str], set[tuple[str, str]]]:
    """A random digraph with at least one planted cycle of 6..20 nodes."""
    nodes, edges = random_digraph(rng, max_nodes)
    while len(nodes) < 6:
        nodes.append(f"m.n{len(nodes):02d}")
    k = rng.randint(6, min(20, len(nodes)))
    ring = rng.sample(nodes, k)
    for a, b in zip(ring, ring[1:] + ring[:1]):
        edges.add((a, b))
    for _ in range(rng.randint(0, k)):
        a, b = rng.sample(ring, 2)
        edges.add((a, b))
    return nodes, edges


def load_catalog() -> tuple[set[str], dict[str, set[str]]]:
    raw = json.loads(CATALOG_PATH.read_text(encoding="utf-8"))
    return set(raw["object_attrs"]), {k: set(v) for k, v in raw["types"].items()}


def jaccard_by_counting(a: set[str], b: set[str]) -> float:
    """Jaccard index by explicit iteration, no set operators."""
    inter = 0
    union: list[str] = []
    for x in sorted(a):
        if x in b:
            inter += 1
        union.append(x)
    for x in sorted(b):
        if x not in a:
            union.append(x)
    return inter / len(union) if union else 1.0
