"""Entity dependency graph, SCC condensation and wave selection.

Edges point from the dependent entity to its dependency: ``A -> B`` means
B's type has to be known before A's can be inferred.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

from .errors import UnknownEntityRef
from .frontend.model import (
    EntityIndex,
    EntityKind,
    RefKind,
    SlotState,
    StatementRef,
    TypeSlot,
    split_slot,
)

DEFAULT_CLUSTER_BOUND = 5


class EdgeKind(str, Enum):
    CALL = "Call"
    ACCESS = "Access"
    INHERITANCE = "Inheritance"
    DEFINITION = "Definition"


class EdgeOrigin(str, Enum):
    PATTERN = "Pattern"
    PROBED = "Probed"


@dataclass(frozen=True, order=True)
class DependencyEdge:
    src: str  # dependent
    dst: str  # dependency
    kind: EdgeKind = EdgeKind.ACCESS
    origin: EdgeOrigin = EdgeOrigin.PATTERN

    @property
    def key(self) -> tuple[str, str, EdgeKind]:
        return (self.src, self.dst, self.kind)

    def to_json(self) -> dict[str, str]:
        return {"from": self.src, "to": self.dst, "kind": self.kind.value, "origin": self.origin.value}

    @classmethod
    def from_json(cls, d: Mapping[str, str]) -> DependencyEdge:
        return cls(d["from"], d["to"], EdgeKind(d["kind"]), EdgeOrigin(d.get("origin", "Pattern")))


class EntityDependencyGraph:
    """Nodes are entity ids; edges are deduplicated on (src, dst, kind)."""

    def __init__(self, nodes: Mapping[str, EntityKind] | None = None) -> None:
        self.nodes: dict[str, EntityKind] = dict(nodes or {})
        self._edges: dict[tuple[str, str, EdgeKind], DependencyEdge] = {}
        self.version = 0

    @property
    def edges(self) -> list[DependencyEdge]:
        return sorted(self._edges.values())

    def __len__(self) -> int:
        return len(self._edges)

    def add_edge(self, edge: DependencyEdge) -> bool:
        """Add ``edge``; returns True if the edge set changed."""
        if edge.src not in self.nodes or edge.dst not in self.nodes:
            raise UnknownEntityRef(f"{edge.src} -> {edge.dst}")
        if edge.src == edge.dst:
            return False
        old = self._edges.get(edge.key)
        if old is not None:
            if old.origin is EdgeOrigin.PROBED and edge.origin is EdgeOrigin.PATTERN:
                self._edges[edge.key] = edge  # pattern wins; same edge, no version bump
            return False
        self._edges[edge.key] = edge
        self.version += 1
        return True

    def has_edge(self, src: str, dst: str) -> bool:
        return any((src, dst, k) in self._edges for k in EdgeKind)

    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for s, d, _ in self._edges:
            succ[s].add(d)
        return succ

    def copy(self) -> EntityDependencyGraph:
        g = EntityDependencyGraph(self.nodes)
        g._edges = dict(self._edges)
        g.version = self.version
        return g

    # -- serialization --------------------------------------------------
    def to_json(self) -> dict:
        return {
            "version": self.version,
            "nodes": [{"id": n, "kind": k.value} for n, k in sorted(self.nodes.items())],
            "edges": [e.to_json() for e in self.edges],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> EntityDependencyGraph:
        g = cls({n["id"]: EntityKind(n["kind"]) for n in data["nodes"]})
        for e in data["edges"]:
            edge = DependencyEdge.from_json(e)
            g._edges[edge.key] = edge
        g.version = int(data.get("version", len(g._edges)))
        return g

    def to_dot(self) -> str:
        lines = ["digraph edg {", "  rankdir=LR;"]
        shapes = {EntityKind.CLASS: "box", EntityKind.FUNCTION: "ellipse", EntityKind.VARIABLE: "note"}
        for n, k in sorted(self.nodes.items()):
            lines.append(f"  {json.dumps(n)} [shape={shapes[k]}];")
        for e in self.edges:
            style = ", style=dashed" if e.origin is EdgeOrigin.PROBED else ""
            lines.append(f"  {json.dumps(e.src)} -> {json.dumps(e.dst)} [label={e.kind.value}{style}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_edg(index: EntityIndex, refs: Iterable[StatementRef]) -> EntityDependencyGraph:
    g = EntityDependencyGraph({e.id: e.kind for e in index})
    for ref in refs:
        owner = index[ref.owner]
        for target_id, rk in ref.referenced:
            target = index[target_id]
            edge: DependencyEdge | None = None
            if rk is RefKind.INHERIT:
                if owner.kind is EntityKind.CLASS and target.kind is EntityKind.CLASS:
                    edge = DependencyEdge(owner.id, target.id, EdgeKind.INHERITANCE)
            elif rk is RefKind.CALL:
                if target.kind is EntityKind.FUNCTION:
                    edge = DependencyEdge(owner.id, target.id, EdgeKind.CALL)
            elif rk is RefKind.READ:
                if target.kind is EntityKind.VARIABLE:
                    edge = DependencyEdge(owner.id, target.id, EdgeKind.ACCESS)
                elif target.kind is EntityKind.FUNCTION:
                    # a function used as a value still needs its signature
                    edge = DependencyEdge(owner.id, target.id, EdgeKind.CALL)
            elif rk is RefKind.WRITE:
                if owner.kind is EntityKind.FUNCTION and target.kind is EntityKind.VARIABLE:
                    edge = DependencyEdge(target.id, owner.id, EdgeKind.DEFINITION)
            if edge is not None:
                g.add_edge(edge)
    return g


def merge_new_edges(
    g: EntityDependencyGraph, probed: Iterable[DependencyEdge]
) -> tuple[EntityDependencyGraph, list[UnknownEntityRef]]:
    """Copy of ``g`` with ``probed`` added (origin forced to Probed).

    Edges naming unknown entities are returned as rejections instead of
    aborting the merge.
    """
    out = g.copy()
    rejected: list[UnknownEntityRef] = []
    for e in probed:
        edge = DependencyEdge(e.src, e.dst, e.kind, EdgeOrigin.PROBED)
        try:
            out.add_edge(edge)
        except UnknownEntityRef as exc:
            rejected.append(exc)
    return out, rejected


# -- strongly connected components ------------------------------------------


def tarjan_scc(nodes: Iterable[str], succ: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Iterative Tarjan.  Components come out in reverse topological order
    (a component is emitted after everything it reaches)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(succ.get(root, ()))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(succ.get(w, ())))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def _dominators(root: str, nodes: list[str], succ: Mapping[str, set[str]], pred: Mapping[str, set[str]]) -> dict[str, str]:
    """Immediate dominators (Cooper/Harvey/Kennedy) for a flowgraph where
    every node is reachable from ``root``."""
    order: list[str] = []
    seen = {root}
    stack = [(root, iter(sorted(succ[root])))]
    while stack:
        v, it = stack[-1]
        for w in it:
            if w not in seen:
                seen.add(w)
                stack.append((w, iter(sorted(succ[w]))))
                break
        else:
            stack.pop()
            order.append(v)
    po = {v: i for i, v in enumerate(order)}
    rpo = list(reversed(order))
    idom: dict[str, str] = {root: root}

    def intersect(a: str, b: str) -> str:
        while a != b:
            while po[a] < po[b]:
                a = idom[a]
            while po[b] < po[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for v in rpo[1:]:
            new = None
            for p in pred[v]:
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if new is not None and idom.get(v) != new:
                idom[v] = new
                changed = True
    return idom


def _flow_bridges(root: str, nodes: list[str], succ: Mapping[str, set[str]], pred: Mapping[str, set[str]]) -> set[tuple[str, str]]:
    """Edges (u, v) such that v becomes unreachable from root without them."""
    idom = _dominators(root, nodes, succ, pred)
    out: set[tuple[str, str]] = set()
    for v in nodes:
        if v == root:
            continue
        u = idom[v]
        if u not in pred[v]:
            continue
        # every other way into v must pass through v itself
        ok = True
        for w in pred[v]:
            if w == u:
                continue
            x = w
            while x != v and x != root:
                x = idom[x]
            if x != v:
                ok = False
                break
        if ok:
            out.add((u, v))
    return out


def strong_bridges(nodes: list[str], edges: set[tuple[str, str]]) -> set[tuple[str, str]]:
    """Edges whose removal breaks strong connectivity of ``nodes`` (assumed strongly connected)."""
    if len(nodes) < 2:
        return set()
    succ: dict[str, set[str]] = {n: set() for n in nodes}
    pred: dict[str, set[str]] = {n: set() for n in nodes}
    for u, v in edges:
        succ[u].add(v)
        pred[v].add(u)
    root = nodes[0]
    fwd = _flow_bridges(root, nodes, succ, pred)
    rev = _flow_bridges(root, nodes, pred, succ)
    return fwd | {(v, u) for u, v in rev}


def _split_oversize(members: list[str], edges: set[tuple[str, str]], bound: int) -> tuple[list[list[str]], list[tuple[str, str]]]:
    """Greedy decomposition of one strongly connected component.

    Each step removes the internal edge minimising (largest resulting SCC,
    number of resulting SCCs, edge).  Only strong bridges can change the
    component structure, so every other edge scores (|part|, 1) and only the
    bridges need an SCC recomputation.
    """
    removed: list[tuple[str, str]] = []
    live = set(edges)
    parts = [sorted(members)]
    while True:
        big = [p for p in parts if len(p) > bound]
        if not big:
            return sorted(parts), removed
        part = sorted(big, key=lambda p: (-len(p), p[0]))[0]
        pset = set(part)
        internal = sorted((u, v) for u, v in live if u in pset and v in pset)
        best: tuple[tuple[int, int, tuple[str, str]], list[list[str]]] | None = None
        for e in sorted(strong_bridges(part, set(internal))):
            succ: dict[str, set[str]] = {n: set() for n in part}
            for u, v in internal:
                if (u, v) != e:
                    succ[u].add(v)
            comps = tarjan_scc(part, succ)
            score = (max(len(c) for c in comps), len(comps), e)
            if best is None or score < best[0]:
                best = (score, comps)
        if best is None:
            e = internal[0]
            comps = [part]
        else:
            e = best[0][2]
            comps = best[1]
        live.discard(e)
        removed.append(e)
        parts = [p for p in parts if p is not part] + [sorted(c) for c in comps]


@dataclass(frozen=True)
class EntityCluster:
    cluster_id: str
    members: tuple[str, ...]
    removed_internal_edges: tuple[DependencyEdge, ...] = ()

    def __len__(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "id": self.cluster_id,
            "members": list(self.members),
            "removed_internal_edges": [e.to_json() for e in self.removed_internal_edges],
        }


@dataclass
class ClusterDAG:
    clusters: list[EntityCluster]
    cluster_edges: set[tuple[str, str]] = field(default_factory=set)
    cluster_of: dict[str, str] = field(default_factory=dict)
    edg_version: int = 0

    def by_id(self) -> dict[str, EntityCluster]:
        return {c.cluster_id: c for c in self.clusters}

    def successors(self, cluster_id: str) -> list[str]:
        return sorted(d for s, d in self.cluster_edges if s == cluster_id)

    def is_acyclic(self) -> bool:
        succ: dict[str, set[str]] = {c.cluster_id: set() for c in self.clusters}
        for s, d in self.cluster_edges:
            if s == d:
                return False
            succ[s].add(d)
        return all(len(c) == 1 for c in tarjan_scc(sorted(succ), succ))

    def dependency_closure(self, cluster_id: str) -> dict[str, int]:
        """Reachable clusters with their BFS distance (excluding the start)."""
        dist = {cluster_id: 0}
        frontier = [cluster_id]
        succ: dict[str, list[str]] = {}
        for s, d in sorted(self.cluster_edges):
            succ.setdefault(s, []).append(d)
        while frontier:
            nxt = []
            for c in frontier:
                for d in succ.get(c, []):
                    if d not in dist:
                        dist[d] = dist[c] + 1
                        nxt.append(d)
            frontier = nxt
        del dist[cluster_id]
        return dist


def condense_and_bound(g: EntityDependencyGraph, bound: int | None = DEFAULT_CLUSTER_BOUND) -> ClusterDAG:
    """Collapse SCCs into clusters, splitting any larger than ``bound``.

    ``bound=None`` disables the decomposition (plain condensation).
    """
    nodes = sorted(g.nodes)
    succ = g.successors()
    comps = tarjan_scc(nodes, succ)
    pair_edges: dict[tuple[str, str], list[DependencyEdge]] = {}
    for e in g.edges:
        pair_edges.setdefault((e.src, e.dst), []).append(e)

    groups: list[tuple[list[str], list[DependencyEdge]]] = []
    for comp in comps:
        if bound is None or len(comp) <= bound:
            groups.append((comp, []))
            continue
        cset = set(comp)
        internal = {p for p in pair_edges if p[0] in cset and p[1] in cset}
        parts, removed = _split_oversize(comp, internal, bound)
        removed_edges = sorted(e for p in removed for e in pair_edges[p])
        for part in parts:
            pset = set(part)
            # removed edges are recorded on the part holding their source
            groups.append((part, [e for e in removed_edges if e.src in pset]))

    groups.sort(key=lambda t: t[0][0])
    width = len(str(len(groups)))
    clusters: list[EntityCluster] = []
    cluster_of: dict[str, str] = {}
    removed_pairs: set[tuple[str, str]] = set()
    for i, (members, removed_edges) in enumerate(groups):
        cid = f"c{i:0{width}d}"
        clusters.append(EntityCluster(cid, tuple(members), tuple(removed_edges)))
        for m in members:
            cluster_of[m] = cid
        removed_pairs.update((e.src, e.dst) for e in removed_edges)
    cedges = {
        (cluster_of[s], cluster_of[d])
        for (s, d) in pair_edges
        if cluster_of[s] != cluster_of[d] and (s, d) not in removed_pairs
    }
    return ClusterDAG(clusters, cedges, cluster_of, g.version)


def _state_of(slot: TypeSlot | SlotState) -> SlotState:
    return slot.state if isinstance(slot, TypeSlot) else slot


def select_targets(dag: ClusterDAG, slots: Mapping[str, TypeSlot | SlotState]) -> list[EntityCluster]:
    """Clusters that still need types and whose dependencies are all annotated.

    ``slots`` maps slot ids to slots (or bare states); entities without slots
    count as annotated.
    """
    per_entity: dict[str, list[SlotState]] = {}
    for slot_id, slot in slots.items():
        per_entity.setdefault(split_slot(slot_id)[0], []).append(_state_of(slot))

    def pending(c: EntityCluster) -> bool:
        return any(not s.annotated for m in c.members for s in per_entity.get(m, ()))

    by_id = dag.by_id()
    succ: dict[str, list[str]] = {}
    for s, d in dag.cluster_edges:
        succ.setdefault(s, []).append(d)
    ready = [
        c
        for c in dag.clusters
        if pending(c) and not any(pending(by_id[d]) for d in succ.get(c.cluster_id, ()))
    ]
    return sorted(ready, key=lambda c: (len(c.members), c.members[0]))
