"""Context building and oracle-driven refinement (dependency probing, type generation)."""

from __future__ import annotations

from collections.abc import MutableMapping
from dataclasses import dataclass, field

from ..edg import DependencyEdge, EdgeKind, EdgeOrigin
from ..errors import InvalidTypeExpression, MalformedResponse
from ..frontend.model import EntityIndex, EntityKind, TypeSlot
from ..frontend.scope import Resolver
from ..typeexpr import normalize_type
from .context import (
    DEFAULT_TOKEN_BUDGET,
    DependencySummary,
    InferenceContext,
    Task,
    build_context,
)
from .oracle import (
    HttpOracle,
    MissingRef,
    Oracle,
    OracleRequest,
    OracleResponse,
    ScriptedOracle,
    render_prompt,
)
from .rules import RuleOracle

MAX_PROBED_EDGES = 10

__all__ = [
    "DEFAULT_TOKEN_BUDGET",
    "CandidateAnnotation",
    "DependencySummary",
    "HttpOracle",
    "InferenceContext",
    "MissingDependencyReport",
    "MissingRef",
    "Oracle",
    "OracleRequest",
    "OracleResponse",
    "RuleOracle",
    "ScriptedOracle",
    "Task",
    "build_context",
    "ground_reference",
    "infer_cluster_types",
    "probe_missing_dependencies",
    "render_prompt",
]


@dataclass
class MissingDependencyReport:
    cluster_id: str
    proposed_edges: list[DependencyEdge] = field(default_factory=list)
    unresolved_refs: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.proposed_edges)

    def to_json(self) -> dict:
        return {
            "cluster": self.cluster_id,
            "proposed": [e.to_json() for e in self.proposed_edges],
            "unresolved": list(self.unresolved_refs),
        }


@dataclass(frozen=True)
class CandidateAnnotation:
    slot_id: str
    type_expr: str  # canonical text


def ground_reference(ref: str, index: EntityIndex, resolver: Resolver) -> str | None:
    """Entity id for a qualified name proposed by the oracle, if any."""
    if ref in index:
        return ref
    resolved = resolver.resolve_qualified(ref)
    if resolved in index:
        return resolved
    owner, _, attr = ref.rpartition(".")
    if owner:
        owner = owner if owner in index else resolver.resolve_qualified(owner)
        if owner in index and index[owner].kind is EntityKind.CLASS:
            return resolver.class_member(owner, attr)
    return None


def probe_missing_dependencies(
    ctx: InferenceContext, oracle: Oracle, index: EntityIndex, resolver: Resolver
) -> MissingDependencyReport:
    """Ask the oracle what the cluster still lacks and ground the answers to entities."""
    resp = oracle.complete(OracleRequest(Task.FIND_MISSING, ctx))
    report = MissingDependencyReport(ctx.cluster_id)
    members = set(ctx.members)
    seen: set[tuple[str, str]] = set()
    for m in resp.missing:
        target = ground_reference(m.target_ref, index, resolver)
        src = m.from_entity if m.from_entity in members else (ctx.members[0] if ctx.members else None)
        if target is None or src is None:
            report.unresolved_refs.append(m.target_ref)
            continue
        if target in members or (src, target) in seen:
            continue
        if len(report.proposed_edges) >= MAX_PROBED_EDGES:
            break
        seen.add((src, target))
        kind = EdgeKind.CALL if index[target].kind is EntityKind.FUNCTION else EdgeKind.ACCESS
        report.proposed_edges.append(DependencyEdge(src, target, kind, EdgeOrigin.PROBED))
    return report


def infer_cluster_types(
    ctx: InferenceContext,
    oracle: Oracle,
    slots: MutableMapping[str, TypeSlot],
    attempt_bound: int = 3,
) -> list[CandidateAnnotation]:
    """Request types for the context's target slots.

    Every request charges one attempt to each slot it asks about.  Malformed
    answers are retried with the parse error as feedback while attempts
    remain; slots that run out are simply absent from the result.
    """
    pending = [s for s in ctx.target_slots if slots[s].attempts < attempt_bound]
    out: list[CandidateAnnotation] = []
    feedback = list(ctx.feedback)
    while pending:
        for sid in pending:
            slots[sid].attempts += 1
        req_ctx = InferenceContext(
            ctx.cluster_id, ctx.member_definitions, list(pending), ctx.dependency_summaries, feedback, ctx.token_budget
        )
        retry: list[str] = []
        try:
            resp = oracle.complete(OracleRequest(Task.INFER_TYPES, req_ctx))
        except MalformedResponse as exc:
            feedback = feedback + [f"previous answer was malformed: {exc}"]
            pending = [s for s in pending if slots[s].attempts < attempt_bound]
            continue
        answered: dict[str, str] = {}
        for sid, expr in resp.annotations:
            if sid in pending and sid not in answered:
                answered[sid] = expr
        for sid in pending:
            if sid not in answered:
                continue  # partial answer: slot waits for a later wave
            try:
                canon = normalize_type(answered[sid]).text
            except InvalidTypeExpression as exc:
                feedback = feedback + [f"{sid}: {exc}"]
                retry.append(sid)
                continue
            out.append(CandidateAnnotation(sid, canon))
        pending = [s for s in retry if slots[s].attempts < attempt_bound]
    return out
