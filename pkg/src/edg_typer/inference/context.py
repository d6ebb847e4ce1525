from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

from ..edg import ClusterDAG, EntityCluster
from ..errors import OversizeCluster
from ..frontend.model import EntityIndex, TypeSlot, split_slot

DEFAULT_TOKEN_BUDGET = 16000


class Task(str, Enum):
    FIND_MISSING = "FindMissing"
    INFER_TYPES = "InferTypes"


@dataclass(frozen=True)
class DependencySummary:
    entity_id: str
    slot_id: str
    annotation: str
    distance: int = 1


@dataclass
class InferenceContext:
    """What the oracle gets to see about one cluster.

    Dependencies contribute annotations only, never their code.
    """

    cluster_id: str
    member_definitions: list[tuple[str, str]]
    target_slots: list[str]
    dependency_summaries: list[DependencySummary] = field(default_factory=list)
    feedback: list[str] = field(default_factory=list)
    token_budget: int = DEFAULT_TOKEN_BUDGET
    truncated: int = 0  # summaries dropped to fit the budget

    @property
    def members(self) -> list[str]:
        return [m for m, _ in self.member_definitions]

    def to_wire(self, task: Task) -> dict:
        return {
            "task": task.value,
            "cluster_id": self.cluster_id,
            "cluster": [{"id": i, "code": c} for i, c in self.member_definitions],
            "slots": list(self.target_slots),
            "deps": [{"slot": d.slot_id, "type": d.annotation} for d in self.dependency_summaries],
            "feedback": list(self.feedback),
        }

    def serialize(self, task: Task = Task.INFER_TYPES) -> str:
        return json.dumps(self.to_wire(task), sort_keys=True, ensure_ascii=False)

    def __len__(self) -> int:
        return len(self.serialize())


def build_context(
    cluster: EntityCluster,
    dag: ClusterDAG,
    index: EntityIndex,
    slots: Mapping[str, TypeSlot],
    feedback: Sequence[str] | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
    attempt_bound: int = 3,
) -> InferenceContext:
    members = sorted(cluster.members)
    definitions = [(m, index[m].definition_text) for m in members]
    targets = [
        sid
        for m in members
        for sid in index[m].slot_ids()
        if sid in slots and not slots[sid].state.annotated and slots[sid].attempts < attempt_bound
    ]
    if feedback is None:
        seen: dict[str, None] = {}
        for sid in targets:
            for line in slots[sid].feedback:
                seen.setdefault(line, None)
        feedback = list(seen)

    # dependency entities with their distance from the cluster
    dist: dict[str, int] = {}
    by_id = dag.by_id()
    for cid, d in dag.dependency_closure(cluster.cluster_id).items():
        for m in by_id[cid].members:
            dist[m] = min(d, dist.get(m, d))
    # edges cut during decomposition still carry useful context
    for e in cluster.removed_internal_edges:
        if e.src in cluster.members and e.dst not in cluster.members:
            dist.setdefault(e.dst, 1)
    for m in members:
        dist[m] = 0
    summaries = []
    for ent_id, d in sorted(dist.items(), key=lambda kv: (kv[1], kv[0])):
        if ent_id not in index:
            continue
        for sid in index[ent_id].slot_ids():
            slot = slots.get(sid)
            if slot is None or not slot.state.annotated or slot.annotation is None:
                continue
            summaries.append(DependencySummary(ent_id, sid, slot.annotation, d))

    ctx = InferenceContext(cluster.cluster_id, definitions, targets, [], list(feedback), token_budget)
    if len(ctx) > token_budget:
        # feedback is dropped before giving up on the cluster
        ctx.feedback = []
        if len(ctx) > token_budget:
            raise OversizeCluster(
                f"cluster {cluster.cluster_id} needs {len(ctx)} characters; budget is {token_budget}"
            )
    # greedy fill, nearest first; whatever does not fit is cut from the far end
    ctx.dependency_summaries = summaries
    size = len(ctx)
    if size > token_budget:
        kept = list(summaries)
        while kept and size > token_budget:
            dropped = kept.pop()
            # one entry costs roughly its JSON object plus a separator
            size -= len(json.dumps({"slot": dropped.slot_id, "type": dropped.annotation}, sort_keys=True, ensure_ascii=False)) + 2
        ctx.dependency_summaries = kept
        while kept and len(ctx) > token_budget:
            kept.pop()
        ctx.truncated = len(summaries) - len(kept)
    return ctx


def slot_entity(slot_id: str) -> str:
    return split_slot(slot_id)[0]
