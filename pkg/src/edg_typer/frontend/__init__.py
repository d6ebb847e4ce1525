"""Source model: loading, entity extraction, reference resolution, rewriting."""

from __future__ import annotations

from .entities import ParsedRepo, analyze, extract_entities
from .model import (
    CodeSpan,
    Entity,
    EntityIndex,
    EntityKind,
    RefKind,
    SlotState,
    StatementRef,
    TypeSlot,
    param_role,
    slot_key,
    split_slot,
)
from .refs import collect_statement_refs, resolve_statement_refs
from .repo import SourceRepo, load_repo, module_name
from .rewrite import (
    AnnotationArchive,
    apply_annotations,
    read_annotations,
    strip_annotations,
)
from .scope import Resolver

__all__ = [
    "AnnotationArchive",
    "CodeSpan",
    "Entity",
    "EntityIndex",
    "EntityKind",
    "ParsedRepo",
    "RefKind",
    "Resolver",
    "SlotState",
    "SourceRepo",
    "StatementRef",
    "TypeSlot",
    "analyze",
    "apply_annotations",
    "collect_statement_refs",
    "extract_entities",
    "load_repo",
    "module_name",
    "param_role",
    "read_annotations",
    "resolve_statement_refs",
    "slot_key",
    "split_slot",
    "strip_annotations",
]
