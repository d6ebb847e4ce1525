from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class EntityKind(str, Enum):
    VARIABLE = "Variable"
    FUNCTION = "Function"
    CLASS = "Class"


class SlotState(str, Enum):
    UNANNOTATED = "Unannotated"
    INFERRED = "Inferred"
    VALIDATED = "Validated"
    FALLBACK = "Fallback"

    @property
    def annotated(self) -> bool:
        return self is not SlotState.UNANNOTATED


class RefKind(str, Enum):
    CALL = "call"
    READ = "read"
    WRITE = "write"
    INHERIT = "inherit"


def slot_key(entity_id: str, role: str) -> str:
    """Serialized slot id, ``"entity_id#role"``."""
    return f"{entity_id}#{role}"


def split_slot(slot_id: str) -> tuple[str, str]:
    entity, _, role = slot_id.rpartition("#")
    if not entity:
        raise ValueError(f"malformed slot id {slot_id!r}")
    return entity, role


def param_role(name: str) -> str:
    return f"param:{name}"


@dataclass(frozen=True, order=True)
class CodeSpan:
    """1-based lines, 0-based character columns; end is exclusive."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line

    def contains(self, other: CodeSpan) -> bool:
        return (
            self.file == other.file
            and (self.start_line, self.start_col) <= (other.start_line, other.start_col)
            and (other.end_line, other.end_col) <= (self.end_line, self.end_col)
        )

    @property
    def n_lines(self) -> int:
        return self.end_line - self.start_line + 1


@dataclass
class TypeSlot:
    slot_id: str
    annotation: str | None = None
    state: SlotState = SlotState.UNANNOTATED
    attempts: int = 0
    feedback: list[str] = field(default_factory=list)

    @property
    def entity_id(self) -> str:
        return split_slot(self.slot_id)[0]

    @property
    def role(self) -> str:
        return split_slot(self.slot_id)[1]

    def copy(self) -> TypeSlot:
        return TypeSlot(self.slot_id, self.annotation, self.state, self.attempts, list(self.feedback))

    def to_json(self) -> dict:
        return {
            "slot": self.slot_id,
            "annotation": self.annotation,
            "state": self.state.value,
            "attempts": self.attempts,
            "feedback": list(self.feedback),
        }

    @classmethod
    def from_json(cls, data: dict) -> TypeSlot:
        return cls(
            data["slot"], data["annotation"], SlotState(data["state"]), int(data["attempts"]), list(data["feedback"])
        )


@dataclass(frozen=True)
class Entity:
    id: str
    kind: EntityKind
    module: str
    defining_span: CodeSpan
    definition_text: str
    slots: tuple[TypeSlot, ...] = ()
    enclosing_class: str | None = None
    bases: tuple[str, ...] = ()  # classes only: resolved base names

    @property
    def file(self) -> str:
        return self.defining_span.file

    @property
    def short_name(self) -> str:
        return self.id.rsplit(".", 1)[-1].split("~", 1)[0]

    def slot_ids(self) -> list[str]:
        return [s.slot_id for s in self.slots]


@dataclass(frozen=True)
class StatementRef:
    owner: str
    statement_span: CodeSpan
    referenced: tuple[tuple[str, RefKind], ...]


@dataclass
class EntityIndex:
    """Entities by id plus the per-file bookkeeping the resolver needs."""

    entities: dict[str, Entity]
    parse_errors: list[tuple[str, str]] = field(default_factory=list)

    def __getitem__(self, entity_id: str) -> Entity:
        return self.entities[entity_id]

    def __contains__(self, entity_id: object) -> bool:
        return entity_id in self.entities

    def __iter__(self):
        return iter(self.entities.values())

    def __len__(self) -> int:
        return len(self.entities)

    def ids(self) -> list[str]:
        return list(self.entities)

    def all_slots(self) -> list[TypeSlot]:
        return [s for e in self.entities.values() for s in e.slots]

    def slot_owner(self, slot_id: str) -> Entity:
        return self.entities[split_slot(slot_id)[0]]

    def in_file(self, path: str) -> list[Entity]:
        return [e for e in self.entities.values() if e.file == path]
