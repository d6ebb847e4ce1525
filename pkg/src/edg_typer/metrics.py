"""TypeSim / TypeExact scoring and introduced-error counts."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

from .errors import SlotUniverseMismatch
from .frontend.entities import extract_entities
from .frontend.model import EntityIndex, EntityKind
from .frontend.repo import SourceRepo
from .typeexpr import NONE, NormalizedType, normalize_type
from .validation import (
    REFINEMENT_IGNORED,
    Checker,
    CheckerConfig,
    Diagnostic,
    new_diagnostics,
)

log = logging.getLogger(__name__)

# error codes reported individually; everything else lands in "other"
TABLE_CODES = (
    "arg-type",
    "assignment",
    "attr-defined",
    "return-value",
    "call-arg",
    "override",
    "var-annotated",
    "name-defined",
)
OTHER = "other"

BASIC_HEADS = frozenset({"int", "float", "str", "bytes", NONE})
CONTAINER_HEADS = frozenset({"list", "dict", "set", "frozenset", "tuple", "collections.deque",
                             "collections.defaultdict", "collections.OrderedDict", "collections.Counter",
                             "collections.ChainMap", "collections.abc.Set"})
_CONTAINER_ABCS = frozenset({"Collection", "Container", "ItemsView", "Iterable", "Iterator", "KeysView",
                             "Mapping", "MappingView", "MutableMapping", "MutableSequence", "MutableSet",
                             "Reversible", "Sequence", "ValuesView", "AsyncIterable", "AsyncIterator"})


class Category(str, Enum):
    BASIC = "basic"
    CONTAINER = "container"
    UNION = "union"
    USER = "user-defined"
    OTHER = "other"


TypeLike = str | NormalizedType


def _norm(t: TypeLike) -> NormalizedType:
    return t if isinstance(t, NormalizedType) else normalize_type(t)


# -- catalog -----------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _builtin_table() -> tuple[frozenset[str], dict[str, frozenset[str]]]:
    raw = json.loads(resources.files("edg_typer.data").joinpath("builtin_attrs.json").read_text(encoding="utf-8"))
    return frozenset(raw["object_attrs"]), {k: frozenset(v) for k, v in raw["types"].items()}


@dataclass
class AttrCatalog:
    """Attribute sets per type head, before the ``object`` exclusion."""

    raw: dict[str, frozenset[str]]
    object_attrs: frozenset[str]
    _warned: set[str] = field(default_factory=set, repr=False)

    @classmethod
    def builtin(cls) -> AttrCatalog:
        obj, table = _builtin_table()
        return cls(dict(table), obj)

    @classmethod
    def for_repo(cls, repo: SourceRepo | EntityIndex) -> AttrCatalog:
        """Builtins plus every class defined in ``repo``."""
        cat = cls.builtin()
        index = repo if isinstance(repo, EntityIndex) else extract_entities(repo)
        members: dict[str, set[str]] = {}
        for e in index:
            if e.enclosing_class is not None:
                members.setdefault(e.enclosing_class, set()).add(e.short_name)
        classes = {e.id: e for e in index if e.kind is EntityKind.CLASS}

        def resolve(cid: str, seen: frozenset[str]) -> frozenset[str]:
            if cid in cat.raw:
                return cat.raw[cid]
            names = set(cat.object_attrs) | members.get(cid, set())
            for b in classes[cid].bases:
                if b in classes and b not in seen:
                    names |= resolve(b, seen | {b})
                elif b in cat.raw:
                    names |= cat.raw[b]
            cat.raw[cid] = frozenset(names)
            return cat.raw[cid]

        for cid in sorted(classes):
            resolve(cid, frozenset({cid}))
        return cat

    def lookup(self, head: str) -> frozenset[str]:
        got = self.raw.get(head)
        if got is None:
            if head not in self._warned:
                self._warned.add(head)
                log.warning("no attribute catalog entry for %s; treating it as empty", head)
            return frozenset()
        return got - self.object_attrs


def attrs_of(t: TypeLike, catalog: AttrCatalog) -> frozenset[str]:
    t = _norm(t)
    if t.is_any:
        return frozenset()
    if t.is_union:
        sets = [attrs_of(m, catalog) for m in t.args]
        return frozenset.intersection(*sets) if sets else frozenset()
    return catalog.lookup(t.head)


def type_sim(pred: TypeLike, truth: TypeLike, catalog: AttrCatalog) -> float:
    p, g = _norm(pred), _norm(truth)
    a, b = attrs_of(p, catalog), attrs_of(g, catalog)
    if not a and not b:
        return 1.0 if p == g else 0.0
    return len(a & b) / len(a | b)


def type_exact(pred: TypeLike, truth: TypeLike) -> bool:
    return _norm(pred) == _norm(truth)


def categorize(t: TypeLike, user_classes: Iterable[str] = ()) -> Category:
    t = _norm(t)
    if t.is_union:
        return Category.UNION
    if t.head in BASIC_HEADS:
        return Category.BASIC
    if t.head in CONTAINER_HEADS or (
        t.head.startswith("collections.abc.") and t.head.rsplit(".", 1)[1] in _CONTAINER_ABCS
    ):
        return Category.CONTAINER
    if t.head in set(user_classes):
        return Category.USER
    return Category.OTHER


# -- repo evaluation --------------------------------------------------------------------


@dataclass(frozen=True)
class SlotRecord:
    slot: str
    predicted: str | None
    truth: str
    sim: float
    exact: bool
    category: Category

    def to_json(self) -> dict:
        return {
            "slot": self.slot,
            "predicted": self.predicted,
            "truth": self.truth,
            "sim": self.sim,
            "exact": self.exact,
            "category": self.category.value,
        }


def _summary(records: list[SlotRecord]) -> dict:
    n = len(records)
    return {
        "slots": n,
        "type_sim": sum(r.sim for r in records) / n if n else 0.0,
        "type_exact": sum(r.exact for r in records) / n if n else 0.0,
    }


@dataclass
class EvalReport:
    records: list[SlotRecord]
    orphans: list[str] = field(default_factory=list)
    introduced_errors: dict[str, int] | None = None

    @property
    def mean_sim(self) -> float:
        return _summary(self.records)["type_sim"]

    @property
    def exact_rate(self) -> float:
        return _summary(self.records)["type_exact"]

    def by_category(self) -> dict[str, dict]:
        return {c.value: _summary([r for r in self.records if r.category is c]) for c in Category}

    def to_json(self) -> dict:
        out: dict[str, object] = {
            "summary": _summary(self.records),
            "categories": self.by_category(),
            "orphans": list(self.orphans),
            "records": [r.to_json() for r in self.records],
        }
        if self.introduced_errors is not None:
            out["introduced_errors"] = dict(self.introduced_errors)
            out["introduced_errors_total"] = sum(self.introduced_errors.values())
        return out

    def category_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["category", "slots", "type_sim", "type_exact"])
        for name, s in self.by_category().items():
            w.writerow([name, s["slots"], f"{s['type_sim']:.4f}", f"{s['type_exact']:.4f}"])
        return buf.getvalue()

    def table(self) -> str:
        rows = [("category", "slots", "TypeSim", "TypeExact")]
        for name, s in [*self.by_category().items(), ("all", _summary(self.records))]:
            rows.append((name, str(s["slots"]), f"{s['type_sim']:.3f}", f"{s['type_exact']:.3f}"))
        if self.introduced_errors is not None:
            rows.append(("", "", "", ""))
            rows.append(("error code", "count", "", ""))
            rows.extend((k, str(v), "", "") for k, v in self.introduced_errors.items())
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def evaluate_annotations(
    predicted: Mapping[str, str | None],
    truth: Mapping[str, str],
    catalog: AttrCatalog,
    user_classes: Iterable[str] = (),
) -> list[SlotRecord]:
    """Score each truth-annotated slot; a missing prediction scores zero."""
    users = frozenset(user_classes)
    out = []
    for slot in sorted(truth):
        g = normalize_type(truth[slot])
        p_text = predicted.get(slot)
        if p_text is None:
            out.append(SlotRecord(slot, None, g.text, 0.0, False, categorize(g, users)))
            continue
        p = normalize_type(p_text)
        out.append(SlotRecord(slot, p.text, g.text, type_sim(p, g, catalog), type_exact(p, g), categorize(g, users)))
    return out


def evaluate_repo_pair(pred_repo: SourceRepo, truth_repo: SourceRepo, strict: bool = True) -> EvalReport:
    """Compare the annotations of two versions of one repository.

    Slots are matched by id.  Orphans (slots known to only one side) are
    listed in the report; with ``strict`` they also raise
    :class:`SlotUniverseMismatch`, which carries the scored report.
    """
    pred_index = extract_entities(pred_repo)
    truth_index = extract_entities(truth_repo)
    pred_slots = {s.slot_id: s.annotation for s in pred_index.all_slots()}
    truth_slots = {s.slot_id: s.annotation for s in truth_index.all_slots()}
    orphans = sorted(set(pred_slots) ^ set(truth_slots))
    truth = {k: v for k, v in truth_slots.items() if v is not None and k in pred_slots}
    catalog = AttrCatalog.for_repo(truth_index)
    users = [e.id for e in truth_index if e.kind is EntityKind.CLASS]
    report = EvalReport(evaluate_annotations(pred_slots, truth, catalog, users), orphans)
    if orphans and strict:
        raise SlotUniverseMismatch(report, orphans)
    return report


def bucket_counts(diags: Iterable[Diagnostic]) -> dict[str, int]:
    counts = Counter(d.error_code if d.error_code in TABLE_CODES else OTHER for d in diags)
    return {k: counts.get(k, 0) for k in (*TABLE_CODES, OTHER)}


def count_introduced_errors(
    baseline: SourceRepo,
    annotated: SourceRepo,
    checker: Checker | None = None,
    ignored_codes: Iterable[str] = REFINEMENT_IGNORED,
) -> dict[str, int]:
    """Checker diagnostics present in ``annotated`` but not in ``baseline``,
    bucketed by error code."""
    own = checker is None
    chk = checker or Checker(CheckerConfig(daemon=False))
    try:
        before = chk.run_repo(baseline, ignored_codes)
        after = chk.run_repo(annotated, ignored_codes)
    finally:
        if own:
            chk.close()
    return bucket_counts(new_diagnostics(before, after))


__all__ = [
    "AttrCatalog",
    "Category",
    "EvalReport",
    "SlotRecord",
    "TABLE_CODES",
    "attrs_of",
    "bucket_counts",
    "categorize",
    "count_introduced_errors",
    "evaluate_annotations",
    "evaluate_repo_pair",
    "type_exact",
    "type_sim",
]
