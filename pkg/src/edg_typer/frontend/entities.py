"""Entity extraction.

Entities are module-level variables, class attributes (declared in the class
body or assigned through ``self`` in a method), module-level functions,
methods and classes.  Locals and nested functions are never entities.
"""

from __future__ import annotations

import ast
import dataclasses
import logging
from collections.abc import Iterator
from dataclasses import dataclass

from ..errors import InvalidTypeExpression
from ..typeexpr import normalize_node
from .model import (
    CodeSpan,
    Entity,
    EntityIndex,
    EntityKind,
    SlotState,
    TypeSlot,
    param_role,
    slot_key,
)
from .repo import SourceRepo, module_name
from .scope import ModuleScope, Resolver, build_scope
from .text import LineMap

log = logging.getLogger(__name__)

_SKIP_VARS = {"__all__", "__slots__", "__match_args__"}
_ALIAS_FACTORIES = {"TypeVar", "ParamSpec", "TypeVarTuple", "NewType", "namedtuple", "NamedTuple", "TypedDict", "TypeAliasType"}
_FIELD_BASES = {"Enum", "IntEnum", "StrEnum", "Flag", "IntFlag", "NamedTuple", "TypedDict", "BaseModel"}
_FIELD_DECORATORS = {"dataclass", "dataclasses.dataclass", "attr.s", "attrs.define", "define", "attr.define", "frozen", "attrs.frozen", "attr.attrs", "pydantic_dataclass"}

FuncDef = (ast.FunctionDef, ast.AsyncFunctionDef)


def _dotted(node: ast.AST) -> str | None:
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Call):
        return _dotted(node.func)
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return ".".join(reversed(parts))


def decorator_names(node: ast.AST) -> list[str]:
    return [d for d in (_dotted(x) for x in getattr(node, "decorator_list", [])) if d]


def is_static(fn: ast.AST) -> bool:
    return any(d.rsplit(".", 1)[-1] == "staticmethod" for d in decorator_names(fn))


def is_field_class(cls: ast.ClassDef) -> bool:
    """Classes whose class-level assignments are fields (annotating them changes semantics)."""
    if any(d in _FIELD_DECORATORS or d.endswith(".dataclass") for d in decorator_names(cls)):
        return True
    for base in cls.bases:
        name = _dotted(base)
        if name and (name.rsplit(".", 1)[-1] in _FIELD_BASES or name.endswith("Enum")):
            return True
    return False


def _alias_like(value: ast.expr | None, annotation: ast.expr | None = None) -> bool:
    if annotation is not None:
        ann = _dotted(annotation)
        if ann and ann.rsplit(".", 1)[-1] == "TypeAlias":
            return True
    if value is None:
        return False
    if isinstance(value, ast.Call):
        name = _dotted(value.func)
        return bool(name and name.rsplit(".", 1)[-1] in _ALIAS_FACTORIES)
    if isinstance(value, ast.Subscript):
        return _dotted(value.value) is not None
    if isinstance(value, ast.BinOp) and isinstance(value.op, ast.BitOr):
        return _alias_like(value.left) or _dotted(value.left) is not None
    name = _dotted(value)
    if name:
        last = name.rsplit(".", 1)[-1]
        return last[:1].isupper() and not last.isupper()
    return False


@dataclass
class DefSite:
    id: str
    kind: EntityKind
    node: ast.AST
    target: ast.expr | None = None  # variables: Name / self-Attribute target
    class_id: str | None = None
    skip_first: bool = False  # methods: first parameter gets no slot

    def params(self) -> list[ast.arg]:
        a = self.node.args
        params = list(a.posonlyargs) + list(a.args)
        if self.skip_first and params:
            params = params[1:]
        if a.vararg:
            params.append(a.vararg)
        params.extend(a.kwonlyargs)
        if a.kwarg:
            params.append(a.kwarg)
        return params


def _self_assign_target(stmt: ast.stmt, self_name: str) -> ast.Attribute | None:
    if isinstance(stmt, ast.Assign) and len(stmt.targets) == 1:
        t = stmt.targets[0]
    elif isinstance(stmt, ast.AnnAssign):
        t = stmt.target
    else:
        return None
    if isinstance(t, ast.Attribute) and isinstance(t.value, ast.Name) and t.value.id == self_name:
        return t
    return None


def _walk_stmts(body: list[ast.stmt]) -> Iterator[ast.stmt]:
    """Statements in a function body, not descending into nested scopes."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            continue
        for name in ("body", "orelse", "finalbody"):
            yield from _walk_stmts(getattr(stmt, name, []) or [])
        for h in getattr(stmt, "handlers", []) or []:
            yield from _walk_stmts(h.body)
        for case in getattr(stmt, "cases", []) or []:
            yield from _walk_stmts(case.body)


def iter_defs(tree: ast.Module, module: str) -> list[DefSite]:
    """Every entity definition site in a module, in source order."""
    out: list[DefSite] = []
    taken: set[str] = set()

    def fresh(qual: str) -> str:
        if qual not in taken:
            taken.add(qual)
            return qual
        n = 2
        while f"{qual}~{n}" in taken:
            n += 1
        taken.add(f"{qual}~{n}")
        return f"{qual}~{n}"

    def walk(body: list[ast.stmt], prefix: str, class_id: str | None, field_class: bool) -> None:
        overloaded = {
            s.name
            for s in body
            if isinstance(s, FuncDef) and any(d.rsplit(".", 1)[-1] == "overload" for d in decorator_names(s))
        }
        for stmt in body:
            if isinstance(stmt, ast.ClassDef):
                cid = fresh(f"{prefix}.{stmt.name}")
                out.append(DefSite(cid, EntityKind.CLASS, stmt, class_id=class_id))
                walk(stmt.body, cid, cid, is_field_class(stmt))
                _instance_attrs(stmt, cid)
            elif isinstance(stmt, FuncDef):
                if stmt.name in overloaded:
                    continue
                fid = fresh(f"{prefix}.{stmt.name}")
                skip = class_id is not None and not is_static(stmt)
                out.append(DefSite(fid, EntityKind.FUNCTION, stmt, class_id=class_id, skip_first=skip))
            elif isinstance(stmt, (ast.Assign, ast.AnnAssign)):
                if class_id is not None and field_class:
                    continue
                if isinstance(stmt, ast.Assign):
                    if len(stmt.targets) != 1 or _alias_like(stmt.value):
                        continue
                    target = stmt.targets[0]
                else:
                    if not stmt.simple or _alias_like(stmt.value, stmt.annotation):
                        continue
                    target = stmt.target
                if not isinstance(target, ast.Name) or target.id in _SKIP_VARS:
                    continue
                qual = f"{prefix}.{target.id}"
                if qual in taken:
                    continue
                taken.add(qual)
                out.append(DefSite(qual, EntityKind.VARIABLE, stmt, target=target, class_id=class_id))

    def _instance_attrs(cls: ast.ClassDef, cid: str) -> None:
        for fn in cls.body:
            if not isinstance(fn, FuncDef) or is_static(fn):
                continue
            args = list(fn.args.posonlyargs) + list(fn.args.args)
            if not args:
                continue
            self_name = args[0].arg
            for stmt in _walk_stmts(fn.body):
                target = _self_assign_target(stmt, self_name)
                if target is None or target.attr in _SKIP_VARS:
                    continue
                if isinstance(stmt, ast.AnnAssign) and _alias_like(None, stmt.annotation):
                    continue
                qual = f"{cid}.{target.attr}"
                if qual in taken:
                    continue
                taken.add(qual)
                out.append(DefSite(qual, EntityKind.VARIABLE, stmt, target=target, class_id=cid))

    walk(tree.body, module, None, False)
    return out


def _span(path: str, lm: LineMap, node: ast.AST) -> CodeSpan:
    start_line, start_col = node.lineno, node.col_offset
    decorators = getattr(node, "decorator_list", None)
    if decorators:
        start_line = decorators[0].lineno
        start_col = max(decorators[0].col_offset - 1, 0)
    return CodeSpan(
        path,
        start_line,
        lm.char_col(start_line, start_col),
        node.end_lineno,
        lm.char_col(node.end_lineno, node.end_col_offset),
    )


def _annotation_text(node: ast.expr | None, resolve) -> str | None:
    if node is None:
        return None
    try:
        return normalize_node(node, resolve).text
    except InvalidTypeExpression:
        return ast.unparse(node)


def _slot(entity_id: str, role: str, annotation: ast.expr | None, resolve) -> TypeSlot:
    text = _annotation_text(annotation, resolve)
    if text is None:
        return TypeSlot(slot_key(entity_id, role))
    return TypeSlot(slot_key(entity_id, role), text, SlotState.VALIDATED)


@dataclass
class ParsedRepo:
    repo: SourceRepo
    trees: dict[str, ast.Module]
    modules: dict[str, str]  # path -> module name
    scopes: dict[str, ModuleScope]
    parse_errors: list[tuple[str, str]]

    @classmethod
    def parse(cls, repo: SourceRepo) -> ParsedRepo:
        trees: dict[str, ast.Module] = {}
        errors: list[tuple[str, str]] = []
        for path, text in repo.files:
            try:
                trees[path] = ast.parse(text, filename=path)
            except SyntaxError as exc:
                log.warning("skipping %s: %s (line %s)", path, exc.msg, exc.lineno)
                errors.append((path, f"{exc.lineno}: {exc.msg}"))
        modules = {p: module_name(p) for p in trees}
        known = set(modules.values())
        scopes = {modules[p]: build_scope(modules[p], p, t, known) for p, t in trees.items()}
        return cls(repo, trees, modules, scopes, errors)


def build_entities(parsed: ParsedRepo) -> tuple[EntityIndex, Resolver]:
    entities: dict[str, Entity] = {}
    provisional = Resolver(parsed.scopes, {})
    pending: list[tuple[DefSite, str, CodeSpan, str]] = []
    for path, tree in parsed.trees.items():
        module = parsed.modules[path]
        lm = LineMap(parsed.repo.text(path))
        for site in iter_defs(tree, module):
            if site.id in entities:
                continue
            node = site.node
            span = _span(path, lm, node)
            if site.kind is EntityKind.CLASS:
                body_start = node.body[0]
                if (
                    isinstance(body_start, ast.Expr)
                    and isinstance(body_start.value, ast.Constant)
                    and isinstance(body_start.value.value, str)
                    and len(node.body) > 1
                ):
                    body_start = node.body[1]
                text = lm.segment_lines(span.start_line, max(body_start.lineno - 1, node.lineno))
                bases = tuple(b for b in (_dotted(x) for x in node.bases) if b)
                entities[site.id] = Entity(
                    site.id, site.kind, module, span, text, (), site.class_id,
                    tuple(provisional.lookup(module, b) or b for b in bases),
                )
            else:
                pending.append((site, module, span, lm.segment_lines(span.start_line, span.end_line)))
    # class-only resolver: enough for annotation names and member lookup
    resolver = Resolver(parsed.scopes, entities)
    for eid, ent in list(entities.items()):
        if ent.bases:
            entities[eid] = dataclasses.replace(ent, bases=tuple(resolver.resolve_qualified(b) for b in ent.bases))
    resolver = Resolver(parsed.scopes, entities)
    all_ids = set(entities) | {p[0].id for p in pending}
    for site, module, span, text in pending:
        if site.id in entities:
            continue
        if isinstance(site.target, ast.Attribute) and any(
            f"{cid}.{site.target.attr}" in all_ids for cid in resolver.mro(site.class_id)[1:]
        ):
            continue  # assigns an attribute some base class already declares
        resolve = resolver.resolver_for(module)
        node = site.node
        if site.kind is EntityKind.FUNCTION:
            slots = [_slot(site.id, param_role(p.arg), p.annotation, resolve) for p in site.params()]
            slots.append(_slot(site.id, "return", node.returns, resolve))
        else:
            ann = node.annotation if isinstance(node, ast.AnnAssign) else None
            slots = [_slot(site.id, "var", ann, resolve)]
        entities[site.id] = Entity(site.id, site.kind, module, span, text, tuple(slots), site.class_id)
    ordered = dict(sorted(entities.items(), key=lambda kv: (kv[1].file, kv[1].defining_span.start_line, kv[0])))
    return EntityIndex(ordered, list(parsed.parse_errors)), Resolver(parsed.scopes, ordered)


def extract_entities(repo: SourceRepo) -> EntityIndex:
    index, _ = build_entities(ParsedRepo.parse(repo))
    return index


def analyze(repo: SourceRepo) -> tuple[ParsedRepo, EntityIndex, Resolver]:
    parsed = ParsedRepo.parse(repo)
    index, resolver = build_entities(parsed)
    return parsed, index, resolver
