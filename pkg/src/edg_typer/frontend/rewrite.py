"""Span-based annotation stripping and insertion.

Edits are computed as character ranges on the original text, so everything
outside an edited span survives byte-for-byte.  Insertions are the exact
inverse of removals (``: T`` after a name, `` -> T`` after the parameter
list), which is what makes strip/apply round-trip.
"""

from __future__ import annotations

import ast
import io
import json
import re
import tokenize
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import InvalidTypeExpression, SourceParseError, UnknownSlot
from ..typeexpr import BUILTIN_NAMES, normalize_type, render_type
from .entities import DefSite, FuncDef, decorator_names, is_field_class, iter_defs
from .model import param_role, slot_key, split_slot
from .repo import SourceRepo, module_name
from .scope import ModuleScope, Resolver, build_scope
from .text import LineMap, apply_edits

BLOCK_START = "# edg-typer imports"
BLOCK_END = "# end edg-typer imports"

_DOC_TYPE_LINE = re.compile(r"^\s*:(type|rtype)\b")


@dataclass
class AnnotationArchive:
    """Annotations removed by :func:`strip_annotations`, keyed by slot id."""

    entries: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> list[dict[str, str]]:
        return [{"slot": k, "type": v} for k, v in sorted(self.entries.items())]

    @classmethod
    def from_json(cls, data: list[dict[str, str]]) -> AnnotationArchive:
        return cls({d["slot"]: d["type"] for d in data})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> AnnotationArchive:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def __len__(self) -> int:
        return len(self.entries)


def _parse(path: str, text: str) -> ast.Module:
    try:
        return ast.parse(text, filename=path)
    except SyntaxError as exc:
        raise SourceParseError(path, exc.lineno, exc.msg) from None


def _block_span(text: str) -> tuple[int, int] | None:
    """Character range of the marked import block (whole lines)."""
    start = text.find(BLOCK_START + "\n")
    if start == -1 or (start > 0 and text[start - 1] != "\n"):
        return None
    end = text.find(BLOCK_END, start)
    if end == -1:
        return None
    nl = text.find("\n", end)
    return start, (len(text) if nl == -1 else nl + 1)


def _arrow_span_start(text: str, returns_start: int) -> int:
    """Offset just after the ``)`` preceding ``-> <returns>``."""
    i = returns_start
    while i > 0 and text[i - 1] in " \t\\\r\n":
        i -= 1
    if text[i - 2 : i] != "->":
        raise ValueError("return annotation without '->'")
    i -= 2
    while i > 0 and text[i - 1] in " \t\\\r\n":
        i -= 1
    return i


def _close_paren_offset(text: str, lm: LineMap, fn: ast.AST) -> int:
    """Offset just after the closing parenthesis of ``fn``'s parameter list."""
    start = lm.offset(fn.lineno, fn.col_offset)
    stop = lm.node_start(fn.body[0])
    header = text[start:stop]
    depth = 0
    seen_open = False
    try:
        for tok in tokenize.generate_tokens(io.StringIO(header).readline):
            if tok.type != tokenize.OP:
                continue
            if tok.string == "(":
                depth += 1
                seen_open = True
            elif tok.string == ")":
                depth -= 1
                if seen_open and depth == 0:
                    row, col = tok.end
                    lines = header.splitlines(keepends=True)
                    return start + sum(len(x) for x in lines[: row - 1]) + col
    except (tokenize.TokenError, IndentationError, SyntaxError):
        pass
    raise ValueError(f"cannot locate parameter list at line {fn.lineno}")


def _docstring_nodes(tree: ast.Module) -> Iterable[ast.Constant]:
    for node in ast.walk(tree):
        if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            body = node.body
            if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant):
                if isinstance(body[0].value.value, str):
                    yield body[0].value


def _strippable_functions(tree: ast.Module) -> Iterable[ast.AST]:
    for node in ast.walk(tree):
        if isinstance(node, FuncDef):
            if any(d.rsplit(".", 1)[-1] == "overload" for d in decorator_names(node)):
                continue
            yield node


def _field_class_bodies(tree: ast.Module) -> set[int]:
    ids: set[int] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ClassDef) and is_field_class(node):
            ids.update(id(s) for s in node.body)
    return ids


def _is_type_alias(stmt: ast.AnnAssign) -> bool:
    ann = stmt.annotation
    name = ann.attr if isinstance(ann, ast.Attribute) else getattr(ann, "id", "")
    return name == "TypeAlias"


def _strip_file(path: str, text: str, module: str) -> tuple[str, dict[str, str]]:
    archive: dict[str, str] = {}
    block = _block_span(text)
    edits: list[tuple[int, int, str]] = []
    if block is not None:
        edits.append((block[0], block[1], ""))
    tree = _parse(path, text)
    lm = LineMap(text)

    # slot ids for archiving
    param_slots: dict[int, str] = {}
    return_slots: dict[int, str] = {}
    var_slots: dict[int, str] = {}
    for site in iter_defs(tree, module):
        if site.kind.value == "Function":
            for p in site.params():
                param_slots[id(p)] = slot_key(site.id, param_role(p.arg))
            return_slots[id(site.node)] = slot_key(site.id, "return")
        elif site.kind.value == "Variable":
            var_slots[id(site.node)] = slot_key(site.id, "var")

    for fn in _strippable_functions(tree):
        a = fn.args
        for p in [*a.posonlyargs, *a.args, a.vararg, *a.kwonlyargs, a.kwarg]:
            if p is None or p.annotation is None:
                continue
            name_end = lm.node_start(p) + len(p.arg)
            edits.append((name_end, lm.node_end(p.annotation), ""))
            if id(p) in param_slots:
                archive[param_slots[id(p)]] = ast.get_source_segment(text, p.annotation) or ast.unparse(p.annotation)
        if fn.returns is not None:
            start = _arrow_span_start(text, lm.node_start(fn.returns))
            edits.append((start, lm.node_end(fn.returns), ""))
            if id(fn) in return_slots:
                archive[return_slots[id(fn)]] = ast.get_source_segment(text, fn.returns) or ast.unparse(fn.returns)

    field_body = _field_class_bodies(tree)
    for node in ast.walk(tree):
        if not isinstance(node, ast.AnnAssign) or node.value is None or id(node) in field_body:
            continue
        if _is_type_alias(node):
            continue
        if not isinstance(node.target, (ast.Name, ast.Attribute)):
            continue
        edits.append((lm.node_end(node.target), lm.node_end(node.annotation), ""))
        if id(node) in var_slots:
            archive[var_slots[id(node)]] = ast.get_source_segment(text, node.annotation) or ast.unparse(node.annotation)

    for doc in _docstring_nodes(tree):
        for line in range(doc.lineno, doc.end_lineno + 1):
            raw = lm.line_text(line)
            if line not in (doc.lineno, doc.end_lineno) and _DOC_TYPE_LINE.match(raw):
                s = lm.starts[line - 1]
                edits.append((s, s + len(raw), ""))
    return apply_edits(text, edits), archive


def strip_annotations(repo: SourceRepo) -> tuple[SourceRepo, AnnotationArchive]:
    """Remove annotations (and the marked import block) from every file.

    Archived types are the source spelling of each removed entity annotation.
    Bare declarations (``x: int`` without a value) and fields of
    dataclass-like classes are left alone because removing them changes
    runtime behaviour.
    """
    archive = AnnotationArchive()
    updates: dict[str, str] = {}
    for path, text in repo.files:
        new_text, entries = _strip_file(path, text, module_name(path))
        archive.entries.update(entries)
        if new_text != text:
            updates[path] = new_text
    return (repo.replace(updates) if updates else repo), archive


# -- insertion --------------------------------------------------------------

_SCOPE_CACHE: dict[tuple[str, int, int], ModuleScope] = {}


def _scope_for(path: str, text: str, known: set[str]) -> ModuleScope:
    key = (path, hash(text), len(known))
    scope = _SCOPE_CACHE.get(key)
    if scope is None:
        try:
            tree = ast.parse(text, filename=path)
        except SyntaxError:
            tree = ast.Module(body=[], type_ignores=[])
        scope = build_scope(module_name(path), path, tree, known)
        if len(_SCOPE_CACHE) > 4096:
            _SCOPE_CACHE.clear()
        _SCOPE_CACHE[key] = scope
    return scope



def _module_for(qualified: str, known_modules: set[str]) -> tuple[str, list[str]]:
    parts = qualified.split(".")
    for i in range(len(parts) - 1, 0, -1):
        mod = ".".join(parts[:i])
        if mod in known_modules:
            return mod, parts[i:]
    if qualified.startswith("collections.abc."):
        return "collections.abc", parts[2:]
    return ".".join(parts[:-1]), parts[-1:]


class _Namer:
    """Chooses how a qualified name is spelled in one file, collecting imports."""

    def __init__(
        self, scope: ModuleScope, known_modules: set[str], existing_block: list[str], follow=lambda q: q
    ) -> None:
        self.scope = scope
        self.known = known_modules
        self.imports: set[str] = set(existing_block)
        self.bound: set[str] = set(scope.bindings)
        # longest target first so nested members win over their container
        self.targets = sorted(
            ((follow(b.target), name) for name, b in scope.bindings.items()), key=lambda t: (-len(t[0]), t[1])
        )

    def __call__(self, qualified: str) -> str:
        if "." not in qualified:
            return qualified
        for target, name in self.targets:
            if qualified == target:
                return name
            if qualified.startswith(target + "."):
                return name + qualified[len(target) :]
        module, attrs = _module_for(qualified, self.known)
        if not module:
            return qualified
        head = attrs[0]
        local = head
        if local in self.bound or local in BUILTIN_NAMES:
            local = f"_{module.replace('.', '_')}_{head}"
        line = f"from {module} import {head}" + (f" as {local}" if local != head else "")
        self.imports.add(line)
        self.bound.add(local)
        self.targets.append((f"{module}.{head}", local))
        self.targets.sort(key=lambda t: (-len(t[0]), t[1]))
        return ".".join([local] + attrs[1:])


def _block_insert_offset(text: str, tree: ast.Module, lm: LineMap) -> int:
    body = tree.body
    last_line = 0
    i = 0
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant) and isinstance(body[0].value.value, str):
        last_line = body[0].end_lineno
        i = 1
    while i < len(body) and isinstance(body[i], (ast.Import, ast.ImportFrom)):
        last_line = body[i].end_lineno
        i += 1
    if last_line == 0:
        if body:
            return lm.starts[body[0].lineno - 1]
        return len(text)
    return lm.starts[last_line] if last_line < len(lm.starts) else len(text)


def _locate_slot(site: DefSite, role: str) -> tuple[str, ast.AST]:
    if role == "var":
        return "var", site.node
    if role == "return":
        return "return", site.node
    name = role.split(":", 1)[1]
    for p in site.params():
        if p.arg == name:
            return "param", p
    raise UnknownSlot(slot_key(site.id, role))


def apply_annotations(repo: SourceRepo, bindings: dict[str, str]) -> SourceRepo:
    """Insert annotations for ``bindings`` (slot id -> type expression).

    Names in the types are spelled relative to each file's imports; anything
    not yet importable gets a line in the marked import block.
    """
    if not bindings:
        return repo
    by_file: dict[str, dict[str, list[tuple[str, str]]]] = {}
    paths_by_module = {module_name(p): p for p in repo.paths}
    known = set(paths_by_module)
    normalized: dict[str, object] = {}
    for slot, expr in bindings.items():
        try:
            normalized[slot] = normalize_type(expr)
        except InvalidTypeExpression as exc:
            raise InvalidTypeExpression(f"{slot}: {exc}") from None
    # map slot -> file by walking the module prefixes of the entity id
    for slot in sorted(bindings):
        entity, role = split_slot(slot)
        parts = entity.split(".")
        path = None
        for i in range(len(parts) - 1, 0, -1):
            cand = ".".join(parts[:i])
            if cand in paths_by_module:
                path = paths_by_module[cand]
                break
        if path is None:
            raise UnknownSlot(slot)
        by_file.setdefault(path, {}).setdefault(entity, []).append((role, slot))

    scopes = {module_name(p): _scope_for(p, t, known) for p, t in repo.files}
    follow = Resolver(scopes, {})
    updates: dict[str, str] = {}
    for path, per_entity in by_file.items():
        text = repo.text(path)
        module = module_name(path)
        tree = _parse(path, text)
        lm = LineMap(text)
        sites = {s.id: s for s in iter_defs(tree, module)}
        block = _block_span(text)
        existing: list[str] = []
        if block is not None:
            existing = [
                ln.strip() for ln in text[block[0] : block[1]].splitlines()[1:-1] if ln.strip()
            ]
        namer = _Namer(scopes[module], known, existing, follow.resolve_qualified)
        edits: list[tuple[int, int, str]] = []
        for entity, roles in sorted(per_entity.items()):
            site = sites.get(entity)
            if site is None:
                raise UnknownSlot(roles[0][1])
            for role, slot in sorted(roles):
                rendered = render_type(normalized[slot], namer)
                where, node = _locate_slot(site, role)
                if where == "param":
                    name_end = lm.node_start(node) + len(node.arg)
                    end = lm.node_end(node.annotation) if node.annotation is not None else name_end
                    edits.append((name_end, end, f": {rendered}"))
                elif where == "return":
                    if node.returns is not None:
                        start = _arrow_span_start(text, lm.node_start(node.returns))
                        edits.append((start, lm.node_end(node.returns), f" -> {rendered}"))
                    else:
                        pos = _close_paren_offset(text, lm, node)
                        edits.append((pos, pos, f" -> {rendered}"))
                else:
                    target = site.target
                    t_end = lm.node_end(target)
                    end = lm.node_end(node.annotation) if isinstance(node, ast.AnnAssign) else t_end
                    edits.append((t_end, end, f": {rendered}"))
        if namer.imports != set(existing):
            lines = sorted(namer.imports)
            block_text = "\n".join([BLOCK_START, *lines, BLOCK_END]) + "\n"
            if block is not None:
                edits.append((block[0], block[1], block_text))
            else:
                pos = _block_insert_offset(text, tree, lm)
                prefix = "\n" if pos == len(text) and text and not text.endswith("\n") else ""
                edits.append((pos, pos, prefix + block_text))
        new_text = apply_edits(text, edits)
        updates[path] = new_text
    return repo.replace(updates)


def read_annotations(repo: SourceRepo) -> dict[str, str]:
    """Current annotation (canonical text) of every annotated entity slot."""
    from .entities import extract_entities

    return {s.slot_id: s.annotation for s in extract_entities(repo).all_slots() if s.annotation is not None}
