"""Statement-level reference resolution.

For every statement in an entity's definition we record which entities it
touches and how (call / read / write / inherit).  Resolution covers lexical
names, import aliases, ``self``/``cls`` attribute access inside a class and
``super()`` member lookup; attribute chains rooted at untyped locals produce
nothing and are left for dependency probing.
"""

from __future__ import annotations

import ast
from collections.abc import Iterator

from .entities import DefSite, FuncDef, ParsedRepo, build_entities, is_static, iter_defs
from .model import CodeSpan, EntityIndex, EntityKind, RefKind, StatementRef
from .repo import SourceRepo
from .scope import Resolver
from .text import LineMap


def _function_locals(fn: ast.AST) -> tuple[set[str], set[str]]:
    """(local names, names declared global/nonlocal) for a function and its nested scopes."""
    local: set[str] = set()
    declared: set[str] = set()
    for node in ast.walk(fn):
        if isinstance(node, ast.arg):
            local.add(node.arg)
        elif isinstance(node, ast.Name) and isinstance(node.ctx, (ast.Store, ast.Del)):
            local.add(node.id)
        elif isinstance(node, (ast.Global, ast.Nonlocal)):
            declared.update(node.names)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)) and node is not fn:
            local.add(node.name)
        elif isinstance(node, ast.ExceptHandler) and node.name:
            local.add(node.name)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            for a in node.names:
                local.add((a.asname or a.name).split(".", 1)[0])
    return local - declared, declared


def _child_exprs(node: ast.AST) -> Iterator[ast.AST]:
    """Direct non-statement children of a statement (expressions, handlers' types, ...)."""
    for _, value in ast.iter_fields(node):
        items = value if isinstance(value, list) else [value]
        for item in items:
            if isinstance(item, ast.stmt):
                continue
            if isinstance(item, ast.ExceptHandler):
                if item.type is not None:
                    yield item.type
                continue
            if isinstance(item, ast.match_case):
                yield item.pattern
                if item.guard is not None:
                    yield item.guard
                continue
            if isinstance(item, ast.AST):
                yield item


def _child_stmts(node: ast.AST) -> Iterator[ast.stmt]:
    for _, value in ast.iter_fields(node):
        items = value if isinstance(value, list) else [value]
        for item in items:
            if isinstance(item, ast.stmt):
                yield item
            elif isinstance(item, (ast.ExceptHandler, ast.match_case)):
                yield from item.body


class _EntityRefCollector:
    def __init__(self, resolver: Resolver, index: EntityIndex, module: str, site: DefSite) -> None:
        self.resolver = resolver
        self.index = index
        self.module = module
        self.site = site
        self.locals: set[str] = set()
        self.self_name: str | None = None
        self.class_scope: str | None = None  # class-level statements see class names
        node = site.node
        if isinstance(node, FuncDef):
            self.locals, _ = _function_locals(node)
            args = list(node.args.posonlyargs) + list(node.args.args)
            if site.class_id and args and not is_static(node):
                self.self_name = args[0].arg
        elif site.kind is EntityKind.VARIABLE and site.class_id and isinstance(site.target, ast.Name):
            self.class_scope = site.class_id
        self.found: list[tuple[str, RefKind]] = []

    # -- chain resolution -------------------------------------------------
    def _root(self, node: ast.expr) -> str | None:
        if isinstance(node, ast.Name):
            if node.id == self.self_name:
                return self.site.class_id
            if node.id in self.locals:
                return None
            if self.class_scope is not None:
                member = f"{self.class_scope}.{node.id}"
                if member in self.index:
                    return member
            return self.resolver.lookup(self.module, node.id)
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id == "super"
            and self.site.class_id
        ):
            return f"super:{self.site.class_id}"
        return None

    def _step(self, current: str, attr: str) -> str | None:
        if current.startswith("super:"):
            return self.resolver.class_member(current[6:], attr, skip_self=True)
        if current in self.index:
            ent = self.index[current]
            if ent.kind is EntityKind.CLASS:
                return self.resolver.class_member(current, attr)
            return None
        if self.resolver.is_module(current):
            resolved = self.resolver.resolve_qualified(f"{current}.{attr}")
            if resolved in self.index or self.resolver.is_module(resolved):
                return resolved
        return None

    def resolve_chain(self, node: ast.expr) -> tuple[str | None, bool, ast.expr]:
        """(deepest entity id, whole chain consumed?, root expression)."""
        attrs: list[str] = []
        root = node
        while isinstance(root, ast.Attribute):
            attrs.append(root.attr)
            root = root.value
        attrs.reverse()
        current = self._root(root)
        deepest: str | None = current if current in self.index else None
        consumed = 0
        if current is not None:
            for attr in attrs:
                nxt = self._step(current, attr)
                if nxt is None:
                    break
                current = nxt
                consumed += 1
                if current in self.index:
                    deepest = current
        full = current is not None and consumed == len(attrs) and deepest == current
        return deepest, full, root

    # -- visiting -----------------------------------------------------------
    def emit(self, entity_id: str | None, kind: RefKind) -> None:
        if entity_id is None or entity_id == self.site.id or entity_id not in self.index:
            return
        self.found.append((entity_id, kind))

    def visit(self, node: ast.AST) -> None:
        if isinstance(node, ast.Call):
            self._visit_call(node)
        elif isinstance(node, (ast.Attribute, ast.Name)):
            self._visit_chain(node)
        else:
            for child in ast.iter_child_nodes(node):
                if isinstance(child, ast.stmt):  # lambda bodies are exprs; nested defs are separate statements
                    continue
                self.visit(child)

    def _visit_chain(self, node: ast.expr) -> None:
        store = isinstance(getattr(node, "ctx", None), (ast.Store, ast.Del))
        target, _, root = self.resolve_chain(node)
        if target is not None:
            kind = self.index[target].kind
            if store and kind is EntityKind.VARIABLE and target == self._store_target(node):
                self.emit(target, RefKind.WRITE)
            elif kind in (EntityKind.VARIABLE, EntityKind.FUNCTION):
                self.emit(target, RefKind.READ)
        if root is not node and not isinstance(root, ast.Name):
            self.visit(root)

    def _store_target(self, node: ast.expr) -> str | None:
        """Entity written by a store to ``node`` (only if the chain resolves completely)."""
        target, full, _ = self.resolve_chain(node)
        if not full:
            return None
        if isinstance(node, ast.Name):
            # plain names are locals unless declared global; module-level code has no owner here
            return target if node.id not in self.locals else None
        return target

    def _visit_call(self, node: ast.Call) -> None:
        func = node.func
        target, full, root = self.resolve_chain(func) if isinstance(func, (ast.Attribute, ast.Name)) else (None, False, func)
        if target is not None:
            kind = self.index[target].kind
            if full and kind is EntityKind.FUNCTION:
                self.emit(target, RefKind.CALL)
            elif full and kind is EntityKind.CLASS:
                init = self.resolver.class_member(target, "__init__")
                if init is not None:
                    self.emit(init, RefKind.CALL)
            elif kind in (EntityKind.VARIABLE, EntityKind.FUNCTION):
                self.emit(target, RefKind.READ)
        if not isinstance(root, ast.Name):
            self.visit(root)
        for arg in node.args:
            self.visit(arg)
        for kw in node.keywords:
            self.visit(kw.value)

    def take(self) -> tuple[tuple[str, RefKind], ...]:
        seen: dict[tuple[str, RefKind], None] = {}
        for item in self.found:
            seen.setdefault(item, None)
        self.found = []
        return tuple(seen)


def _stmt_span(path: str, lm: LineMap, node: ast.AST) -> CodeSpan:
    end_line, end_col = node.end_lineno, node.end_col_offset
    if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
        end_line = max(node.body[0].lineno - 1, node.lineno)
        end_col = len(lm.line_text(end_line).rstrip("\r\n").encode("utf-8"))
    return CodeSpan(
        path, node.lineno, lm.char_col(node.lineno, node.col_offset), end_line, lm.char_col(end_line, end_col)
    )


def _header_parts(node: ast.AST) -> list[ast.AST]:
    parts: list[ast.AST] = list(getattr(node, "decorator_list", []))
    if isinstance(node, FuncDef):
        a = node.args
        parts.extend(d for d in a.defaults)
        parts.extend(d for d in a.kw_defaults if d is not None)
    elif isinstance(node, ast.ClassDef):
        parts.extend(kw.value for kw in node.keywords)
    return parts


def collect_statement_refs(parsed: ParsedRepo, index: EntityIndex, resolver: Resolver) -> list[StatementRef]:
    out: list[StatementRef] = []
    for path, tree in parsed.trees.items():
        module = parsed.modules[path]
        lm = LineMap(parsed.repo.text(path))
        for site in iter_defs(tree, module):
            if site.id not in index or index[site.id].file != path:
                continue
            col = _EntityRefCollector(resolver, index, module, site)
            node = site.node
            if site.kind is EntityKind.CLASS:
                for base in node.bases:
                    target, full, _ = col.resolve_chain(base) if isinstance(base, (ast.Name, ast.Attribute)) else (None, False, base)
                    if target is not None and full and index[target].kind is EntityKind.CLASS:
                        col.found.append((target, RefKind.INHERIT))
                for part in _header_parts(node):
                    col.visit(part)
                refs = col.take()
                if refs:
                    out.append(StatementRef(site.id, _stmt_span(path, lm, node), refs))
                continue
            if site.kind is EntityKind.VARIABLE:
                if isinstance(site.target, ast.Attribute):
                    continue  # self-assigned attributes: the method owns the statement
                value = getattr(node, "value", None)
                if value is not None:
                    col.visit(value)
                refs = col.take()
                if refs:
                    out.append(StatementRef(site.id, _stmt_span(path, lm, node), refs))
                continue
            # functions
            for part in _header_parts(node):
                col.visit(part)
            refs = col.take()
            if refs:
                out.append(StatementRef(site.id, _stmt_span(path, lm, node), refs))
            stack = list(reversed(node.body))
            while stack:
                stmt = stack.pop()
                if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                    for part in _header_parts(stmt):
                        col.visit(part)
                    if isinstance(stmt, ast.ClassDef):
                        for base in stmt.bases:
                            col.visit(base)
                else:
                    for child in _child_exprs(stmt):
                        col.visit(child)
                refs = col.take()
                if refs:
                    out.append(StatementRef(site.id, _stmt_span(path, lm, stmt), refs))
                stack.extend(reversed(list(_child_stmts(stmt))))
    return out


def resolve_statement_refs(repo: SourceRepo, index: EntityIndex) -> list[StatementRef]:
    """References of every statement in every entity of ``index``.

    Re-parses ``repo``; callers holding a :class:`ParsedRepo` already should
    use :func:`collect_statement_refs`.
    """
    parsed = ParsedRepo.parse(repo)
    _, resolver = build_entities(parsed)
    return collect_statement_refs(parsed, index, resolver)
