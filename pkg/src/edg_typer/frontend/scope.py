"""Module scopes and repo-wide name resolution.

This is a deliberately small resolver: module-level bindings, import aliases
(including relative imports and re-exports) and class member lookup through
repo-defined base classes.  Anything dynamic is left unresolved.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

from ..typeexpr import BUILTIN_NAMES, TYPING_NAMES
from .model import Entity, EntityKind


@dataclass(frozen=True)
class Binding:
    target: str
    is_module: bool = False


@dataclass
class ModuleScope:
    module: str
    path: str
    is_package: bool
    bindings: dict[str, Binding] = field(default_factory=dict)

    def package(self) -> str:
        return self.module if self.is_package else self.module.rpartition(".")[0]


def _module_level_stmts(body: list[ast.stmt]):
    for stmt in body:
        yield stmt
        if isinstance(stmt, ast.If):
            yield from _module_level_stmts(stmt.body)
            yield from _module_level_stmts(stmt.orelse)
        elif isinstance(stmt, ast.Try) or type(stmt).__name__ == "TryStar":
            yield from _module_level_stmts(stmt.body)
            for h in stmt.handlers:
                yield from _module_level_stmts(h.body)
            yield from _module_level_stmts(stmt.orelse)
            yield from _module_level_stmts(stmt.finalbody)
        elif isinstance(stmt, ast.With):
            yield from _module_level_stmts(stmt.body)


def resolve_relative(scope: ModuleScope, level: int, module: str | None) -> str:
    if level == 0:
        return module or ""
    base = scope.package().split(".") if scope.package() else []
    if level > 1:
        base = base[: len(base) - (level - 1)]
    parts = base + ([module] if module else [])
    return ".".join(p for p in parts if p)


def build_scope(module: str, path: str, tree: ast.Module, known_modules: set[str]) -> ModuleScope:
    scope = ModuleScope(module, path, path.endswith("__init__.py"))
    b = scope.bindings
    for stmt in _module_level_stmts(tree.body):
        if isinstance(stmt, ast.Import):
            for alias in stmt.names:
                if alias.asname:
                    b[alias.asname] = Binding(alias.name, True)
                else:
                    top = alias.name.split(".", 1)[0]
                    b.setdefault(top, Binding(top, True))
        elif isinstance(stmt, ast.ImportFrom):
            src = resolve_relative(scope, stmt.level, stmt.module)
            for alias in stmt.names:
                if alias.name == "*":
                    continue
                target = f"{src}.{alias.name}" if src else alias.name
                b[alias.asname or alias.name] = Binding(target, target in known_modules)
        elif isinstance(stmt, (ast.ClassDef, ast.FunctionDef, ast.AsyncFunctionDef)):
            b.setdefault(stmt.name, Binding(f"{module}.{stmt.name}"))
        elif isinstance(stmt, ast.Assign):
            for t in stmt.targets:
                if isinstance(t, ast.Name):
                    b.setdefault(t.id, Binding(f"{module}.{t.id}"))
        elif isinstance(stmt, ast.AnnAssign) and isinstance(stmt.target, ast.Name):
            b.setdefault(stmt.target.id, Binding(f"{module}.{stmt.target.id}"))
    return scope


class Resolver:
    """Resolves dotted names to entity ids / qualified names across the repo."""

    def __init__(self, scopes: dict[str, ModuleScope], entities: dict[str, Entity]) -> None:
        self.scopes = scopes
        self.entities = entities
        self._by_short: dict[str, list[str]] = {}
        for e in entities.values():
            if e.kind is EntityKind.CLASS:
                self._by_short.setdefault(e.short_name, []).append(e.id)

    def is_module(self, name: str) -> bool:
        return name in self.scopes

    def _split_module(self, dotted: str) -> tuple[str, list[str]] | None:
        parts = dotted.split(".")
        for i in range(len(parts), 0, -1):
            mod = ".".join(parts[:i])
            if mod in self.scopes:
                return mod, parts[i:]
        return None

    def resolve_qualified(self, dotted: str, _depth: int = 0) -> str:
        """Follow re-exports / class members so ``dotted`` names its definition."""
        if dotted in self.entities or dotted in self.scopes or _depth > 16:
            return dotted
        split = self._split_module(dotted)
        if split is None:
            return dotted
        mod, rest = split
        head = f"{mod}.{rest[0]}"
        if head in self.entities:
            ent = self.entities[head]
            cur = ent.id
            for i, name in enumerate(rest[1:], start=1):
                if self.entities[cur].kind is not EntityKind.CLASS:
                    return ".".join([cur] + rest[i:])
                member = self.class_member(cur, name)
                if member is None:
                    return ".".join([cur] + rest[i:])
                cur = member
            return cur
        binding = self.scopes[mod].bindings.get(rest[0])
        if binding is not None and binding.target != head:
            return self.resolve_qualified(".".join([binding.target] + rest[1:]), _depth + 1)
        return dotted

    def mro(self, class_id: str) -> list[str]:
        out: list[str] = []
        stack = [class_id]
        while stack:
            cid = stack.pop(0)
            if cid in out or cid not in self.entities:
                continue
            out.append(cid)
            stack.extend(self.entities[cid].bases)
        return out

    def class_member(self, class_id: str, name: str, skip_self: bool = False) -> str | None:
        for i, cid in enumerate(self.mro(class_id)):
            if skip_self and i == 0:
                continue
            cand = f"{cid}.{name}"
            if cand in self.entities:
                return cand
        return None

    def lookup(self, module: str, dotted: str) -> str | None:
        """Qualify a name as written in ``module`` (``None`` if not bound there)."""
        scope = self.scopes.get(module)
        if scope is None:
            return None
        first, _, rest = dotted.partition(".")
        binding = scope.bindings.get(first)
        if binding is None:
            return None
        target = binding.target + (f".{rest}" if rest else "")
        return self.resolve_qualified(target)

    def qualify_type_name(self, module: str, dotted: str) -> str | None:
        """Scope lookup first, then a unique-class-name fallback for bare names."""
        found = self.lookup(module, dotted)
        if found is not None:
            return found
        if dotted in BUILTIN_NAMES or dotted in TYPING_NAMES:
            return None
        if dotted in self.entities:
            return dotted
        resolved = self.resolve_qualified(dotted)
        if resolved in self.entities:
            return resolved
        short = dotted.rsplit(".", 1)[-1]
        cands = [c for c in self._by_short.get(short, []) if c == dotted or c.endswith("." + dotted)]
        if len(cands) == 1:
            return cands[0]
        return None

    def resolver_for(self, module: str):
        return lambda dotted: self.qualify_type_name(module, dotted)
