"""Deterministic rule-based oracle.

Stands in for a language model.  It only looks at the wire request (member
code, dependency annotations, target slots), so identical requests give
identical answers.  Names in member code are matched to dependency entities
by their last dotted component, preferring the entity closest to the member.
"""

from __future__ import annotations

import ast
import re
import textwrap
from collections.abc import Iterator, Mapping

from ..errors import InvalidTypeExpression
from ..typeexpr import NormalizedType, make_union, normalize_type
from .context import Task
from .oracle import MissingRef, OracleRequest, OracleResponse

ANY = "Any"

_LITERALS = {bool: "bool", int: "int", float: "float", complex: "complex", str: "str", bytes: "bytes"}
_BUILTIN_CALLS = {
    "int": "int", "float": "float", "str": "str", "bool": "bool", "bytes": "bytes",
    "len": "int", "repr": "str", "isinstance": "bool", "callable": "bool", "hasattr": "bool",
    "abs": None, "list": "list[Any]", "dict": "dict[Any, Any]", "set": "set[Any]", "tuple": "tuple[Any, ...]",
    "sorted": "list[Any]", "id": "int", "hash": "int", "ord": "int", "chr": "str", "hex": "str", "format": "str",
}
_STR_METHODS = {
    "upper": "str", "lower": "str", "strip": "str", "lstrip": "str", "rstrip": "str", "replace": "str",
    "format": "str", "join": "str", "title": "str", "capitalize": "str", "casefold": "str", "zfill": "str",
    "split": "list[str]", "splitlines": "list[str]", "rsplit": "list[str]", "encode": "bytes",
    "startswith": "bool", "endswith": "bool", "isdigit": "bool", "isalpha": "bool", "isspace": "bool",
    "find": "int", "count": "int", "index": "int",
}


def _norm(text: str) -> str | None:
    try:
        return normalize_type(text).text
    except InvalidTypeExpression:
        return None


def join_types(types: list[str | None]) -> str | None:
    """Union of known types; None (unknown) if any member is unknown."""
    if not types or any(t is None for t in types):
        return None
    uniq = sorted(set(t for t in types if t is not None))
    if ANY in uniq:
        return ANY
    if set(uniq) <= {"int", "float"}:
        return uniq[-1] if len(uniq) == 1 else "float"
    if len(uniq) == 1:
        return uniq[0]
    if set(uniq) == {"int", "bool"}:
        return "int"
    try:
        return make_union([normalize_type(t) for t in uniq]).text
    except InvalidTypeExpression:
        return None


def _strip_none(t: str | None) -> str | None:
    if t is None:
        return None
    n = normalize_type(t)
    if n.is_union:
        rest = [a for a in n.args if a.head != "None"]
        if len(rest) == 1:
            return rest[0].text
        return None
    return None if n.head == "None" else n.text


def _head(t: str | None) -> NormalizedType | None:
    if t is None:
        return None
    try:
        return normalize_type(t)
    except InvalidTypeExpression:
        return None


def _body_stmts(body: list[ast.stmt]) -> Iterator[ast.stmt]:
    for stmt in body:
        yield stmt
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            continue
        for name in ("body", "orelse", "finalbody"):
            yield from _body_stmts(getattr(stmt, name, []) or [])
        for h in getattr(stmt, "handlers", []) or []:
            yield from _body_stmts(h.body)


def _own_nodes(fn: ast.AST) -> Iterator[ast.AST]:
    """Nodes of a function body, skipping nested defs and lambdas."""
    stack = list(ast.iter_child_nodes(fn))
    while stack:
        node = stack.pop()
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef, ast.Lambda)):
            continue
        yield node
        stack.extend(ast.iter_child_nodes(node))


class _Known:
    """Dependency annotations, organised for lookup by short name."""

    def __init__(self, deps: list[tuple[str, str]], member_ids: list[str]) -> None:
        self.slot: dict[str, str] = {}
        self.params: dict[str, list[tuple[str, str]]] = {}
        self.var: dict[str, str] = {}
        self.ret: dict[str, str] = {}
        self.entities: list[str] = []
        for slot, typ in deps:
            norm = _norm(typ) or ANY
            self.slot[slot] = norm
            ent, _, role = slot.rpartition("#")
            if ent not in self.entities:
                self.entities.append(ent)
            if role == "var":
                self.var[ent] = norm
            elif role == "return":
                self.ret[ent] = norm
            elif role.startswith("param:"):
                self.params.setdefault(ent, []).append((role[6:], norm))
        self.members = member_ids
        ids = set(self.entities) | set(member_ids)
        self.packages = {i.split(".", 1)[0] for i in ids}
        # anything that has members is a class (functions never do)
        self.classes = set()
        for i in ids:
            parts = i.split(".")
            for k in range(1, len(parts)):
                prefix = ".".join(parts[:k])
                if parts[k - 1][:1].isupper():
                    self.classes.add(prefix)
        # classes that only appear inside dependency annotations
        for typ in self.slot.values():
            for name in normalize_type(typ).names():
                if name.rsplit(".", 1)[-1][:1].isupper():
                    self.classes.add(name)

    def closest(self, name: str, near: str, pool: Mapping[str, object] | list[str]) -> str | None:
        cands = [e for e in pool if e.rsplit(".", 1)[-1].split("~")[0] == name]
        if not cands:
            return None

        def score(e: str) -> tuple[int, str]:
            common = 0
            for a, b in zip(e.split("."), near.split(".")):
                if a != b:
                    break
                common += 1
            return (-common, e)

        return min(cands, key=score)

    def class_named(self, name: str, near: str) -> str | None:
        return self.closest(name, near, sorted(self.classes))

    def member_of(self, cls: str, attr: str, pool: Mapping[str, str]) -> str | None:
        key = f"{cls}.{attr}"
        return pool.get(key)


class _FunctionModel:
    """Per-member typing environment."""

    def __init__(self, member: str, node: ast.AST, known: _Known, targets: set[str]) -> None:
        self.member = member
        self.node = node
        self.known = known
        self.env: dict[str, str | None] = {}
        self.self_name: str | None = None
        self.cls: str | None = None
        parent = member.rsplit(".", 1)[0]
        if parent in known.classes:
            self.cls = parent
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            args = list(node.args.posonlyargs) + list(node.args.args)
            if args and self.cls and f"{member}#param:{args[0].arg}" not in targets and f"{member}#param:{args[0].arg}" not in known.slot:
                self.self_name = args[0].arg
                self.env[self.self_name] = self.cls
            for a in self._all_args():
                t = known.slot.get(f"{member}#param:{a.arg}")
                if t is not None:
                    self.env[a.arg] = t
            # unannotated params with a scalar literal default get that type,
            # which is what the param slot itself will be given
            for a, d in self._defaults():
                if a.arg not in self.env and isinstance(d, ast.Constant):
                    lit = _LITERALS.get(type(d.value))
                    if lit in ("int", "float", "str", "bool", "bytes"):
                        self.env[a.arg] = lit
            self._scan_locals(node.body)
        elif isinstance(node, (ast.Assign, ast.AnnAssign)) and self.cls:
            target = node.targets[0] if isinstance(node, ast.Assign) else node.target
            if isinstance(target, ast.Attribute) and isinstance(target.value, ast.Name):
                self.self_name = target.value.id
                self.env[self.self_name] = self.cls

    def _all_args(self) -> list[ast.arg]:
        a = self.node.args
        out = list(a.posonlyargs) + list(a.args) + list(a.kwonlyargs)
        if a.vararg:
            out.append(a.vararg)
        if a.kwarg:
            out.append(a.kwarg)
        return out

    def _defaults(self) -> list[tuple[ast.arg, ast.expr]]:
        a = self.node.args
        pos = list(a.posonlyargs) + list(a.args)
        out = list(zip(pos[len(pos) - len(a.defaults) :], a.defaults))
        out += [(k, d) for k, d in zip(a.kwonlyargs, a.kw_defaults) if d is not None]
        return out

    def _scan_locals(self, body: list[ast.stmt]) -> None:
        for stmt in _body_stmts(body):
            if isinstance(stmt, ast.Assign) and len(stmt.targets) == 1 and isinstance(stmt.targets[0], ast.Name):
                name = stmt.targets[0].id
                t = self.type_of(stmt.value)
                if name in self.env and self.env[name] != t:
                    self.env[name] = join_types([self.env[name], t])
                else:
                    self.env[name] = t
            elif isinstance(stmt, ast.If):
                self._narrow_guard(stmt)
            elif isinstance(stmt, ast.For) and isinstance(stmt.target, ast.Name):
                it = _head(self.type_of(stmt.iter))
                if it is not None and it.head in ("list", "set", "frozenset", "collections.abc.Iterable", "collections.abc.Sequence") and it.args:
                    self.env[stmt.target.id] = it.args[0].text

    def _narrow_guard(self, stmt: ast.If) -> None:
        # ``if x is None: raise/return`` narrows x for the rest of the body
        t = stmt.test
        if (
            isinstance(t, ast.Compare)
            and isinstance(t.left, ast.Name)
            and len(t.ops) == 1
            and isinstance(t.ops[0], ast.Is)
            and isinstance(t.comparators[0], ast.Constant)
            and t.comparators[0].value is None
            and stmt.body
            and isinstance(stmt.body[-1], (ast.Raise, ast.Return))
            and not stmt.orelse
        ):
            name = t.left.id
            if self.env.get(name) is not None:
                self.env[name] = _strip_none(self.env[name])

    # -- expression typing -------------------------------------------------
    def name_type(self, name: str) -> str | None:
        if name in self.env:
            return self.env[name]
        k = self.known
        ent = k.closest(name, self.member, k.var)
        if ent is not None:
            return k.var[ent]
        return None

    def attr_type(self, node: ast.Attribute) -> str | None:
        recv = _strip_none(self.type_of(node.value)) if not isinstance(node.value, ast.Name) or node.value.id != self.self_name else self.cls
        if recv is None:
            return None
        return self.known.member_of(recv, node.attr, self.known.var)

    def call_type(self, node: ast.Call) -> str | None:
        k = self.known
        f = node.func
        if isinstance(f, ast.Name):
            if f.id in self.env:
                return None
            ent = k.closest(f.id, self.member, k.ret)
            if ent is not None and not f.id[:1].isupper():
                return k.ret[ent]
            if f.id[:1].isupper():
                cls = k.class_named(f.id, self.member)
                if cls is not None:
                    return cls
            if f.id in _BUILTIN_CALLS:
                return _BUILTIN_CALLS[f.id]
            return None
        if isinstance(f, ast.Attribute):
            if isinstance(f.value, ast.Name) and f.value.id == self.self_name and self.cls:
                return k.member_of(self.cls, f.attr, k.ret)
            recv_t = self.type_of(f.value)
            recv = _head(recv_t)
            if recv is None:
                return None
            if recv.head == "str" and f.attr in _STR_METHODS:
                return _STR_METHODS[f.attr]
            if recv.head == "contextvars.ContextVar" and f.attr == "get" and recv.args:
                inner = recv.args[0].text
                if node.args:
                    return join_types([inner, self.type_of(node.args[0])])
                return inner
            if recv.head == "dict" and f.attr == "get" and len(recv.args) == 2:
                default = self.type_of(node.args[1]) if len(node.args) > 1 else "None"
                return join_types([recv.args[1].text, default])
            if recv.head in ("list", "dict", "set") and f.attr == "copy":
                return recv.text
            if recv.head == "list" and f.attr == "pop" and recv.args:
                return recv.args[0].text
            plain = _strip_none(recv_t)
            if plain is not None:
                return k.member_of(plain, f.attr, k.ret)
        return None

    def type_of(self, node: ast.expr | None) -> str | None:
        if node is None:
            return "None"
        if isinstance(node, ast.Constant):
            if node.value is None:
                return "None"
            if node.value is Ellipsis:
                return None
            return _LITERALS.get(type(node.value))
        if isinstance(node, ast.JoinedStr):
            return "str"
        if isinstance(node, (ast.List, ast.Set)):
            head = "list" if isinstance(node, ast.List) else "set"
            if not node.elts:
                return f"{head}[Any]"
            inner = join_types([self.type_of(e) for e in node.elts])
            return f"{head}[{inner or ANY}]"
        if isinstance(node, ast.Dict):
            if not node.keys:
                return "dict[Any, Any]"
            if any(k is None for k in node.keys):
                return None
            kt = join_types([self.type_of(k) for k in node.keys])
            vt = join_types([self.type_of(v) for v in node.values])
            return f"dict[{kt or ANY}, {vt or ANY}]"
        if isinstance(node, ast.Tuple):
            parts = [self.type_of(e) for e in node.elts]
            if not parts:
                return "tuple[()]"
            return f"tuple[{', '.join(p or ANY for p in parts)}]"
        if isinstance(node, (ast.ListComp, ast.SetComp)):
            return "list[Any]" if isinstance(node, ast.ListComp) else "set[Any]"
        if isinstance(node, ast.DictComp):
            return "dict[Any, Any]"
        if isinstance(node, ast.Compare):
            return "bool"
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.Not):
                return "bool"
            t = self.type_of(node.operand)
            return t if t in ("int", "float", "complex") else None
        if isinstance(node, ast.BoolOp):
            parts = [self.type_of(v) for v in node.values]
            return parts[0] if len(set(parts)) == 1 else None
        if isinstance(node, ast.BinOp):
            lt, rt = self.type_of(node.left), self.type_of(node.right)
            nums = ("int", "float", "bool")
            if lt in nums and rt in nums:
                if isinstance(node.op, ast.Div):
                    return "float"
                if "float" in (lt, rt):
                    return "float"
                return "int"
            if isinstance(node.op, ast.Add) and lt == rt and lt in ("str", "bytes"):
                return lt
            if isinstance(node.op, ast.Mod) and lt == "str":
                return "str"
            if isinstance(node.op, ast.Mult) and {lt, rt} == {"str", "int"}:
                return "str"
            return None
        if isinstance(node, ast.IfExp):
            return join_types([self.type_of(node.body), self.type_of(node.orelse)])
        if isinstance(node, ast.Name):
            return self.name_type(node.id)
        if isinstance(node, ast.Attribute):
            return self.attr_type(node)
        if isinstance(node, ast.Call):
            return self.call_type(node)
        if isinstance(node, ast.Subscript):
            base = _head(self.type_of(node.value))
            if base is None:
                return None
            if base.head == "list" and base.args and not isinstance(node.slice, ast.Slice):
                return base.args[0].text
            if base.head == "dict" and len(base.args) == 2:
                return base.args[1].text
            if base.head == "str":
                return "str"
            return None
        return None

    # -- slots ---------------------------------------------------------------
    def return_type(self) -> str:
        fn = self.node
        returns: list[ast.Return] = []
        for n in _own_nodes(fn):
            if isinstance(n, (ast.Yield, ast.YieldFrom, ast.Await)):
                return ANY
            if isinstance(n, ast.Return):
                returns.append(n)
        if fn.name in ("__init__", "__init_subclass__"):
            return "None"
        if not returns:
            body = [s for s in fn.body if not (isinstance(s, ast.Expr) and isinstance(s.value, ast.Constant))]
            if not body or all(isinstance(s, (ast.Raise, ast.Pass)) for s in body):
                return ANY  # stub-like body: nothing to learn from
            return "None"
        found = join_types([self.type_of(r.value) for r in returns])
        return found or ANY

    def param_type(self, name: str, default: ast.expr | None) -> str:
        hint = self._usage_hint(name)
        if default is not None:
            d = self.type_of(default)
            if d == "None":
                return join_types([hint, "None"]) if hint and hint != ANY else ANY
            if d is not None and not d.endswith("[Any]") and "Any" not in d:
                return d
        return hint or ANY

    def _usage_hint(self, name: str) -> str | None:
        k = self.known
        hints: list[str] = []
        for n in _own_nodes(self.node):
            if not isinstance(n, ast.Call):
                continue
            f = n.func
            # x.append(name) into a typed list
            if isinstance(f, ast.Attribute) and f.attr == "append" and len(n.args) == 1:
                arg = n.args[0]
                if isinstance(arg, ast.Name) and arg.id == name:
                    lst = _head(_strip_none(self.type_of(f.value)) or self.type_of(f.value))
                    if lst is not None and lst.head == "list" and lst.args and not lst.args[0].is_any:
                        hints.append(lst.args[0].text)
                continue
            callee = self._callee(f)
            if callee is None:
                continue
            params = k.params.get(callee, [])
            for i, arg in enumerate(n.args):
                if isinstance(arg, ast.Name) and arg.id == name and i < len(params) and params[i][1] != ANY:
                    hints.append(params[i][1])
            for kw in n.keywords:
                if isinstance(kw.value, ast.Name) and kw.value.id == name:
                    for pname, pt in params:
                        if pname == kw.arg and pt != ANY:
                            hints.append(pt)
        if not hints:
            return None
        hints = sorted(set(hints))
        return hints[0] if len(hints) == 1 else None

    def _callee(self, f: ast.expr) -> str | None:
        k = self.known
        if isinstance(f, ast.Name):
            if f.id[:1].isupper():
                cls = k.class_named(f.id, self.member)
                return f"{cls}.__init__" if cls else None
            return k.closest(f.id, self.member, k.params)
        if isinstance(f, ast.Attribute):
            if isinstance(f.value, ast.Name) and f.value.id == self.self_name and self.cls:
                return f"{self.cls}.{f.attr}"
            recv = _strip_none(self.type_of(f.value))
            if recv is not None:
                return f"{recv}.{f.attr}"
        return None

    def missing_refs(self) -> list[tuple[str, str]]:
        """(qualified ref, reason) for attribute chains whose type is not known yet."""
        out: list[tuple[str, str]] = []
        k = self.known
        known_ids = set(k.entities) | set(k.members)
        for n in _own_nodes(self.node) if isinstance(self.node, (ast.FunctionDef, ast.AsyncFunctionDef)) else ast.walk(self.node):
            if not isinstance(n, ast.Attribute) or isinstance(n.ctx, ast.Store):
                continue  # a store makes this member the writer, not a reader
            if isinstance(n.value, ast.Name) and n.value.id == self.self_name:
                recv = self.cls
            else:
                recv = _strip_none(self.type_of(n.value))
            if recv is None or recv not in k.classes or recv.split(".", 1)[0] not in k.packages:
                continue
            ref = f"{recv}.{n.attr}"
            if ref in known_ids or any(e.startswith(ref + ".") for e in known_ids):
                continue
            out.append((ref, f"type of {ast.unparse(n)} depends on {ref}"))
        return out


def _parse_member(code: str) -> ast.AST | None:
    try:
        tree = ast.parse(textwrap.dedent(code))
    except SyntaxError:
        return None
    return tree.body[0] if tree.body else None


_ARG_FEEDBACK = re.compile(
    r'Argument (?P<n>\d+) to "(?P<fn>\w+)"(?: of "(?P<cls>\w+)")? has incompatible type "(?P<got>[^"]+)"'
)


def _feedback_widenings(feedback: list[str]) -> dict[tuple[str, int], list[str]]:
    """(function or class short name, 1-based argument) -> argument types the checker saw."""
    out: dict[tuple[str, int], list[str]] = {}
    for line in feedback:
        for m in _ARG_FEEDBACK.finditer(line):
            fn = m["fn"] if m["cls"] is None else f"{m['cls']}.{m['fn']}"
            out.setdefault((fn, int(m["n"])), []).append(m["got"])
    return out


class RuleOracle:
    """Deterministic stand-in oracle; safe to share between threads.

    On retries it reads checker feedback: a parameter that received an
    incompatible argument is widened by that argument's type.
    """

    def complete(self, request: OracleRequest) -> OracleResponse:
        return self.complete_wire(request.to_wire())

    def complete_wire(self, wire: Mapping) -> OracleResponse:
        task = Task(wire["task"])
        members = [(m["id"], m["code"]) for m in wire.get("cluster", [])]
        deps = [(d["slot"], d["type"]) for d in wire.get("deps", [])]
        targets = list(wire.get("slots", []))
        known = _Known(deps, [m for m, _ in members])
        tset = set(targets)
        if task is Task.FIND_MISSING:
            seen: dict[tuple[str, str], str] = {}
            for member, code in members:
                node = _parse_member(code)
                if node is None:
                    continue
                model = _FunctionModel(member, node, known, tset)
                for ref, why in model.missing_refs():
                    seen.setdefault((member, ref), why)
            return OracleResponse(missing=[MissingRef(m, r, why) for (m, r), why in sorted(seen.items())])

        widen = _feedback_widenings(list(wire.get("feedback", [])))
        answers: list[tuple[str, str]] = []
        for member, code in members:
            mine = [s for s in targets if s.rpartition("#")[0] == member]
            if not mine:
                continue
            node = _parse_member(code)
            if node is None:
                answers.extend((s, ANY) for s in mine)
                continue
            model = _FunctionModel(member, node, known, tset)
            for sid in mine:
                role = sid.rpartition("#")[2]
                t = self._slot_type(model, node, role)
                extra = self._widening(member, node, role, widen)
                if extra:
                    t = join_types([t, *extra]) or ANY
                answers.append((sid, t))
        return OracleResponse(annotations=answers)

    @staticmethod
    def _widening(member: str, node: ast.AST, role: str, widen: dict[tuple[str, int], list[str]]) -> list[str]:
        if not widen or not role.startswith("param:") or not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            return []
        name = role.split(":", 1)[1]
        params = [p.arg for p in list(node.args.posonlyargs) + list(node.args.args)]
        parts = member.split(".")
        owner = parts[-2] if len(parts) >= 2 else ""
        is_method = bool(params) and params[0] in ("self", "cls")
        if is_method:
            params = params[1:]
        if name not in params:
            return []
        n = params.index(name) + 1
        keys = [(node.name, n)]
        if is_method:
            keys.append((f"{owner}.{node.name}", n))
            if node.name == "__init__":
                keys.append((owner, n))
        got = [t for k in keys for t in widen.get(k, [])]
        return [t for t in (_norm(g) for g in got) if t is not None]

    def _slot_type(self, model: _FunctionModel, node: ast.AST, role: str) -> str:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            if role == "return":
                return model.return_type()
            name = role.split(":", 1)[1]
            a = node.args
            positional = list(a.posonlyargs) + list(a.args)
            defaults: dict[str, ast.expr] = {}
            for p, d in zip(positional[len(positional) - len(a.defaults):], a.defaults):
                defaults[p.arg] = d
            for p, kd in zip(a.kwonlyargs, a.kw_defaults):
                if kd is not None:
                    defaults[p.arg] = kd
            return model.param_type(name, defaults.get(name))
        if role == "var":
            value = getattr(node, "value", None)
            if value is None:
                return ANY
            if isinstance(value, ast.Constant) and value.value is None:
                return ANY
            t = model.type_of(value)
            if t is None and isinstance(value, ast.Name) and model.cls:
                # ``self.x = param`` inside a method: borrow the parameter's type
                for ent, params in sorted(model.known.params.items()):
                    if ent.rsplit(".", 1)[0] == model.cls:
                        for pname, pt in params:
                            if pname == value.id:
                                return pt
            return t or ANY
        return ANY
