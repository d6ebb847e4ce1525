"""Type-expression parsing, canonicalization and rendering.

Every annotation the engine handles goes through :func:`normalize_type`, which
produces a :class:`NormalizedType` whose ``text`` is the canonical spelling
used for storage, equality and serialization.  Canonical text uses fully
qualified names for anything that is not a builtin (``pkg.mod.Class``,
``collections.abc.Iterable``); :func:`render_type` turns it back into a
spelling that is valid inside one particular file.
"""

from __future__ import annotations

import ast
import builtins
from collections.abc import Callable
from dataclasses import dataclass, field

from .errors import InvalidTypeExpression

ANY = "Any"
NONE = "None"
UNION = "Union"
PARAMS = "[]"  # Callable parameter list
ELLIPSIS = "..."
EMPTY_TUPLE = "()"
LITERAL = "typing.Literal"

_ABC_NAMES = (
    "AsyncGenerator AsyncIterable AsyncIterator Awaitable Callable Collection "
    "Container Coroutine Generator Hashable ItemsView Iterable Iterator KeysView "
    "Mapping MappingView MutableMapping MutableSequence MutableSet Reversible "
    "Sequence Sized ValuesView"
).split()

# typing aliases -> canonical heads
_CANONICAL: dict[str, str] = {
    "typing.List": "list",
    "typing.Dict": "dict",
    "typing.Set": "set",
    "typing.FrozenSet": "frozenset",
    "typing.Tuple": "tuple",
    "typing.Type": "type",
    "typing.Text": "str",
    "typing.Deque": "collections.deque",
    "typing.DefaultDict": "collections.defaultdict",
    "typing.OrderedDict": "collections.OrderedDict",
    "typing.Counter": "collections.Counter",
    "typing.ChainMap": "collections.ChainMap",
    "typing.AbstractSet": "collections.abc.Set",
    "typing.Pattern": "re.Pattern",
    "typing.Match": "re.Match",
    "typing.Any": ANY,
    "typing.Optional": "typing.Optional",
    "types.NoneType": NONE,
    "NoneType": NONE,
}
for _n in _ABC_NAMES:
    _CANONICAL[f"typing.{_n}"] = f"collections.abc.{_n}"

TYPING_NAMES = frozenset(
    _ABC_NAMES
    + (
        "Any Optional Union List Dict Set FrozenSet Tuple Type Text Deque "
        "DefaultDict OrderedDict Counter ChainMap AbstractSet Pattern Match "
        "Literal NoReturn Never ClassVar Final Annotated TypeGuard Self "
        "LiteralString IO TextIO BinaryIO SupportsInt SupportsFloat SupportsIndex"
    ).split()
)

BUILTIN_NAMES = frozenset(n for n in dir(builtins) if not n.startswith("_"))

Resolver = Callable[[str], "str | None"]


@dataclass(frozen=True)
class NormalizedType:
    head: str
    args: tuple[NormalizedType, ...] = ()
    text: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.text:
            object.__setattr__(self, "text", _to_text(self))

    @property
    def is_any(self) -> bool:
        return self.head == ANY

    @property
    def is_union(self) -> bool:
        return self.head == UNION

    def names(self) -> set[str]:
        """Dotted names referenced anywhere in the expression."""
        out: set[str] = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if t.head not in (UNION, PARAMS, ELLIPSIS, EMPTY_TUPLE, NONE) and not (
                t.head[:1] in "'\"-0123456789" or t.head in ("True", "False")
            ):
                out.add(t.head)
            if t.head != LITERAL:
                stack.extend(t.args)
        return out

    def __str__(self) -> str:
        return self.text


def _sort_key(t: NormalizedType) -> tuple[int, str]:
    return (1 if t.head == NONE else 0, t.text)


def _to_text(t: NormalizedType) -> str:
    if t.head == UNION:
        return " | ".join(a.text for a in t.args)
    if t.head == PARAMS:
        return "[" + ", ".join(a.text for a in t.args) + "]"
    if not t.args:
        return t.head
    return f"{t.head}[{', '.join(a.text for a in t.args)}]"


def _dotted(node: ast.expr) -> str | None:
    parts = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if not isinstance(node, ast.Name):
        return None
    parts.append(node.id)
    return ".".join(reversed(parts))


def canonical_name(name: str, resolve: Resolver | None = None) -> str:
    """Map a (possibly local) dotted name to its canonical qualified head."""
    qualified = resolve(name) if resolve else None
    if qualified is None:
        first = name.split(".", 1)[0]
        if name in TYPING_NAMES:
            qualified = f"typing.{name}"
        elif first in ("t", "typing_extensions") and "." in name:
            qualified = "typing." + name.split(".", 1)[1]
        else:
            qualified = name
    if qualified.startswith("typing_extensions."):
        qualified = "typing." + qualified.split(".", 1)[1]
    if qualified.startswith("builtins."):
        qualified = qualified.split(".", 1)[1]
    return _CANONICAL.get(qualified, qualified)


def _union(members: list[NormalizedType]) -> NormalizedType:
    flat: dict[str, NormalizedType] = {}
    for m in members:
        for x in m.args if m.is_union else (m,):
            flat.setdefault(x.text, x)
    items = sorted(flat.values(), key=_sort_key)
    if len(items) == 1:
        return items[0]
    return NormalizedType(UNION, tuple(items))


def _literal_arg(node: ast.expr) -> NormalizedType:
    if isinstance(node, ast.Constant):
        return NormalizedType(repr(node.value))
    if (
        isinstance(node, ast.UnaryOp)
        and isinstance(node.op, ast.USub)
        and isinstance(node.operand, ast.Constant)
        and isinstance(node.operand.value, (int, float))
    ):
        return NormalizedType(repr(-node.operand.value))
    dotted = _dotted(node)
    if dotted is not None:  # enum members
        return NormalizedType(dotted)
    raise InvalidTypeExpression(f"unsupported Literal argument: {ast.unparse(node)}")


def _convert(node: ast.expr, resolve: Resolver | None, depth: int = 0) -> NormalizedType:
    if depth > 64:
        raise InvalidTypeExpression("type expression nested too deeply")
    if isinstance(node, ast.Constant):
        if node.value is None:
            return NormalizedType(NONE)
        if node.value is Ellipsis:
            return NormalizedType(ELLIPSIS)
        if isinstance(node.value, str):
            return _convert(_parse(node.value), resolve, depth + 1)
        raise InvalidTypeExpression(f"unexpected constant {node.value!r} in type")
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        return _union([_convert(node.left, resolve, depth + 1), _convert(node.right, resolve, depth + 1)])
    if isinstance(node, ast.List):
        return NormalizedType(PARAMS, tuple(_convert(e, resolve, depth + 1) for e in node.elts))
    if isinstance(node, ast.Tuple) and not node.elts:
        return NormalizedType(EMPTY_TUPLE)
    if isinstance(node, (ast.Name, ast.Attribute)):
        dotted = _dotted(node)
        if dotted is None:
            raise InvalidTypeExpression(f"not a type: {ast.unparse(node)}")
        head = canonical_name(dotted, resolve)
        if head == "typing.Optional":
            raise InvalidTypeExpression("Optional requires an argument")
        return NormalizedType(head)
    if isinstance(node, ast.Subscript):
        dotted = _dotted(node.value)
        if dotted is None:
            raise InvalidTypeExpression(f"not a generic type: {ast.unparse(node.value)}")
        head = canonical_name(dotted, resolve)
        raw = node.slice
        elts = list(raw.elts) if isinstance(raw, ast.Tuple) and raw.elts else [raw]
        if head == LITERAL:
            return NormalizedType(LITERAL, tuple(_literal_arg(e) for e in elts))
        if head == "typing.Annotated":
            return _convert(elts[0], resolve, depth + 1)
        args = [_convert(e, resolve, depth + 1) for e in elts]
        if head == "typing.Optional":
            if len(args) != 1:
                raise InvalidTypeExpression("Optional takes exactly one argument")
            return _union([args[0], NormalizedType(NONE)])
        if head == "typing.Union":
            return _union(args)
        return NormalizedType(head, tuple(args))
    raise InvalidTypeExpression(f"not a type expression: {ast.unparse(node)}")


def _parse(text: str) -> ast.expr:
    try:
        return ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise InvalidTypeExpression(f"cannot parse type {text!r}: {exc.msg}") from None


def normalize_type(expr: str, resolve: Resolver | None = None) -> NormalizedType:
    """Parse ``expr`` and return its canonical form.

    ``resolve`` maps a dotted name as written to its qualified target (file
    scope lookup); unresolved names fall back to the typing/builtin tables.

    >>> normalize_type("Optional[List[int]]").text
    'list[int] | None'
    """
    if not isinstance(expr, str) or not expr.strip():
        raise InvalidTypeExpression("empty type expression")
    return _convert(_parse(expr), resolve)


def normalize_node(node: ast.expr, resolve: Resolver | None = None) -> NormalizedType:
    return _convert(node, resolve)


def is_valid_type_expr(expr: str) -> bool:
    try:
        normalize_type(expr)
    except InvalidTypeExpression:
        return False
    return True


def make_union(members: list[NormalizedType]) -> NormalizedType:
    return _union(members)


def render_type(t: NormalizedType, name_for: Callable[[str], str]) -> str:
    """Spell ``t`` using ``name_for`` to map each qualified head to local text."""
    if t.head == UNION:
        return " | ".join(render_type(a, name_for) for a in t.args)
    if t.head == PARAMS:
        return "[" + ", ".join(render_type(a, name_for) for a in t.args) + "]"
    if t.head in (NONE, ELLIPSIS, EMPTY_TUPLE):
        return t.head
    if t.head == LITERAL:
        return f"{name_for(LITERAL)}[{', '.join(a.head for a in t.args)}]"
    head = name_for("typing.Any" if t.head == ANY else t.head)
    if not t.args:
        return head
    return f"{head}[{', '.join(render_type(a, name_for) for a in t.args)}]"
