from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edg_typer.errors import InvalidTypeExpression
from edg_typer.typeexpr import (
    is_valid_type_expr,
    make_union,
    normalize_type,
    render_type,
)


@pytest.mark.parametrize("a,b", [
    ("Optional[int]", "Union[int, None]"),
    ("Optional[int]", "int | None"),
    ("List[int]", "list[int]"),
    ("typing.Dict[str, int]", "dict[str, int]"),
    ("Union[str, int, str]", "int | str"),
    ("Union[int, Union[str, None]]", "Optional[Union[str, int]]"),
    ("typing.Callable[[int], str]", "collections.abc.Callable[[int], str]"),
    ("typing.Any", "Any"),
])
def test_equivalent_spellings(a, b):
    assert normalize_type(a) == normalize_type(b)
    assert normalize_type(a).text == normalize_type(b).text


def test_list_head_and_args():
    t = normalize_type("List[int]")
    assert t.head == "list"
    assert [a.text for a in t.args] == ["int"]


def test_union_sorted_dedup_none_last():
    t = normalize_type("Union[None, str, int, str]")
    assert t.is_union
    assert t.text == "int | str | None"


def test_single_member_union_collapses():
    assert normalize_type("Union[int]").text == "int"


def test_any_flags():
    t = normalize_type("Any")
    assert t.is_any and not t.is_union


@pytest.mark.parametrize("bad", ["", "int[", "1 +", "lambda: 3", "f(x)"])
def test_invalid(bad):
    with pytest.raises(InvalidTypeExpression):
        normalize_type(bad)
    assert not is_valid_type_expr(bad)


def test_resolver_qualifies_names():
    t = normalize_type("Ctx", resolve=lambda n: "pkg.ctx.Ctx" if n == "Ctx" else None)
    assert t.text == "pkg.ctx.Ctx"


def test_make_union_flattens():
    u = make_union([normalize_type("int | str"), normalize_type("None"), normalize_type("int")])
    assert u.text == "int | str | None"


def test_render_uses_local_names():
    t = normalize_type("dict[str, pkg.mod.Thing]")
    assert render_type(t, lambda q: q.rsplit(".", 1)[-1]) == "dict[str, Thing]"


_ATOMS = ["int", "str", "float", "None", "bytes", "Any", "pkg.Thing"]


def _type_text():
    atom = st.sampled_from(_ATOMS)
    return st.recursive(
        atom,
        lambda inner: st.one_of(
            st.builds(lambda x: f"List[{x}]", inner),
            st.builds(lambda x: f"Optional[{x}]", inner),
            st.builds(lambda k, v: f"Dict[{k}, {v}]", st.sampled_from(["str", "int"]), inner),
            st.builds(lambda xs: "Union[" + ", ".join(xs) + "]", st.lists(inner, min_size=1, max_size=3)),
            st.builds(lambda a, b: f"{a} | {b}", inner, inner),
            st.builds(lambda xs: "tuple[" + ", ".join(xs) + "]", st.lists(inner, min_size=1, max_size=3)),
        ),
        max_leaves=6,
    )


@settings(max_examples=300, deadline=None)
@given(_type_text())
def test_normalization_idempotent(text):
    t = normalize_type(text)
    assert normalize_type(t.text) == t
    assert normalize_type(t.text).text == t.text


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(_ATOMS), min_size=1, max_size=5))
def test_union_order_irrelevant(members):
    a = normalize_type("Union[" + ", ".join(members) + "]")
    b = normalize_type("Union[" + ", ".join(reversed(members)) + "]")
    assert a == b
