from __future__ import annotations

import pytest
from conftest import FIXTURES, make_repo

from edg_typer.errors import NonConverging
from edg_typer.frontend import apply_annotations, extract_entities, load_repo
from edg_typer.frontend.model import SlotState
from edg_typer.validation import (
    REFINEMENT_IGNORED,
    ConflictCategory,
    ConflictReport,
    Diagnostic,
    ResolutionAction,
    WorkingCopy,
    add_ignore_comments,
    attribute_conflicts,
    fallback_type,
    new_diagnostics,
    parse_diagnostics,
    prepare_baseline,
    resolve_conflict,
    validate_batch,
)

ARG_TYPE_REPO = {
    "pkg/__init__.py": "",
    "pkg/lib.py": "def f(x: int) -> int:\n    return x\n",
    "pkg/use.py": "from pkg.lib import f\n\n\ndef g():\n    return f(\"x\")\n",
}


def _attribute(checker, files, annotations):
    base = make_repo(files)
    before = checker.run_repo(base, REFINEMENT_IGNORED)
    annotated = apply_annotations(base, annotations)
    fresh = new_diagnostics(before, checker.run_repo(annotated, REFINEMENT_IGNORED))
    assert fresh, "expected the annotations to introduce a diagnostic"
    return attribute_conflicts(fresh, list(annotations), annotated, annotations)


# -- parsing ----------------------------------------------------------------------


def test_parse_diagnostics_keeps_errors_only():
    out = "\n".join(
        [
            'pkg/a.py:3: error: Argument 1 to "f" has incompatible type "str"; expected "int"  [arg-type]',
            "pkg/a.py:3: note: See https://example.invalid",
            "./pkg/b.py:10:5: error: Name \"Q\" is not defined  [name-defined]",
            "pkg/c.py:1: error: something odd",
            "Found 3 errors in 3 files (checked 3 source files)",
        ]
    )
    got = parse_diagnostics(out)
    assert [(d.file, d.line, d.error_code) for d in got] == [
        ("pkg/a.py", 3, "arg-type"),
        ("pkg/b.py", 10, "name-defined"),
        ("pkg/c.py", 1, "misc"),
    ]
    assert got[0].message.startswith("Argument 1")


def test_diagnostic_json_round_trip():
    d = Diagnostic("m.py", 4, "return-value", "Incompatible return value type")
    assert Diagnostic.from_json(d.to_json()) == d
    assert d.render() == "m.py:4: error: Incompatible return value type  [return-value]"


def test_new_diagnostics_is_multiset_and_line_insensitive():
    a = Diagnostic("m.py", 1, "arg-type", "msg")
    shifted = Diagnostic("m.py", 7, "arg-type", "msg")
    other = Diagnostic("m.py", 2, "override", "o")
    assert new_diagnostics([a], [shifted]) == []
    assert len(new_diagnostics([a], [shifted, a])) == 1
    assert new_diagnostics([], [other]) == [other]
    assert new_diagnostics([a, other], []) == []


# -- checker -------------------------------------------------------------------------


def test_checker_clean_fixture(checker):
    assert checker.run_dir(FIXTURES / "flask_mini", REFINEMENT_IGNORED) == []


def test_checker_reports_arg_type(checker, derived):
    diags = checker.run_repo(make_repo(ARG_TYPE_REPO), REFINEMENT_IGNORED)
    assert [d.error_code for d in diags] == derived["arg_type_fixture_codes"]
    assert [f"{d.message}  [{d.error_code}]" for d in diags] == derived["arg_type_fixture_diagnostics"]
    assert diags[0].file == "pkg/use.py"


def test_checker_ignored_codes_are_dropped(checker):
    files = {"m.py": "x = []\n"}
    assert [d.error_code for d in checker.run_repo(make_repo(files), ())] == ["var-annotated"]
    assert checker.run_repo(make_repo(files), REFINEMENT_IGNORED) == []


# -- attribution ---------------------------------------------------------------------


def test_attribution_too_restrictive_param(checker):
    files = {
        "pkg/__init__.py": "",
        "pkg/lib.py": "def f(x):\n    return x\n",
        "pkg/use.py": "from pkg.lib import f\n\n\ndef g():\n    return f(\"x\")\n",
    }
    reports = _attribute(checker, files, {"pkg.lib.f#param:x": "int"})
    assert len(reports) == 1
    assert reports[0].category is ConflictCategory.PARAM_TOO_RESTRICTIVE
    assert reports[0].culprit_slots == ["pkg.lib.f#param:x"]
    assert reports[0].attributed


def test_attribution_return_value(checker):
    files = {"m.py": "def f(a):\n    return len(a)\n"}
    reports = _attribute(checker, files, {"m.f#param:a": "str", "m.f#return": "str"})
    assert [(r.category, r.culprit_slots) for r in reports] == [
        (ConflictCategory.PARAM_TOO_PERMISSIVE, ["m.f#return"])
    ]


def test_attribution_override_names_child_slot(checker):
    files = {
        "m.py": (
            "class Base:\n"
            "    def run(self, x: str) -> None:\n"
            "        pass\n\n\n"
            "class Child(Base):\n"
            "    def run(self, x):\n"
            "        pass\n"
        )
    }
    reports = _attribute(checker, files, {"m.Child.run#param:x": "int"})
    assert reports[0].category is ConflictCategory.OVERRIDE_MISMATCH
    assert reports[0].culprit_slots == ["m.Child.run#param:x"]


def test_attribution_undefined_name(checker):
    files = {"m.py": "def origin():\n    return (0, 0)\n"}
    reports = _attribute(checker, files, {"m.origin#return": "Vector"})
    assert reports[0].category is ConflictCategory.NAME_UNDEFINED
    assert reports[0].culprit_slots == ["m.origin#return"]


def test_attribution_default_charges_last_applied():
    diag = Diagnostic("nowhere.py", 1, "misc", "unrelated")
    repo = make_repo({"m.py": "def f(a):\n    return a\n"})
    reports = attribute_conflicts([diag], ["m.f#param:a", "m.f#return"], repo)
    assert reports[0].culprit_slots == ["m.f#return"]
    assert not reports[0].attributed


def test_attribution_requires_diagnostics():
    with pytest.raises(ValueError):
        attribute_conflicts([], ["m.f#return"], make_repo({"m.py": "x = 1\n"}))


# -- repair --------------------------------------------------------------------------


def _slots(files):
    return {s.slot_id: s for s in extract_entities(make_repo(files)).all_slots()}


def test_resolve_reverts_then_falls_back():
    slots = _slots({"m.py": "def f(a):\n    return a\n"})
    sid = "m.f#param:a"
    slots[sid].annotation, slots[sid].state, slots[sid].attempts = "int", SlotState.INFERRED, 1
    rep = ConflictReport([Diagnostic("m.py", 2, "arg-type", "bad")], [sid], ConflictCategory.PARAM_TOO_RESTRICTIVE, ["m.py:2: x"])
    (res,) = resolve_conflict(rep, slots, attempt_bound=3)
    assert res.action is ResolutionAction.INVALIDATE_FUNCTION
    new = res.new_states[sid]
    assert new.state is SlotState.UNANNOTATED and new.annotation is None
    assert any("call site" in line for line in new.feedback)

    slots[sid].attempts = 3
    (res,) = resolve_conflict(rep, slots, attempt_bound=3)
    assert res.action is ResolutionAction.FALLBACK
    assert res.new_states[sid].state is SlotState.FALLBACK
    assert res.new_states[sid].annotation == "Any"


@pytest.mark.parametrize(
    "slot,expected",
    [
        ("m.f#return", "Any"),
        ("m.C.__init__#return", "None"),
        ("m.C.__init__#param:x", "Any"),
        ("m.x#var", "Any"),
    ],
)
def test_fallback_type(slot, expected):
    assert fallback_type(slot) == expected


def test_validate_batch_clean_batch_validates(checker):
    files = {"m.py": "def f(a):\n    return a + 1\n\n\ndef g():\n    return f(2)\n"}
    repo = make_repo(files)
    slots = _slots(files)
    wc = WorkingCopy(repo)
    try:
        out = validate_batch(wc, checker, {"m.f#param:a": "int", "m.f#return": "int"}, slots, [])
    finally:
        wc.cleanup()
    assert sorted(out.validated) == ["m.f#param:a", "m.f#return"]
    assert out.checker_runs == 1
    assert slots["m.f#return"].state is SlotState.VALIDATED
    assert "def f(a: int) -> int:" in out.repo.text("m.py")


def test_validate_batch_keeps_good_part_of_a_bad_batch(checker):
    files = {"m.py": "def f(a):\n    return a\n\n\ndef g(b):\n    return b\n\n\ndef h():\n    return f(1)\n"}
    repo = make_repo(files)
    slots = _slots(files)
    for s in slots.values():
        s.attempts = 1
    wc = WorkingCopy(repo)
    try:
        out = validate_batch(wc, checker, {"m.f#param:a": "str", "m.g#param:b": "int"}, slots, [], attempt_bound=3)
    finally:
        wc.cleanup()
    assert out.requeued == ["m.f#param:a"]
    assert out.validated == ["m.g#param:b"]
    assert slots["m.f#param:a"].state is SlotState.UNANNOTATED
    assert "def g(b: int)" in out.repo.text("m.py")
    assert "def f(a)" in out.repo.text("m.py")


def test_validate_batch_falls_back_at_bound(checker):
    files = {"m.py": "def f(a):\n    return a\n\n\ndef h():\n    return f(1)\n"}
    slots = _slots(files)
    slots["m.f#param:a"].attempts = 3
    wc = WorkingCopy(make_repo(files))
    try:
        out = validate_batch(wc, checker, {"m.f#param:a": "str"}, slots, [], attempt_bound=3)
    finally:
        wc.cleanup()
    assert out.fallbacks == ["m.f#param:a"]
    assert slots["m.f#param:a"].state is SlotState.FALLBACK
    assert "def f(a: Any)" in out.repo.text("m.py")
    assert new_diagnostics([], out.diagnostics) == []


# -- baseline ------------------------------------------------------------------------


def test_add_ignore_comments_placement():
    repo = make_repo({"m.py": "a = 1\nb = 2  # note\nc = 3  # type: ignore\n"})
    diags = [Diagnostic("m.py", n, "misc", "x") for n in (1, 2, 3, 99)]
    out, added = add_ignore_comments(repo, diags)
    assert added == 2
    assert out.text("m.py").splitlines() == [
        "a = 1  # type: ignore",
        "b = 2  # type: ignore  # note",
        "c = 3  # type: ignore",
    ]


def test_prepare_baseline_inherent_errors(checker, derived):
    repo = load_repo(FIXTURES / "baseline_errors")
    result = prepare_baseline(repo, checker)
    assert result.comments_added == derived["baseline_fixture_inherent_errors"]
    text = result.repo.text("legacy/tools.py").splitlines()
    ignored = [i + 1 for i, ln in enumerate(text) if "# type: ignore" in ln]
    assert ignored == derived["baseline_fixture_error_lines"]
    assert checker.run_repo(result.repo, REFINEMENT_IGNORED) == []
    again = prepare_baseline(result.repo, checker)
    assert again.comments_added == 0
    assert again.repo.files == result.repo.files


def test_prepare_baseline_non_converging(checker):
    # a diagnostic on a line ending in a backslash continuation cannot take a comment
    repo = make_repo({"m.py": "x = len(5) + \\\n    1\n"})
    with pytest.raises(NonConverging):
        prepare_baseline(repo, checker)


def test_slot_named_twice_in_one_round_is_still_written(checker):
    # the wrong callable type draws one diagnostic in the body and one at the
    # call site; both name the same slot
    files = {
        "m.py": (
            "def run_job(job, payload):\n"
            "    return job(payload)\n\n\n"
            "def double(x):\n"
            "    return x * 2\n\n\n"
            "def main():\n"
            "    return run_job(double, 21)\n"
        )
    }
    slots = _slots(files)
    slots["m.run_job#param:job"].attempts = 3
    wc = WorkingCopy(make_repo(files))
    try:
        out = validate_batch(wc, checker, {"m.run_job#param:job": "Callable[[], int]"}, slots, [], attempt_bound=3)
    finally:
        wc.cleanup()
    assert len([r for r in out.reports if "m.run_job#param:job" in r.culprit_slots]) >= 2
    assert out.fallbacks == ["m.run_job#param:job"] and out.dropped == []
    assert "def run_job(job: Any, payload)" in out.repo.text("m.py")
