from __future__ import annotations

from pathlib import Path

import pytest

from edg_typer.frontend import SourceRepo
from edg_typer.validation import Checker, CheckerConfig

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
PIPELINE_FIXTURES = ("flask_mini", "shopcart", "exprcalc")
CONFLICT_FIXTURES = ("arg_type", "call_arg", "name_defined", "override", "return_value")


def make_repo(files: dict[str, str], root: str = "/virtual") -> SourceRepo:
    return SourceRepo(Path(root), tuple(files.items()))


@pytest.fixture(scope="session")
def checker():
    chk = Checker(CheckerConfig(daemon=False))
    yield chk
    chk.close()


@pytest.fixture
def write_tree(tmp_path):
    def _write(files: dict[str, str]) -> Path:
        for rel, text in files.items():
            p = tmp_path / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text, encoding="utf-8")
        return tmp_path

    return _write


@pytest.fixture(scope="session")
def derived():
    import json

    return json.loads((ROOT / "tests" / "data" / "derived_values.json").read_text(encoding="utf-8"))


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
CRITERIA_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}" + (f" ({detail})" if detail else "")
    CRITERIA_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split("criterion ", 1)[1].split(":", 1)[0])):
            terminalreporter.write_line(line)
