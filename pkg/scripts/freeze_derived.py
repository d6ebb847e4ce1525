"""Compute the pinned reference values used by the test-suite.

Everything here is computed without the engine: SCC membership comes from a
reachability matrix, Jaccard values from explicit iteration over the
committed catalog, and checker outputs from invoking mypy directly.

    python3 scripts/freeze_derived.py   # rewrites tests/data/derived_values.json
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import jaccard_by_counting, load_catalog  # noqa: E402

MYPY = [sys.executable, "-m", "mypy", "--config-file=", "--no-error-summary", "--show-error-codes",
        "--ignore-missing-imports", "--check-untyped-defs", "--no-color-output", "--hide-error-context",
        "--no-pretty", "--explicit-package-bases", "--namespace-packages", "--python-version", "3.10"]

# f's parameter annotated int, called with a str
ARG_TYPE_REPO = {
    "pkg/__init__.py": "",
    "pkg/lib.py": "def f(x: int) -> int:\n    return x\n",
    "pkg/use.py": "from pkg.lib import f\n\n\ndef g():\n    return f(\"x\")\n",
}
ARG_TYPE_BASELINE = {
    "pkg/__init__.py": "",
    "pkg/lib.py": "def f(x):\n    return x\n",
    "pkg/use.py": "from pkg.lib import f\n\n\ndef g():\n    return f(\"x\")\n",
}


def mypy_lines(files: dict[str, str] | Path) -> list[str]:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        if isinstance(files, Path):
            root = files
        else:
            for rel, text in files.items():
                (root / rel).parent.mkdir(parents=True, exist_ok=True)
                (root / rel).write_text(text, encoding="utf-8")
        proc = subprocess.run([*MYPY, "--cache-dir", str(Path(tmp) / ".cache"), "."], cwd=root,
                              capture_output=True, text=True)
    return [ln for ln in proc.stdout.splitlines() if ": error:" in ln]


def code_of(line: str) -> str:
    return line.rsplit("[", 1)[1].rstrip("]") if line.endswith("]") else "other"


def main() -> None:
    obj, types = load_catalog()
    a_int, a_str = types["int"] - obj, types["str"] - obj
    arg_lines = mypy_lines(ARG_TYPE_REPO)
    base_lines = mypy_lines(ARG_TYPE_BASELINE)
    introduced = [ln for ln in arg_lines if ln not in base_lines]
    inherent = mypy_lines(ROOT / "fixtures" / "baseline_errors")
    values = {
        "flask_mini_py_files": sum(1 for _ in (ROOT / "fixtures" / "flask_mini").rglob("*.py")),
        "attrs_int_size": len(a_int),
        "attrs_str_size": len(a_str),
        "attrs_int_sorted": sorted(a_int),
        "type_sim_int_str": jaccard_by_counting(a_int, a_str),
        "type_sim_int_float": jaccard_by_counting(a_int, types["float"] - obj),
        "arg_type_fixture_diagnostics": [ln.split(": error: ", 1)[1] for ln in arg_lines],
        "arg_type_fixture_codes": [code_of(ln) for ln in arg_lines],
        "arg_type_introduced_codes": sorted(code_of(ln) for ln in introduced),
        "baseline_fixture_inherent_errors": len([ln for ln in inherent if code_of(ln) not in
                                                 ("var-annotated", "assignment", "has-type")]),
        "baseline_fixture_error_lines": sorted(int(ln.split(":")[1]) for ln in inherent),
    }
    out = ROOT / "tests" / "data" / "derived_values.json"
    out.write_text(json.dumps(values, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps({k: v for k, v in values.items() if k != "attrs_int_sorted"}, indent=1))


if __name__ == "__main__":
    main()
