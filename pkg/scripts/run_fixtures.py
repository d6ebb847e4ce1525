"""Annotate the bundled fixture repositories with the rule oracle.

    python3 scripts/run_fixtures.py [--out DIR] [NAME ...]

Writes the annotated copy, report.json and progress.csv for each fixture
under DIR (default: ./runs) and prints one summary line per repository.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from edg_typer.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
DEFAULT = ["flask_mini", "shopcart", "exprcalc"]


def run(name: str, out: Path) -> int:
    dest = out / name
    dest.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    code = cli_main([
        "infer",
        "--repo", str(ROOT / "fixtures" / name),
        "--out", str(dest / "annotated"),
        "--report", str(dest / "report.json"),
        "--progress", str(dest / "progress.csv"),
    ])
    report = json.loads((dest / "report.json").read_text())
    print(f"  {name}: exit={code} terminated_by={report['terminated_by']} {time.perf_counter() - t0:.1f}s")
    return code


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("names", nargs="*", default=DEFAULT)
    args = ap.parse_args()
    return max(run(n, args.out) for n in args.names)


if __name__ == "__main__":
    raise SystemExit(main())
