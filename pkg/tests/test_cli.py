from __future__ import annotations

import json
import shutil

import pytest
from conftest import FIXTURES

from edg_typer.cli import ExitStatus, main


def _tree(tmp_path, files):
    for rel, text in files.items():
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return tmp_path


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "infer" in capsys.readouterr().out


def test_missing_required_argument():
    assert main(["infer"]) == ExitStatus.USAGE


def test_nonexistent_repo(tmp_path):
    assert main(["graph", "--repo", str(tmp_path / "nope")]) == ExitStatus.USAGE


def test_graph_json(tmp_path, capsys):
    repo = _tree(tmp_path / "r", {"m.py": "def a():\n    return 1\n\n\ndef b():\n    return a()\n"})
    assert main(["graph", "--repo", str(repo), "--clusters"]) == ExitStatus.OK
    data = json.loads(capsys.readouterr().out)
    assert sorted(n["id"] for n in data["nodes"]) == ["m.a", "m.b"]
    assert [(e["from"], e["to"]) for e in data["edges"]] == [("m.b", "m.a")]
    assert len(data["clusters"]) == 2


def test_graph_dot(tmp_path):
    repo = _tree(tmp_path / "r", {"m.py": "def a():\n    return 1\n"})
    out = tmp_path / "g.dot"
    assert main(["graph", "--repo", str(repo), "--format", "dot", "--out", str(out)]) == ExitStatus.OK
    assert out.read_text().startswith("digraph")


def test_infer_writes_outputs(tmp_path, capsys):
    repo = _tree(tmp_path / "r", {"m.py": "def g():\n    return 'x'\n"})
    out, report, progress = tmp_path / "out", tmp_path / "rep.json", tmp_path / "p.csv"
    code = main(["infer", "--repo", str(repo), "--out", str(out), "--report", str(report), "--progress", str(progress)])
    assert code == ExitStatus.OK
    assert "def g() -> str:" in (out / "m.py").read_text()
    assert json.loads(report.read_text())["conflict_free"] is True
    assert progress.read_text().startswith("iteration,")
    assert "conflict_free=true" in capsys.readouterr().out


def test_infer_with_fallbacks_exits_one(tmp_path):
    repo = _tree(tmp_path / "r", {"m.py": "def a():\n    return 1\n\n\ndef b():\n    return a()\n"})
    assert main(["infer", "--repo", str(repo), "--max-iterations", "1"]) == ExitStatus.FALLBACKS


def test_infer_checkpoint_resume(tmp_path):
    repo = _tree(tmp_path / "r", {"m.py": "def g():\n    return 'x'\n"})
    ck = tmp_path / "ck.json"
    assert main(["infer", "--repo", str(repo), "--checkpoint", str(ck)]) == ExitStatus.OK
    assert ck.exists()
    assert main(["infer", "--repo", str(repo), "--checkpoint", str(ck), "--resume"]) == ExitStatus.OK
    ck.write_text("garbage")
    assert main(["infer", "--repo", str(repo), "--checkpoint", str(ck), "--resume"]) == ExitStatus.USAGE


def test_unreachable_http_oracle(tmp_path, monkeypatch):
    repo = _tree(tmp_path / "r", {"m.py": "def g():\n    return 'x'\n"})
    monkeypatch.setenv("EDG_ORACLE_URL", "http://127.0.0.1:9/none")
    assert main(["infer", "--repo", str(repo), "--oracle", "http"]) == ExitStatus.ENVIRONMENT


def test_http_without_url(tmp_path, monkeypatch):
    repo = _tree(tmp_path / "r", {"m.py": "def g():\n    return 'x'\n"})
    monkeypatch.delenv("EDG_ORACLE_URL", raising=False)
    assert main(["infer", "--repo", str(repo), "--oracle", "http"]) == ExitStatus.USAGE


def test_missing_checker(tmp_path):
    repo = _tree(tmp_path / "r", {"m.py": "def g():\n    return 'x'\n"})
    assert main(["check", "--repo", str(repo), "--checker-path", str(tmp_path / "no-mypy")]) == ExitStatus.ENVIRONMENT


def test_check(tmp_path, capsys):
    clean = _tree(tmp_path / "c", {"m.py": "def g() -> str:\n    return 'x'\n"})
    assert main(["check", "--repo", str(clean)]) == ExitStatus.OK
    dirty = _tree(tmp_path / "d", {"m.py": "def g() -> int:\n    return 'x'\n"})
    assert main(["check", "--repo", str(dirty)]) == ExitStatus.FALLBACKS
    assert "[return-value]" in capsys.readouterr().out


def test_prepare_baseline_twice(tmp_path, capsys):
    repo = tmp_path / "legacy"
    shutil.copytree(FIXTURES / "baseline_errors", repo)
    archive = tmp_path / "arch.json"
    assert main(["prepare-baseline", "--repo", str(repo), "--archive", str(archive)]) == ExitStatus.OK
    first = (repo / "legacy" / "tools.py").read_text()
    assert "suppressions_added=3" in capsys.readouterr().out
    assert json.loads(archive.read_text())
    assert main(["prepare-baseline", "--repo", str(repo)]) == ExitStatus.OK
    assert "suppressions_added=0" in capsys.readouterr().out
    assert (repo / "legacy" / "tools.py").read_text() == first


def test_evaluate_self(tmp_path, capsys):
    truth = FIXTURES / "typed_shapes"
    csv_path = tmp_path / "cat.csv"
    assert main(["evaluate", "--pred", str(truth), "--truth", str(truth), "--csv", str(csv_path)]) == ExitStatus.OK
    out = capsys.readouterr().out
    assert "TypeSim 1.00 / TypeExact 1.00" in out
    assert csv_path.read_text().startswith("category,")


def test_evaluate_mismatch_warns(tmp_path, capsys):
    a = _tree(tmp_path / "a", {"m.py": "def f(x: int) -> int:\n    return x\n"})
    b = _tree(tmp_path / "b", {"m.py": "def f(x: int, y: int = 0) -> int:\n    return x\n"})
    assert main(["evaluate", "--pred", str(a), "--truth", str(b)]) == ExitStatus.OK
    assert "m.f#param:y" in capsys.readouterr().out


@pytest.mark.slow
def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "edg_typer", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "prepare-baseline" in proc.stdout
