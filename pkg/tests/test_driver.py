from __future__ import annotations

import json

import pytest
from conftest import make_repo

from edg_typer.driver import (
    RunConfig,
    checkpoint_load,
    checkpoint_save,
    initial_state,
    progress_csv,
    run_iteration,
    run_pipeline,
)
from edg_typer.errors import CorruptCheckpoint, OracleUnavailable
from edg_typer.frontend.model import SlotState
from edg_typer.inference import (
    OracleRequest,
    OracleResponse,
    RuleOracle,
    ScriptedOracle,
)
from edg_typer.validation import Checker, CheckerConfig, WorkingCopy

ATTR_REPO = {
    "m.py": (
        "class Ctx:\n"
        "    def __init__(self):\n"
        "        self.funcs = []\n\n\n"
        "def current():\n"
        "    return Ctx()\n\n\n"
        "def after(f):\n"
        "    current().funcs.append(f)\n"
        "    return f\n"
    )
}


def test_singleton_function_is_validated():
    r = run_pipeline(make_repo({"m.py": "def g():\n    return 'x'\n"}))
    slot = r.state.slots["m.g#return"]
    assert (slot.state, slot.annotation) == (SlotState.VALIDATED, "str")
    assert r.report["iterations"] == 1
    assert r.report["terminated_by"] == "complete"
    assert r.report["conflict_free"]
    assert "def g() -> str:" in r.repo.text("m.py")
    assert r.fallback_count == 0


def test_repo_without_slots_does_no_iterations():
    r = run_pipeline(make_repo({"m.py": "import os\n"}))
    assert r.report["iterations"] == 0
    assert r.report["slots_total"] == 0
    assert r.report["coverage"] == 1.0


def test_fully_annotated_repo_is_left_alone():
    src = "def f(a: int) -> int:\n    return a\n"
    r = run_pipeline(make_repo({"m.py": src}))
    assert r.report["iterations"] == 0
    assert r.repo.text("m.py") == src


def test_probe_defers_cluster_and_adds_edge():
    r = run_pipeline(make_repo(ATTR_REPO))
    probed = [(t["iteration"], e) for t in r.report["trace"] for e in t["probed_edges"]]
    assert any(e["from"] == "m.after" and e["to"] == "m.Ctx.funcs" for _, e in probed)
    it = next(i for i, e in probed if e["from"] == "m.after")
    deferred = r.report["trace"][it - 1]["deferred"]
    assert any("m.after" in c for c in _cluster_members(r.report["trace"][it - 1], deferred))
    assert r.report["probed_edges"] >= 1
    assert r.state.slots["m.after#param:f"].state is SlotState.VALIDATED
    assert r.report["conflict_free"]


def _cluster_members(trace: dict, ids: list[str]) -> list[list[str]]:
    return [s["members"] for s in trace["selected"] if s["cluster"] in ids]


class _Invalid:
    def complete(self, request: OracleRequest) -> OracleResponse:
        return OracleResponse(annotations=[(s, "definitely[not(a type") for s in request.context.target_slots])


def test_adversarial_oracle_ends_in_fallbacks():
    files = {
        "m.py": (
            "class A:\n"
            "    def __init__(self, n):\n"
            "        self.n = n\n\n"
            "    def twice(self):\n"
            "        return self.n * 2\n\n\n"
            "def use():\n"
            "    return A(3).twice()\n"
        )
    }
    r = run_pipeline(make_repo(files), RunConfig(probe=False), oracle=_Invalid())
    states = {s.state for s in r.state.slots.values()}
    assert states == {SlotState.FALLBACK}
    assert r.report["conflict_free"]
    assert max(s.attempts for s in r.state.slots.values()) <= 3
    assert r.state.slots["m.A.__init__#return"].annotation == "None"


def test_wrong_answer_is_repaired():
    files = {"m.py": "def f(a):\n    return a\n\n\ndef g():\n    return f('x')\n"}
    oracle = ScriptedOracle({"m.f#param:a": ["int", "str"]}, fallback=RuleOracle())
    r = run_pipeline(make_repo(files), RunConfig(probe=False), oracle=oracle)
    slot = r.state.slots["m.f#param:a"]
    assert (slot.state, slot.annotation, slot.attempts) == (SlotState.VALIDATED, "str", 2)
    conflicts = [c for t in r.report["trace"] for c in t["conflicts"]]
    assert conflicts and conflicts[0]["culprits"] == ["m.f#param:a"]


def test_max_iterations_flushes_to_fallback():
    files = {"m.py": "def a():\n    return 1\n\n\ndef b():\n    return a()\n"}
    r = run_pipeline(make_repo(files), RunConfig(max_iterations=1))
    assert r.report["terminated_by"] == "max_iterations"
    assert r.state.pending() == []
    assert r.state.slots["m.a#return"].state is SlotState.VALIDATED
    assert r.state.slots["m.b#return"].state is SlotState.FALLBACK
    assert r.report["conflict_free"]


def test_idle_iteration_counts_as_stall():
    state = initial_state(make_repo({"m.py": "def f(a: int) -> int:\n    return a\n"}))
    with Checker(CheckerConfig(daemon=False)) as chk:
        wc = WorkingCopy(state.working_copy)
        try:
            run_iteration(state, RunConfig(), RuleOracle(), chk, wc)
        finally:
            wc.cleanup()
    assert state.iteration == 1 and state.stall_counter == 1


class _Down:
    def complete(self, request):
        raise OracleUnavailable("gone")


def test_oracle_outage_restores_state():
    state = initial_state(make_repo({"m.py": "def g():\n    return 'x'\n"}))
    before = state.fingerprint()
    with Checker(CheckerConfig(daemon=False)) as chk:
        wc = WorkingCopy(state.working_copy)
        try:
            with pytest.raises(OracleUnavailable):
                run_iteration(state, RunConfig(), _Down(), chk, wc)
        finally:
            wc.cleanup()
    assert state.fingerprint() == before
    assert state.iteration == 0 and state.trace == []


def test_checkpoint_round_trip_and_resume(tmp_path):
    repo = make_repo({"m.py": "def a():\n    return 1\n\n\ndef b():\n    return a()\n\n\ndef c():\n    return b()\n"})
    full = run_pipeline(repo)
    path = tmp_path / "ck.json"
    partial = run_pipeline(repo, stop_after=1, checkpoint_path=path)
    assert partial.state.iteration == 1
    resumed = run_pipeline(repo, resume=checkpoint_load(path))
    assert resumed.report == full.report
    assert resumed.repo.files == full.repo.files


def test_checkpoint_rejects_other_schema(tmp_path):
    state = initial_state(make_repo({"m.py": "def g():\n    return 'x'\n"}))
    path = tmp_path / "ck.json"
    checkpoint_save(state, path)
    data = json.loads(path.read_text())
    data["schema_version"] = 999
    path.write_text(json.dumps(data))
    with pytest.raises(CorruptCheckpoint):
        checkpoint_load(path)
    path.write_text("{not json")
    with pytest.raises(CorruptCheckpoint):
        checkpoint_load(path)
    path.write_text(json.dumps({"kind": "edg-typer-checkpoint", "schema_version": 1}))
    with pytest.raises(CorruptCheckpoint):
        checkpoint_load(path)


def test_progress_csv_tracks_iterations():
    r = run_pipeline(make_repo({"m.py": "def a():\n    return 1\n\n\ndef b():\n    return a()\n"}))
    rows = progress_csv(r.state).strip().splitlines()
    assert rows[0].startswith("iteration,")
    assert len(rows) == 1 + r.report["iterations"]
    assert rows[-1].split(",")[1] == rows[-1].split(",")[2]


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(cluster_bound=0)
    with pytest.raises(ValueError):
        RunConfig(oracle="magic")
    with pytest.raises(ValueError):
        RunConfig(oracle="http").make_oracle()


def test_parallel_oracle_calls_match_serial():
    files = {
        "m.py": "".join(f"def f{i}(x={i}):\n    return x + {i}\n\n\n" for i in range(6))
        + "def top():\n    return " + " + ".join(f"f{i}()" for i in range(6)) + "\n"
    }
    serial = run_pipeline(make_repo(files))
    parallel = run_pipeline(make_repo(files), RunConfig(oracle_workers=4))
    assert serial.report == parallel.report
