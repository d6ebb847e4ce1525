"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the lines are repeated
in the terminal summary) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path

import pytest
from conftest import CONFLICT_FIXTURES, FIXTURES, PIPELINE_FIXTURES, record_criterion
from oracles import (
    forced_large_scc_digraph,
    jaccard_by_counting,
    load_catalog,
    random_digraph,
    scc_partition,
)

from edg_typer.cli import main as cli_main
from edg_typer.driver import checkpoint_load, run_pipeline
from edg_typer.edg import (
    DependencyEdge,
    EdgeKind,
    EntityDependencyGraph,
    build_edg,
    condense_and_bound,
)
from edg_typer.frontend import (
    EntityKind,
    analyze,
    apply_annotations,
    collect_statement_refs,
    load_repo,
    strip_annotations,
)
from edg_typer.frontend.model import split_slot
from edg_typer.frontend.rewrite import read_annotations
from edg_typer.inference import RuleOracle, ScriptedOracle
from edg_typer.metrics import AttrCatalog, evaluate_repo_pair, type_exact, type_sim
from edg_typer.typeexpr import normalize_type
from edg_typer.validation import REFINEMENT_IGNORED, new_diagnostics, prepare_baseline

BOUND = 5
N_GRAPHS = 1000
N_TYPE_PAIRS = 500


def plain_graph(nodes, edges) -> EntityDependencyGraph:
    g = EntityDependencyGraph({n: EntityKind.FUNCTION for n in nodes})
    for u, v in sorted(edges):
        g.add_edge(DependencyEdge(u, v, EdgeKind.CALL))
    return g


def kahn_acyclic(nodes, edges) -> bool:
    indeg = {n: 0 for n in nodes}
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for s, d in edges:
        if s == d:
            return False
        succ[s].append(d)
        indeg[d] += 1
    queue = [n for n, k in indeg.items() if k == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for d in succ[n]:
            indeg[d] -= 1
            if indeg[d] == 0:
                queue.append(d)
    return seen == len(nodes)


# -- shared runs ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fixture_runs():
    return {name: run_pipeline(FIXTURES / name) for name in PIPELINE_FIXTURES}


def _inject(name: str) -> dict:
    return json.loads((FIXTURES / "conflicts" / name / "inject.json").read_text(encoding="utf-8"))


class _WrongOnce:
    """Rule answers, except the injected slot is answered wrongly the first time."""

    def __init__(self, slot: str, wrong: str) -> None:
        self.slot, self.wrong, self.done = slot, wrong, False
        self.rule = RuleOracle()

    def complete(self, request):
        resp = self.rule.complete(request)
        if self.slot in request.context.target_slots and resp.annotations and not self.done:
            self.done = True
            resp.annotations = [(s, self.wrong if s == self.slot else t) for s, t in resp.annotations]
        return resp


@pytest.fixture(scope="module")
def conflict_runs():
    out = {}
    for name in CONFLICT_FIXTURES:
        inj = _inject(name)
        persistent = ScriptedOracle({inj["slot"]: [inj["wrong"]]}, fallback=RuleOracle())
        out[name] = {
            "inject": inj,
            "persistent": run_pipeline(FIXTURES / "conflicts" / name, oracle=persistent),
            "transient": run_pipeline(FIXTURES / "conflicts" / name, oracle=_WrongOnce(inj["slot"], inj["wrong"])),
        }
    return out


# -- criterion 1 -------------------------------------------------------------------------------


def test_criterion_1_condensation_matches_reachability_oracle():
    rng = random.Random(20240601)
    graphs = [random_digraph(rng) for _ in range(N_GRAPHS)]
    mismatches = cyclic = not_subset = 0
    elapsed = 0.0
    for nodes, edges in graphs:
        t0 = time.perf_counter()
        exact = condense_and_bound(plain_graph(nodes, edges), bound=None)
        bounded = condense_and_bound(plain_graph(nodes, edges), bound=BOUND)
        elapsed += time.perf_counter() - t0
        ref = scc_partition(nodes, edges)
        if {frozenset(c.members) for c in exact.clusters} != ref:
            mismatches += 1
        for dag in (exact, bounded):
            if not kahn_acyclic([c.cluster_id for c in dag.clusters], dag.cluster_edges):
                cyclic += 1
        if not all(any(set(c.members) <= r for r in ref) for c in bounded.clusters):
            not_subset += 1
    ok = mismatches == 0 and cyclic == 0 and not_subset == 0 and elapsed < 30.0
    record_criterion(
        1,
        "cluster membership equals mutual-reachability oracle, condensation acyclic",
        ok,
        f"{N_GRAPHS} graphs, {mismatches} mismatches, {cyclic} cyclic, {not_subset} bounded clusters outside an SCC, {elapsed:.1f} s",
    )
    assert ok


# -- criterion 2 ------------------------------------------------------------------------------


def test_criterion_2_bound_partition_and_edge_conservation():
    rng = random.Random(20240602)
    violations: list[str] = []
    split_sccs = 0
    for i in range(N_GRAPHS):
        nodes, edges = forced_large_scc_digraph(rng)
        dag = condense_and_bound(plain_graph(nodes, edges), bound=BOUND)
        split_sccs += any(len(r) > BOUND for r in scc_partition(nodes, edges))
        members = [m for c in dag.clusters for m in c.members]
        if sorted(members) != sorted(nodes):
            violations.append(f"graph {i}: clusters do not partition the nodes")
        big = [c.cluster_id for c in dag.clusters if len(c.members) > BOUND]
        if big:
            violations.append(f"graph {i}: oversize clusters {big}")
        removed = {(e.src, e.dst) for c in dag.clusters for e in c.removed_internal_edges}
        for u, v in edges:
            cu, cv = dag.cluster_of[u], dag.cluster_of[v]
            if not (cu == cv or (cu, cv) in dag.cluster_edges or (u, v) in removed):
                violations.append(f"graph {i}: edge {u}->{v} lost")
        if not removed <= edges:
            violations.append(f"graph {i}: removed edge not in graph")
        if not kahn_acyclic([c.cluster_id for c in dag.clusters], dag.cluster_edges):
            violations.append(f"graph {i}: cyclic condensation")
    ok = not violations and split_sccs == N_GRAPHS
    record_criterion(
        2,
        f"clusters <= {BOUND}, partition nodes, every edge internal/crossing/removed",
        ok,
        f"{N_GRAPHS} graphs with planted SCCs > {BOUND}, {len(violations)} violations",
    )
    assert ok, violations[:5]


# -- criterion 3 -------------------------------------------------------------------------------


def wave_violations(root: Path, result, bound: int = BOUND) -> list[str]:
    """Replay a run: rebuild the graph each iteration saw and check every
    selected cluster only depended on already-annotated clusters."""
    repo = load_repo(root)
    parsed, index, resolver = analyze(repo)
    base = build_edg(index, collect_statement_refs(parsed, index, resolver))
    annotated = {s.slot_id for s in index.all_slots() if s.annotation is not None}
    slots_of: dict[str, list[str]] = {}
    for sid in result.state.slots:
        slots_of.setdefault(split_slot(sid)[0], []).append(sid)
    probed: list[DependencyEdge] = []
    out: list[str] = []
    for t in result.report["trace"]:
        g = base.copy()
        for e in probed:
            g.add_edge(e)
        dag = condense_and_bound(g, bound)
        by_members = {tuple(sorted(c.members)): c for c in dag.clusters}
        by_id = dag.by_id()
        for sel in t["selected"]:
            c = by_members.get(tuple(sorted(sel["members"])))
            if c is None:
                out.append(f"iteration {t['iteration']}: cluster {sel['members']} not in the replayed graph")
                continue
            for d in dag.successors(c.cluster_id):
                for m in by_id[d].members:
                    missing = [s for s in slots_of.get(m, []) if s not in annotated]
                    if missing:
                        out.append(f"iteration {t['iteration']}: {sel['members']} selected before {missing}")
            recorded = [st for states in sel["dependencies"].values() for st in states]
            if any(st in ("Unannotated", "Inferred") for st in recorded):
                out.append(f"iteration {t['iteration']}: trace records an open dependency for {sel['members']}")
        annotated |= set(t["annotated"])
        probed.extend(DependencyEdge.from_json(e) for e in t["probed_edges"])
    return out


def test_criterion_3_wave_validity(fixture_runs, conflict_runs):
    violations: list[str] = []
    runs = 0
    selections = 0
    for name, result in fixture_runs.items():
        violations += [f"{name}: {v}" for v in wave_violations(FIXTURES / name, result)]
        runs += 1
        selections += sum(len(t["selected"]) for t in result.report["trace"])
    for name, pair in conflict_runs.items():
        for mode in ("persistent", "transient"):
            result = pair[mode]
            violations += [f"{name}/{mode}: {v}" for v in wave_violations(FIXTURES / "conflicts" / name, result)]
            runs += 1
            selections += sum(len(t["selected"]) for t in result.report["trace"])
    ok = not violations and selections > 0
    record_criterion(3, "every selected cluster's dependencies were annotated first", ok, f"{runs} runs, {selections} selections, {len(violations)} violations")
    assert ok, violations[:5]


# -- criterion 4 -------------------------------------------------------------------------------


def test_criterion_4_conflict_free_fixtures(tmp_path, checker):
    details = []
    ok = True
    for name in PIPELINE_FIXTURES:
        src = FIXTURES / name
        n_files = len(list(src.rglob("*.py")))
        out_dir, report_path = tmp_path / name, tmp_path / f"{name}.json"
        t0 = time.perf_counter()
        code = cli_main(["infer", "--repo", str(src), "--oracle", "rule", "--out", str(out_dir), "--report", str(report_path)])
        elapsed = time.perf_counter() - t0
        report = json.loads(report_path.read_text(encoding="utf-8"))
        tracked = checker.run_dir(out_dir, REFINEMENT_IGNORED)
        # nothing ignored: the output may only carry diagnostics the input already had
        introduced = new_diagnostics(checker.run_dir(src, ()), checker.run_dir(out_dir, ()))
        good = (
            code in (0, 1)
            and 5 <= n_files <= 15
            and report["iterations"] <= 50
            and report["conflict_free"]
            and not tracked
            and not introduced
            and elapsed < 120.0
        )
        ok &= good
        details.append(f"{name}: {n_files} files, {report['iterations']} it, {len(tracked)} errors, {elapsed:.1f} s")
    record_criterion(4, "rule-oracle infer terminates and output is checker-clean", ok, "; ".join(details))
    assert ok


# -- criterion 5 ------------------------------------------------------------------------------


def test_criterion_5_backtracking_repair(conflict_runs, checker):
    named = 0
    problems: list[str] = []
    for name, pair in conflict_runs.items():
        inj = pair["inject"]
        slot = inj["slot"]
        for mode in ("persistent", "transient"):
            result = pair[mode]
            reports = [c for t in result.report["trace"] for c in t["conflicts"]]
            hits = [c for c in reports if slot in c["culprits"]]
            if not hits:
                problems.append(f"{name}/{mode}: slot not named")
            elif inj["code"] not in {d["code"] for c in hits for d in c["diagnostics"]}:
                problems.append(f"{name}/{mode}: expected a {inj['code']} diagnostic")
            elif mode == "persistent":
                named += 1
            if checker.run_repo(result.repo, REFINEMENT_IGNORED) or not result.report["conflict_free"]:
                problems.append(f"{name}/{mode}: output not clean")
            worst = max(s.attempts for s in result.state.slots.values())
            if worst > 3:
                problems.append(f"{name}/{mode}: {worst} attempts")
            final = result.state.slots[slot]
            if mode == "persistent" and (final.state.value, final.annotation) != ("Fallback", "Any"):
                problems.append(f"{name}/persistent: ended as {final.state.value} {final.annotation}")
            if mode == "transient" and (final.state.value != "Validated" or final.annotation == inj["wrong"]):
                problems.append(f"{name}/transient: ended as {final.state.value} {final.annotation}")
    ok = named == len(CONFLICT_FIXTURES) and not problems
    record_criterion(
        5,
        "injected conflicts attributed, repaired, bounded, persistent ones end as Any",
        ok,
        f"named {named}/{len(CONFLICT_FIXTURES)}; {len(problems)} problems",
    )
    assert ok, problems


# -- criterion 6 --------------------------------------------------------------------------------


def test_criterion_6_metric_identity_and_round_trip(fixture_runs):
    repos = {"typed_shapes": load_repo(FIXTURES / "typed_shapes")}
    repos.update({f"{n} (annotated)": r.repo for n, r in fixture_runs.items()})
    details = []
    ok = True
    for name, repo in repos.items():
        ident = evaluate_repo_pair(repo, repo)
        stripped, archive = strip_annotations(repo)
        restored = apply_annotations(stripped, archive.entries)
        rt = evaluate_repo_pair(restored, repo)
        n_annotated = len(read_annotations(repo))
        good = (
            ident.mean_sim == 1.0
            and ident.exact_rate == 1.0
            and rt.exact_rate == 1.0
            and len(rt.records) == n_annotated > 0
        )
        ok &= good
        details.append(f"{name}: {len(rt.records)} slots")
    record_criterion(6, "self-evaluation is 1.00/1.00 and strip/restore is exact", ok, "; ".join(details))
    assert ok


# -- criterion 7 ---------------------------------------------------------------------------------

_SCALARS = ["int", "str", "float", "bytes", "bool", "None"]
_GENERIC_ARITY = {"list": 1, "set": 1, "frozenset": 1, "dict": 2, "collections.deque": 1, "tuple": None}
_SPELLINGS = {
    "list": ["list", "List", "typing.List"],
    "set": ["set", "Set"],
    "frozenset": ["frozenset", "FrozenSet"],
    "dict": ["dict", "Dict", "typing.Dict"],
    "tuple": ["tuple", "Tuple"],
    "collections.deque": ["collections.deque", "Deque"],
}


def _random_type(rng: random.Random, heads: list[str], depth: int = 0):
    """A random type as a canonical tree: ('any',), ('t', head, args) or ('u', members)."""
    r = rng.random()
    if r < 0.05:
        return ("any",)
    if r < 0.25 and depth == 0:
        members = {_random_type(rng, heads, depth + 1) for _ in range(rng.randint(2, 3))}
        flat = set()
        for m in members:
            flat |= set(m[1]) if m[0] == "u" else {m}
        return ("u", frozenset(flat)) if len(flat) > 1 else next(iter(flat))
    if r < 0.45 and depth < 2:
        head = rng.choice(sorted(_GENERIC_ARITY))
        arity = _GENERIC_ARITY[head] or rng.randint(1, 3)
        args = tuple(_random_type(rng, _SCALARS, depth + 1) for _ in range(arity))
        return ("t", head, args)
    return ("t", rng.choice(heads), ())


def _spell(t, rng: random.Random) -> str:
    if t[0] == "any":
        return "Any"
    if t[0] == "u":
        members = sorted(t[1], key=repr)  # set order varies with the hash seed
        rng.shuffle(members)
        parts = [_spell(m, rng) for m in members]
        if len(members) == 2 and ("t", "None", ()) in members and rng.random() < 0.5:
            other = next(m for m in members if m != ("t", "None", ()))
            return f"Optional[{_spell(other, rng)}]"
        return f"Union[{', '.join(parts)}]" if rng.random() < 0.5 else " | ".join(parts)
    _, head, args = t
    if not args:
        return head
    name = rng.choice(_SPELLINGS.get(head, [head]))
    return f"{name}[{', '.join(_spell(a, rng) for a in args)}]"


def _oracle_attrs(t, obj: set[str], types: dict[str, set[str]]) -> set[str]:
    if t[0] == "any":
        return set()
    if t[0] == "u":
        sets = [_oracle_attrs(m, obj, types) for m in t[1]]
        out = sets[0]
        for s in sets[1:]:
            out = {x for x in out if x in s}
        return out
    return {x for x in types[t[1]] if x not in obj}


def test_criterion_7_metric_properties():
    obj, types = load_catalog()
    heads = sorted(types)
    cat = AttrCatalog.builtin()
    rng = random.Random(20240607)
    failures: list[str] = []
    exact_pairs = 0
    for _ in range(N_TYPE_PAIRS):
        a = _random_type(rng, heads)
        b = a if rng.random() < 0.3 else _random_type(rng, heads)
        ta, tb = _spell(a, rng), _spell(b, rng)
        sim_ab, sim_ba = type_sim(ta, tb, cat), type_sim(tb, ta, cat)
        oa, ob = _oracle_attrs(a, obj, types), _oracle_attrs(b, obj, types)
        if not oa and not ob:
            expect = 1.0 if a == b else 0.0
        else:
            expect = jaccard_by_counting(oa, ob)
        exact = type_exact(ta, tb)
        exact_pairs += exact
        for t in (ta, tb):
            n = normalize_type(t)
            if normalize_type(n.text) != n or normalize_type(n.text).text != n.text:
                failures.append(f"normalize not idempotent on {t}")
        if sim_ab != sim_ba:
            failures.append(f"asymmetric {ta} / {tb}")
        if not 0.0 <= sim_ab <= 1.0:
            failures.append(f"out of range {ta} / {tb}")
        if exact != (a == b):
            failures.append(f"exactness {ta} / {tb}: {exact}")
        if exact and sim_ab != 1.0:
            failures.append(f"exact but sim {sim_ab}: {ta} / {tb}")
        if sim_ab != expect:
            failures.append(f"{ta} / {tb}: {sim_ab} != oracle {expect}")
    ok = not failures and exact_pairs > 0
    record_criterion(
        7,
        "type_sim symmetric, in [0,1], exact implies 1, normalize idempotent, equals set oracle",
        ok,
        f"{N_TYPE_PAIRS} pairs, {exact_pairs} exact, {len(failures)} failures",
    )
    assert ok, failures[:5]


# -- criterion 8 ---------------------------------------------------------------------------------


def test_criterion_8_baseline_preparation(checker, derived):
    repo = load_repo(FIXTURES / "baseline_errors")
    stripped, _ = strip_annotations(repo)
    inherent = checker.run_repo(stripped, REFINEMENT_IGNORED)
    first = prepare_baseline(repo, checker)
    comments = sum(text.count("# type: ignore") for _, text in first.repo.files)
    clean = checker.run_repo(first.repo, REFINEMENT_IGNORED) == []
    second = prepare_baseline(first.repo, checker)
    ok = (
        len(inherent) == derived["baseline_fixture_inherent_errors"] == 3
        and first.comments_added == comments == 3
        and clean
        and second.comments_added == 0
        and second.repo.files == first.repo.files
    )
    record_criterion(8, "baseline gets exactly 3 suppressions, is clean, rerun is a no-op", ok, f"{len(inherent)} inherent, {comments} comments")
    assert ok


# -- criterion 9 ---------------------------------------------------------------------------------


def test_criterion_9_determinism_and_resume(fixture_runs, tmp_path):
    details = []
    ok = True
    for name, first in fixture_runs.items():
        second = run_pipeline(FIXTURES / name)
        same = (
            json.dumps(first.report, sort_keys=True) == json.dumps(second.report, sort_keys=True)
            and first.repo.files == second.repo.files
        )
        k = max(1, first.report["iterations"] // 2)
        ck = tmp_path / f"{name}.ckpt.json"
        run_pipeline(FIXTURES / name, checkpoint_path=ck, stop_after=k)
        resumed = run_pipeline(FIXTURES / name, resume=checkpoint_load(ck))
        same_resume = (
            json.dumps(resumed.report, sort_keys=True) == json.dumps(first.report, sort_keys=True)
            and resumed.repo.files == first.repo.files
        )
        ok &= same and same_resume
        details.append(f"{name}: rerun {'identical' if same else 'DIFFERS'}, resume@{k} {'identical' if same_resume else 'DIFFERS'}")
    record_criterion(9, "reruns are byte-identical and checkpoint resume matches", ok, "; ".join(details))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
