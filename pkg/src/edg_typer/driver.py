"""The reorganize -> refine -> validate loop, checkpoints and run reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .edg import (
    DEFAULT_CLUSTER_BOUND,
    ClusterDAG,
    EntityCluster,
    EntityDependencyGraph,
    build_edg,
    condense_and_bound,
    merge_new_edges,
    select_targets,
)
from .errors import CorruptCheckpoint, OracleUnavailable, OversizeCluster
from .frontend.entities import analyze
from .frontend.model import EntityIndex, SlotState, TypeSlot, split_slot
from .frontend.refs import collect_statement_refs
from .frontend.repo import SourceRepo, load_repo
from .frontend.scope import Resolver
from .inference import (
    DEFAULT_TOKEN_BUDGET,
    HttpOracle,
    InferenceContext,
    MissingDependencyReport,
    Oracle,
    RuleOracle,
    build_context,
    infer_cluster_types,
    probe_missing_dependencies,
)
from .validation import (
    REFINEMENT_IGNORED,
    Checker,
    CheckerConfig,
    Diagnostic,
    WorkingCopy,
    make_fallback,
    new_diagnostics,
    validate_batch,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    oracle: str = "rule"  # rule | http
    oracle_url: str | None = None
    oracle_token: str | None = None
    oracle_model: str | None = None
    oracle_workers: int = 1
    cluster_bound: int = DEFAULT_CLUSTER_BOUND
    attempt_bound: int = 3
    max_iterations: int = 100
    stall_limit: int = 3
    token_budget: int = DEFAULT_TOKEN_BUDGET
    probe: bool = True  # False skips missing-dependency probing
    validate: bool = True  # False applies oracle output unchecked
    checker: CheckerConfig = field(default_factory=CheckerConfig)

    def __post_init__(self) -> None:
        for name in ("cluster_bound", "attempt_bound", "max_iterations", "stall_limit", "token_budget", "oracle_workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.oracle not in ("rule", "http"):
            raise ValueError(f"unknown oracle kind {self.oracle!r}")

    @property
    def ignored_codes(self) -> frozenset[str]:
        return self.checker.ignored_codes

    def make_oracle(self) -> Oracle:
        if self.oracle == "http":
            if not self.oracle_url:
                raise ValueError("http oracle needs an endpoint url")
            return HttpOracle(self.oracle_url, self.oracle_token, self.oracle_model)
        return RuleOracle()


@dataclass
class IterationTrace:
    iteration: int
    selected: list[dict] = field(default_factory=list)
    deferred: list[str] = field(default_factory=list)
    probed_edges: list[dict] = field(default_factory=list)
    unresolved_refs: list[str] = field(default_factory=list)
    annotated: dict[str, str] = field(default_factory=dict)
    conflicts: list[dict] = field(default_factory=list)
    resolutions: list[dict] = field(default_factory=list)
    fallbacks: list[str] = field(default_factory=list)
    checker_runs: int = 0
    edg_version: int = 0
    done_slots: int = 0
    total_slots: int = 0

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "selected": self.selected,
            "deferred": self.deferred,
            "probed_edges": self.probed_edges,
            "unresolved_refs": self.unresolved_refs,
            "annotated": dict(sorted(self.annotated.items())),
            "conflicts": self.conflicts,
            "resolutions": self.resolutions,
            "fallbacks": self.fallbacks,
            "checker_runs": self.checker_runs,
            "edg_version": self.edg_version,
            "done_slots": self.done_slots,
            "total_slots": self.total_slots,
        }

    @classmethod
    def from_json(cls, d: Mapping) -> IterationTrace:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class PipelineState:
    edg: EntityDependencyGraph
    slots: dict[str, TypeSlot]
    working_copy: SourceRepo
    iteration: int = 0
    stall_counter: int = 0
    trace: list[IterationTrace] = field(default_factory=list)
    baseline: list[Diagnostic] = field(default_factory=list)  # diagnostics of the current working copy
    initial_diagnostics: list[Diagnostic] = field(default_factory=list)
    parse_errors: list[tuple[str, str]] = field(default_factory=list)
    flushed: bool = False

    def pending(self) -> list[str]:
        return [s for s, v in self.slots.items() if v.state in (SlotState.UNANNOTATED, SlotState.INFERRED)]

    def counts(self) -> dict[str, int]:
        c = Counter(v.state.value for v in self.slots.values())
        return {s.value: c.get(s.value, 0) for s in SlotState}

    def fingerprint(self) -> tuple:
        return (
            self.edg.version,
            tuple(sorted((k, v.state.value, v.annotation, v.attempts) for k, v in self.slots.items())),
        )

    def snapshot(self) -> PipelineState:
        return PipelineState(
            self.edg.copy(),
            {k: v.copy() for k, v in self.slots.items()},
            self.working_copy,
            self.iteration,
            self.stall_counter,
            list(self.trace),
            list(self.baseline),
            list(self.initial_diagnostics),
            list(self.parse_errors),
            self.flushed,
        )


def initial_state(repo: SourceRepo) -> PipelineState:
    parsed, index, resolver = analyze(repo)
    refs = collect_statement_refs(parsed, index, resolver)
    edg = build_edg(index, refs)
    slots = {s.slot_id: s.copy() for s in index.all_slots()}
    return PipelineState(edg, slots, repo, parse_errors=list(index.parse_errors))


# -- one iteration ---------------------------------------------------------------


@dataclass
class _Plan:
    cluster: EntityCluster
    report: MissingDependencyReport | None = None
    candidates: dict[str, str] = field(default_factory=dict)
    oversize: bool = False


def _plan_cluster(
    cluster: EntityCluster,
    dag: ClusterDAG,
    index: EntityIndex,
    resolver: Resolver,
    slots: dict[str, TypeSlot],
    oracle: Oracle,
    config: RunConfig,
) -> _Plan:
    plan = _Plan(cluster)
    try:
        ctx: InferenceContext = build_context(
            cluster, dag, index, slots, token_budget=config.token_budget, attempt_bound=config.attempt_bound
        )
    except OversizeCluster:
        plan.oversize = True
        return plan
    if config.probe:
        plan.report = probe_missing_dependencies(ctx, oracle, index, resolver)
        if plan.report.proposed_edges:
            return plan  # the driver decides whether the edges are new
    for cand in infer_cluster_types(ctx, oracle, slots, config.attempt_bound):
        plan.candidates[cand.slot_id] = cand.type_expr
    return plan


def _selection_record(c: EntityCluster, dag: ClusterDAG, slots: Mapping[str, TypeSlot]) -> dict:
    by_id = dag.by_id()
    deps: dict[str, list[str]] = {}
    for cid in dag.successors(c.cluster_id):
        for m in by_id[cid].members:
            deps[m] = [slots[s].state.value for s in sorted(slots) if split_slot(s)[0] == m]
    return {"cluster": c.cluster_id, "members": list(c.members), "dependencies": deps}


def run_iteration(
    state: PipelineState,
    config: RunConfig,
    oracle: Oracle,
    checker: Checker,
    wc: WorkingCopy,
) -> PipelineState:
    """One reorganize/refine/validate round.  Mutates and returns ``state``;
    if the oracle becomes unavailable the state is restored and the error
    re-raised."""
    before = state.snapshot()
    try:
        return _run_iteration(state, config, oracle, checker, wc)
    except OracleUnavailable:
        wc.set(before.working_copy)
        state.__dict__.update(before.__dict__)
        raise


def _per_entity_slots(slots: Mapping[str, TypeSlot]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for sid in slots:
        out.setdefault(split_slot(sid)[0], []).append(sid)
    return out


def _run_iteration(
    state: PipelineState,
    config: RunConfig,
    oracle: Oracle,
    checker: Checker,
    wc: WorkingCopy,
) -> PipelineState:
    fp = state.fingerprint()
    trace = IterationTrace(state.iteration + 1)
    parsed, index, resolver = analyze(state.working_copy)
    dag = condense_and_bound(state.edg, config.cluster_bound)
    slots = state.slots

    # phase 1: reorganize
    targets = select_targets(dag, slots)
    trace.selected = [_selection_record(c, dag, slots) for c in targets]

    # phase 2: refine (oracle calls may overlap; results are used in cluster order)
    if config.oracle_workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(config.oracle_workers) as pool:
            plans = list(pool.map(lambda c: _plan_cluster(c, dag, index, resolver, slots, oracle, config), targets))
    else:
        plans = [_plan_cluster(c, dag, index, resolver, slots, oracle, config) for c in targets]

    # phase 3: validate, one batch per cluster
    for plan in plans:
        c = plan.cluster
        if plan.report is not None:
            trace.unresolved_refs.extend(plan.report.unresolved_refs)
            if plan.report.proposed_edges:
                new_edg, rejected = merge_new_edges(state.edg, plan.report.proposed_edges)
                added = [e for e in plan.report.proposed_edges if e.key not in {x.key for x in state.edg.edges}]
                trace.unresolved_refs.extend(str(r) for r in rejected)
                if new_edg.version != state.edg.version:
                    state.edg = new_edg
                    trace.probed_edges.extend(e.to_json() for e in added)
                    trace.deferred.append(c.cluster_id)
                    continue
                # nothing new: infer right away with the same context
                fresh = _plan_cluster(c, dag, index, resolver, slots, oracle, replace(config, probe=False))
                plan.candidates = fresh.candidates
                plan.oversize = fresh.oversize
        batch: dict[str, str] = {}
        for m in c.members:
            for sid in index[m].slot_ids() if m in index else []:
                slot = slots.get(sid)
                if slot is None or slot.state.annotated:
                    continue
                if sid in plan.candidates:
                    slot.annotation = plan.candidates[sid]
                    slot.state = SlotState.INFERRED
                    batch[sid] = plan.candidates[sid]
                elif plan.oversize or slot.attempts >= config.attempt_bound:
                    slots[sid] = make_fallback(slot)
                    batch[sid] = slots[sid].annotation or "Any"
                    trace.fallbacks.append(sid)
        if not batch:
            continue
        _validate(state, batch, config, checker, wc, trace)

    trace.edg_version = state.edg.version
    trace.total_slots = len(slots)
    trace.done_slots = sum(1 for s in slots.values() if s.state.annotated)
    state.iteration += 1
    state.stall_counter = 0 if state.fingerprint() != fp else state.stall_counter + 1
    state.trace.append(trace)
    return state


def _validate(
    state: PipelineState,
    batch: dict[str, str],
    config: RunConfig,
    checker: Checker,
    wc: WorkingCopy,
    trace: IterationTrace,
) -> None:
    slots = state.slots
    if not config.validate:
        from .frontend.rewrite import apply_annotations

        state.working_copy = apply_annotations(state.working_copy, batch)
        wc.set(state.working_copy)
        for sid in batch:
            if slots[sid].state is SlotState.INFERRED:
                slots[sid].state = SlotState.VALIDATED
            trace.annotated[sid] = batch[sid]
        return
    outcome = validate_batch(wc, checker, batch, slots, state.baseline, config.attempt_bound, config.ignored_codes)
    state.working_copy = outcome.repo
    state.baseline = outcome.diagnostics
    trace.checker_runs += outcome.checker_runs
    written = (set(batch) | set(outcome.fallbacks)) - set(outcome.dropped) - set(outcome.requeued)
    for sid in sorted(written):
        if slots[sid].state.annotated:
            trace.annotated[sid] = slots[sid].annotation or "Any"
    trace.fallbacks.extend(s for s in outcome.fallbacks if s not in trace.fallbacks)
    trace.conflicts.extend(r.to_json() for r in outcome.reports)
    trace.resolutions.extend(r.to_json() for r in outcome.resolutions)
    for sid in outcome.dropped:
        trace.resolutions.append({"action": "Dropped", "slots": [sid], "feedback": [], "states": {}})


def _flush(state: PipelineState, config: RunConfig, checker: Checker, wc: WorkingCopy) -> None:
    """Every slot still open becomes a fallback, validated as one batch."""
    trace = IterationTrace(state.iteration + 1)
    batch: dict[str, str] = {}
    for sid in state.pending():
        state.slots[sid] = make_fallback(state.slots[sid])
        batch[sid] = state.slots[sid].annotation or "Any"
        trace.fallbacks.append(sid)
    if batch:
        _validate(state, batch, config, checker, wc, trace)
    state.flushed = True
    trace.edg_version = state.edg.version
    trace.total_slots = len(state.slots)
    trace.done_slots = sum(1 for s in state.slots.values() if s.state.annotated)
    state.iteration += 1
    state.trace.append(trace)


# -- checkpoints ---------------------------------------------------------------------


def state_to_json(state: PipelineState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "edg-typer-checkpoint",
        "iteration": state.iteration,
        "stall_counter": state.stall_counter,
        "flushed": state.flushed,
        "edg": state.edg.to_json(),
        "slots": [state.slots[k].to_json() for k in sorted(state.slots)],
        "trace": [t.to_json() for t in state.trace],
        "baseline": [d.to_json() for d in state.baseline],
        "initial_diagnostics": [d.to_json() for d in state.initial_diagnostics],
        "parse_errors": [list(p) for p in state.parse_errors],
        "root": str(state.working_copy.root),
        "files": [{"path": p, "text": t} for p, t in state.working_copy.files],
    }


def state_from_json(data: Mapping) -> PipelineState:
    if not isinstance(data, Mapping) or data.get("kind") != "edg-typer-checkpoint":
        raise CorruptCheckpoint("not a checkpoint file")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise CorruptCheckpoint(f"checkpoint schema {data.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    try:
        repo = SourceRepo(Path(data["root"]), tuple((f["path"], f["text"]) for f in data["files"]))
        slots = {s["slot"]: TypeSlot.from_json(s) for s in data["slots"]}
        return PipelineState(
            EntityDependencyGraph.from_json(data["edg"]),
            slots,
            repo,
            int(data["iteration"]),
            int(data["stall_counter"]),
            [IterationTrace.from_json(t) for t in data["trace"]],
            [Diagnostic.from_json(d) for d in data["baseline"]],
            [Diagnostic.from_json(d) for d in data["initial_diagnostics"]],
            [(p[0], p[1]) for p in data.get("parse_errors", [])],
            bool(data.get("flushed", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"malformed checkpoint: {exc!r}") from None


def checkpoint_save(state: PipelineState, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state_to_json(state), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def checkpoint_load(path: str | Path) -> PipelineState:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from None
    return state_from_json(data)


# -- the whole run ---------------------------------------------------------------------


@dataclass
class PipelineResult:
    repo: SourceRepo
    state: PipelineState
    report: dict

    @property
    def fallback_count(self) -> int:
        return self.report["slot_states"].get(SlotState.FALLBACK.value, 0)


def build_report(state: PipelineState, final_new: list[Diagnostic], config: RunConfig) -> dict:
    counts = state.counts()
    total = len(state.slots)
    done = counts[SlotState.VALIDATED.value] + counts[SlotState.FALLBACK.value]
    precise = sum(
        1 for s in state.slots.values() if s.state is SlotState.VALIDATED and s.annotation not in (None, "Any")
    )
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "edg-typer-report",
        "iterations": state.iteration,
        "terminated_by": (
            "complete" if not state.flushed else ("stall" if state.stall_counter >= config.stall_limit else "max_iterations")
        ),
        "slots_total": total,
        "slot_states": counts,
        "coverage": round(done / total, 6) if total else 1.0,
        "precise_coverage": round(precise / total, 6) if total else 1.0,
        "entities": len(state.edg.nodes),
        "edges": len(state.edg),
        "probed_edges": sum(1 for e in state.edg.edges if e.origin.value == "Probed"),
        "parse_errors": [list(p) for p in state.parse_errors],
        "conflict_free": not final_new,
        "final_new_diagnostics": [d.to_json() for d in final_new],
        "annotations": {k: v.annotation for k, v in sorted(state.slots.items())},
        "trace": [t.to_json() for t in state.trace],
    }


def progress_csv(state: PipelineState) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "annotated_slots", "total_slots", "annotated_pct", "edg_version"])
    for t in state.trace:
        pct = 100.0 * t.done_slots / t.total_slots if t.total_slots else 100.0
        w.writerow([t.iteration, t.done_slots, t.total_slots, f"{pct:.2f}", t.edg_version])
    return buf.getvalue()


def run_pipeline(
    repo: SourceRepo | str | Path,
    config: RunConfig | None = None,
    oracle: Oracle | None = None,
    resume: PipelineState | None = None,
    checkpoint_path: str | Path | None = None,
    stop_after: int | None = None,
) -> PipelineResult:
    """Run to completion (or until ``stop_after`` iterations, for checkpoint tests).

    ``resume`` continues from a loaded checkpoint instead of ``repo``.
    """
    config = config or RunConfig()
    oracle = oracle or config.make_oracle()
    if resume is not None:
        state = resume
    else:
        src = repo if isinstance(repo, SourceRepo) else load_repo(repo)
        state = initial_state(src)
    wc = WorkingCopy(state.working_copy)
    checker = Checker(config.checker)
    try:
        if resume is None:
            state.baseline = checker.run_dir(wc.root, config.ignored_codes)
            state.initial_diagnostics = list(state.baseline)
        while state.pending() and not state.flushed:
            if stop_after is not None and state.iteration >= stop_after:
                break
            if state.iteration >= config.max_iterations or state.stall_counter >= config.stall_limit:
                _flush(state, config, checker, wc)
                break
            run_iteration(state, config, oracle, checker, wc)
            if checkpoint_path is not None:
                checkpoint_save(state, checkpoint_path)
        final = checker.run_dir(wc.root, config.ignored_codes)
        final_new = new_diagnostics(state.initial_diagnostics, final)
    finally:
        checker.close()
        wc.cleanup()
    report = build_report(state, final_new, config)
    return PipelineResult(state.working_copy, state, report)


def write_report(report: dict, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


__all__ = [
    "IterationTrace",
    "PipelineResult",
    "PipelineState",
    "RunConfig",
    "build_report",
    "checkpoint_load",
    "checkpoint_save",
    "initial_state",
    "progress_csv",
    "run_iteration",
    "run_pipeline",
    "write_report",
    "REFINEMENT_IGNORED",
]
