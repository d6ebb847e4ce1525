"""Checker-in-the-loop validation and backtracking repair.

The checker is an external process (mypy); this module is the only place
that knows its command line and output format.
"""

from __future__ import annotations

import ast
import io
import logging
import os
import re
import shutil
import subprocess
import sys
import tempfile
import time
import tokenize
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import CheckerCrashed, CheckerMissing, NonConverging
from .frontend.entities import ParsedRepo, build_entities
from .frontend.model import (
    Entity,
    EntityKind,
    SlotState,
    StatementRef,
    TypeSlot,
    split_slot,
)
from .frontend.refs import collect_statement_refs
from .frontend.repo import SourceRepo
from .frontend.rewrite import apply_annotations, strip_annotations
from .typeexpr import normalize_type

log = logging.getLogger(__name__)

# codes that reflect incomplete annotations rather than defects
REFINEMENT_IGNORED = frozenset({"var-annotated", "assignment", "has-type"})
DEFAULT_ATTEMPT_BOUND = 3

BASE_FLAGS = (
    "--config-file=",
    "--no-error-summary",
    "--show-error-codes",
    "--ignore-missing-imports",
    "--check-untyped-defs",
    "--no-color-output",
    "--hide-error-context",
    "--no-pretty",
    "--explicit-package-bases",
    "--namespace-packages",
)

_LINE_RE = re.compile(r"^(?P<file>[^:\n]+?):(?P<line>\d+):(?:\d+:)? (?P<sev>error|note|warning): (?P<msg>.*?)(?:  \[(?P<code>[a-z0-9-]+)\])?$")


@dataclass(frozen=True, order=True)
class Diagnostic:
    file: str
    line: int
    error_code: str
    message: str

    @property
    def key(self) -> tuple[str, str, str]:
        """Line-insensitive identity (inserted imports shift line numbers)."""
        return (self.file, self.error_code, self.message)

    def render(self) -> str:
        return f"{self.file}:{self.line}: error: {self.message}  [{self.error_code}]"

    def to_json(self) -> dict:
        return {"file": self.file, "line": self.line, "code": self.error_code, "message": self.message}

    @classmethod
    def from_json(cls, d: Mapping) -> Diagnostic:
        return cls(d["file"], int(d["line"]), d["code"], d["message"])


def parse_diagnostics(output: str) -> list[Diagnostic]:
    out = []
    for raw in output.splitlines():
        m = _LINE_RE.match(raw.rstrip())
        if m is None or m.group("sev") != "error":
            continue
        path = m.group("file").replace(os.sep, "/")
        if path.startswith("./"):
            path = path[2:]
        out.append(Diagnostic(path, int(m.group("line")), m.group("code") or "misc", m.group("msg")))
    return out


def new_diagnostics(before: Iterable[Diagnostic], after: Iterable[Diagnostic]) -> list[Diagnostic]:
    """Diagnostics in ``after`` beyond those already in ``before`` (multiset, line-insensitive)."""
    budget = Counter(d.key for d in before)
    out = []
    for d in sorted(after):
        if budget[d.key] > 0:
            budget[d.key] -= 1
        else:
            out.append(d)
    return out


# -- checker adapter ----------------------------------------------------------


@dataclass
class CheckerConfig:
    path: str | None = None  # executable; None runs mypy from this interpreter
    extra_flags: tuple[str, ...] = ()
    ignored_codes: frozenset[str] = REFINEMENT_IGNORED
    daemon: bool = True
    python_version: str = "3.10"
    timeout: float = 600.0


class Checker:
    """Runs mypy on a directory.  In daemon mode one ``dmypy`` server is kept
    per checked directory; call :meth:`close` (or use as a context manager)."""

    def __init__(self, config: CheckerConfig | None = None) -> None:
        self.config = config or CheckerConfig()
        self._state = Path(tempfile.mkdtemp(prefix="edg-typer-checker-"))
        self._daemon_root: Path | None = None
        self.runs = 0
        if self.config.path is None:
            try:
                import mypy  # noqa: F401
            except ImportError as exc:
                raise CheckerMissing("mypy is not installed in this interpreter") from exc
        elif shutil.which(self.config.path) is None and not Path(self.config.path).exists():
            raise CheckerMissing(f"checker executable not found: {self.config.path}")

    def _flags(self) -> list[str]:
        return [
            *BASE_FLAGS,
            "--python-version",
            self.config.python_version,
            "--cache-dir",
            str(self._state / "cache"),
            *self.config.extra_flags,
        ]

    def _argv(self, root: Path) -> list[str]:
        if self.config.path is not None:
            return [self.config.path, *self._flags(), "."]
        if not self.config.daemon:
            return [sys.executable, "-m", "mypy", *self._flags(), "."]
        status = str(self._state / "dmypy.json")
        if self._daemon_root is not None and self._daemon_root != root:
            self._stop_daemon()
        self._daemon_root = root
        return [sys.executable, "-m", "mypy.dmypy", "--status-file", status, "run", "--timeout", "900", "--", *self._flags(), "."]

    def run_dir(self, root: Path, ignored_codes: Iterable[str] | None = None) -> list[Diagnostic]:
        ignored = frozenset(self.config.ignored_codes if ignored_codes is None else ignored_codes)
        argv = self._argv(Path(root).resolve())
        try:
            proc = subprocess.run(argv, cwd=root, capture_output=True, text=True, timeout=self.config.timeout)
        except FileNotFoundError as exc:
            raise CheckerMissing(str(exc)) from exc
        except subprocess.TimeoutExpired as exc:
            raise CheckerCrashed(f"checker timed out after {self.config.timeout}s") from exc
        self.runs += 1
        diags = parse_diagnostics(proc.stdout)
        if proc.returncode not in (0, 1) and not diags:
            raise CheckerCrashed(f"checker exited {proc.returncode}: {(proc.stderr or proc.stdout).strip()[:2000]}")
        return sorted(d for d in diags if d.error_code not in ignored)

    def run_repo(self, repo: SourceRepo, ignored_codes: Iterable[str] | None = None) -> list[Diagnostic]:
        with tempfile.TemporaryDirectory(prefix="edg-typer-check-") as tmp:
            repo.write_to(Path(tmp))
            if self.config.daemon and self.config.path is None:
                try:
                    return self.run_dir(Path(tmp), ignored_codes)
                finally:
                    self._stop_daemon()
            return self.run_dir(Path(tmp), ignored_codes)

    def _stop_daemon(self) -> None:
        if self._daemon_root is None:
            return
        status = str(self._state / "dmypy.json")
        subprocess.run(
            [sys.executable, "-m", "mypy.dmypy", "--status-file", status, "kill"],
            capture_output=True,
            text=True,
        )
        self._daemon_root = None

    def close(self) -> None:
        self._stop_daemon()
        shutil.rmtree(self._state, ignore_errors=True)

    def __enter__(self) -> Checker:
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def run_checker(
    working_copy: SourceRepo | Path | str,
    ignored_codes: Iterable[str] = REFINEMENT_IGNORED,
    checker: Checker | None = None,
) -> list[Diagnostic]:
    """One-shot checker run on a repo snapshot or a directory."""
    own = checker is None
    chk = checker or Checker(CheckerConfig(daemon=False))
    try:
        if isinstance(working_copy, SourceRepo):
            return chk.run_repo(working_copy, ignored_codes)
        return chk.run_dir(Path(working_copy), ignored_codes)
    finally:
        if own:
            chk.close()


class WorkingCopy:
    """A repo mirrored on disk, rewritten file by file.

    mtimes are bumped explicitly on every write so the checker daemon never
    mistakes a same-size rewrite for an unchanged file.
    """

    def __init__(self, repo: SourceRepo, root: Path | None = None) -> None:
        self._owned = root is None
        self.root = Path(tempfile.mkdtemp(prefix="edg-typer-wc-")) if root is None else Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.repo = repo
        self._clock = time.time_ns()
        for path, text in repo.files:
            self._write(path, text)

    def _write(self, path: str, text: str) -> None:
        target = self.root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self._clock += 1_000_000_000
        os.utime(target, ns=(self._clock, self._clock))

    def set(self, repo: SourceRepo) -> None:
        for path, text in repo.files:
            if path not in self.repo or self.repo.text(path) != text:
                self._write(path, text)
        self.repo = repo

    def cleanup(self) -> None:
        if self._owned:
            shutil.rmtree(self.root, ignore_errors=True)


# -- attribution ----------------------------------------------------------------


class ConflictCategory(str, Enum):
    PARAM_TOO_PERMISSIVE = "ParamTooPermissive"
    PARAM_TOO_RESTRICTIVE = "ParamTooRestrictive"
    OVERRIDE_MISMATCH = "OverrideMismatch"
    NAME_UNDEFINED = "NameUndefined"
    OTHER = "Other"


@dataclass
class ConflictReport:
    diagnostics: list[Diagnostic]
    culprit_slots: list[str]
    category: ConflictCategory
    context: list[str] = field(default_factory=list)  # source lines around the diagnostics
    attributed: bool = True  # False when the most-recent-slot default was used

    def to_json(self) -> dict:
        return {
            "category": self.category.value,
            "culprits": list(self.culprit_slots),
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "context": list(self.context),
            "attributed": self.attributed,
        }


_CALLEE_RES = [
    re.compile(r'^Argument (?P<arg>\d+|"\w+") to "(?P<callee>[^"]+)"(?: of "(?P<cls>[^"]+)")? has incompatible type'),
    re.compile(r'^Too (?:many|few) (?:positional )?arguments for "(?P<callee>[^"]+)"(?: of "(?P<cls>[^"]+)")?'),
    re.compile(r'^Unexpected keyword argument "(?P<kw>\w+)" for "(?P<callee>[^"]+)"(?: of "(?P<cls>[^"]+)")?'),
    re.compile(r'^Missing (?:positional|named) arguments? (?P<kw>"\w+"(?:, "\w+")*) (?:in call to|for) "(?P<callee>[^"]+)"(?: of "(?P<cls>[^"]+)")?'),
]
_OVERRIDE_RES = [
    re.compile(r'^Argument (?P<arg>\d+) of "(?P<meth>\w+)" is incompatible with supertype "(?P<sup>[^"]+)"'),
    re.compile(r'^Return type "[^"]*" of "(?P<meth>\w+)" incompatible with return type "[^"]*" in supertype "(?P<sup>[^"]+)"'),
    re.compile(r'^Signature of "(?P<meth>\w+)" incompatible with supertype "(?P<sup>[^"]+)"'),
]
_NAME_RE = re.compile(r'^Name "(?P<name>[\w.]+)" is not defined')


class _Locator:
    """Entity and statement lookup over the annotated working copy."""

    def __init__(self, repo: SourceRepo) -> None:
        self.repo = repo
        parsed = ParsedRepo.parse(repo)
        self.index, self.resolver = build_entities(parsed)
        self.refs = collect_statement_refs(parsed, self.index, self.resolver)
        self.trees = parsed.trees

    def entities_at(self, file: str, line: int) -> list[Entity]:
        found = [e for e in self.index if e.file == file and e.defining_span.contains_line(line)]
        # innermost first
        return sorted(found, key=lambda e: (e.defining_span.n_lines, e.id))

    def function_at(self, file: str, line: int) -> Entity | None:
        for e in self.entities_at(file, line):
            if e.kind is EntityKind.FUNCTION:
                return e
        return None

    def header_lines(self, ent: Entity) -> range:
        tree = self.trees.get(ent.file)
        if tree is not None and ent.kind is EntityKind.FUNCTION:
            for node in ast.walk(tree):
                if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.lineno <= ent.defining_span.end_line:
                    if ent.defining_span.start_line <= node.lineno and node.body:
                        if node.name == ent.short_name:
                            return range(ent.defining_span.start_line, node.body[0].lineno)
        return range(ent.defining_span.start_line, ent.defining_span.end_line + 1)

    def refs_at(self, file: str, line: int) -> list[StatementRef]:
        return [r for r in self.refs if r.statement_span.file == file and r.statement_span.contains_line(line)]

    def line(self, file: str, line: int) -> str:
        if file not in self.repo:
            return ""
        lines = self.repo.text(file).splitlines()
        return lines[line - 1].strip() if 0 < line <= len(lines) else ""

    def names_on_line(self, file: str, line: int) -> set[str]:
        src = self.line(file, line)
        try:
            return {n.id for n in ast.walk(ast.parse(src.rstrip(":") or "pass")) if isinstance(n, ast.Name)}
        except SyntaxError:
            return set(re.findall(r"[A-Za-z_]\w*", src))


def _slots_of(entity_id: str, applied: Sequence[str]) -> list[str]:
    return [s for s in applied if split_slot(s)[0] == entity_id]


def _callee_entities(loc: _Locator, callee: str, cls: str | None) -> list[Entity]:
    out = []
    for e in loc.index:
        if e.kind is EntityKind.FUNCTION:
            if cls is None and e.short_name == callee and (e.enclosing_class is None or callee == "__init__"):
                out.append(e)
            elif cls is not None and e.short_name == callee and e.enclosing_class and e.enclosing_class.rsplit(".", 1)[-1] == cls:
                out.append(e)
            elif cls is None and e.short_name == "__init__" and e.enclosing_class and e.enclosing_class.rsplit(".", 1)[-1] == callee:
                out.append(e)  # constructor calls are reported against the class name
    return out


def _param_slot_for(entity: Entity, applied: Sequence[str], arg: str | None) -> list[str]:
    mine = _slots_of(entity.id, applied)
    params = [s for s in mine if split_slot(s)[1].startswith("param:")]
    if arg is None:
        return params or mine
    if arg.startswith('"'):
        want = f"param:{arg.strip(chr(34))}"
        hit = [s for s in params if split_slot(s)[1] == want]
        return hit or params or mine
    all_params = [s.slot_id for s in entity.slots if split_slot(s.slot_id)[1].startswith("param:")]
    i = int(arg) - 1
    if 0 <= i < len(all_params) and all_params[i] in params:
        return [all_params[i]]
    return params or mine


def _attribute_one(d: Diagnostic, applied: Sequence[str], loc: _Locator, annotations: Mapping[str, str]) -> tuple[ConflictCategory, list[str]]:
    applied_entities = {split_slot(s)[0] for s in applied}

    if d.error_code == "override":
        for rx in _OVERRIDE_RES:
            m = rx.match(d.message)
            if not m:
                continue
            child = loc.function_at(d.file, d.line)
            culprits: list[str] = []
            ents: list[Entity] = []
            if child is not None:
                ents.append(child)
                if child.enclosing_class:
                    parents = [
                        loc.index[f"{b}.{m.group('meth')}"]
                        for b in loc.resolver.mro(child.enclosing_class)[1:]
                        if f"{b}.{m.group('meth')}" in loc.index
                    ]
                    named = [p for p in parents if p.enclosing_class and p.enclosing_class.rsplit(".", 1)[-1] == m.group("sup")]
                    ents += named or parents
            for e in ents:
                if "arg" in m.groupdict() and m.group("arg"):
                    culprits += _param_slot_for(e, applied, m.group("arg"))
                elif rx is _OVERRIDE_RES[1]:
                    culprits += [s for s in _slots_of(e.id, applied) if s.endswith("#return")] or _slots_of(e.id, applied)
                else:
                    culprits += _slots_of(e.id, applied)
            if culprits:
                return ConflictCategory.OVERRIDE_MISMATCH, culprits

    if d.error_code == "name-defined":
        m = _NAME_RE.match(d.message)
        for e in loc.entities_at(d.file, d.line):
            if e.id in applied_entities and d.line in loc.header_lines(e):
                mine = _slots_of(e.id, applied)
                if m:
                    short = m.group("name").split(".")[0]
                    hit = [
                        s
                        for s in mine
                        if any(n.rsplit(".", 1)[-1] == short or n.split(".")[0] == short for n in _names(annotations.get(s)))
                    ]
                    if hit:
                        return ConflictCategory.NAME_UNDEFINED, hit
                return ConflictCategory.NAME_UNDEFINED, mine

    if d.error_code in ("arg-type", "call-arg"):
        for rx in _CALLEE_RES:
            m = rx.match(d.message)
            if not m:
                continue
            gd = m.groupdict()
            arg = gd.get("arg")
            if arg is None and gd.get("kw"):
                arg = gd["kw"].split(",")[0]
            culprits = []
            for e in _callee_entities(loc, m.group("callee"), gd.get("cls")):
                if e.id in applied_entities:
                    culprits += _param_slot_for(e, applied, arg)
            if culprits:
                return ConflictCategory.PARAM_TOO_RESTRICTIVE, culprits

    # body of an annotated function: its own annotation is too loose/wrong
    fn = loc.function_at(d.file, d.line)
    if fn is not None and fn.id in applied_entities:
        mine = _slots_of(fn.id, applied)
        if d.error_code == "return-value":
            ret = [s for s in mine if s.endswith("#return")]
            if ret:
                return ConflictCategory.PARAM_TOO_PERMISSIVE, ret
        names = loc.names_on_line(d.file, d.line)
        params = [s for s in mine if split_slot(s)[1].startswith("param:") and split_slot(s)[1][6:] in names]
        if params:
            return ConflictCategory.PARAM_TOO_PERMISSIVE, params
        if d.line in loc.header_lines(fn):
            return ConflictCategory.OTHER, mine
        return ConflictCategory.PARAM_TOO_PERMISSIVE, mine

    # variables declared on this line
    for e in loc.entities_at(d.file, d.line):
        if e.kind is EntityKind.VARIABLE and e.id in applied_entities:
            return ConflictCategory.OTHER, _slots_of(e.id, applied)

    # statements that use a freshly annotated entity
    culprits = []
    for ref in loc.refs_at(d.file, d.line):
        for target, _kind in ref.referenced:
            if target in applied_entities:
                mine = _slots_of(target, applied)
                ret = [s for s in mine if s.endswith("#return") or s.endswith("#var")]
                culprits += ret or mine
    if culprits:
        return ConflictCategory.OTHER, culprits
    names = loc.names_on_line(d.file, d.line)
    culprits = [s for s in applied if split_slot(s)[0].rsplit(".", 1)[-1] in names]
    if culprits:
        return ConflictCategory.OTHER, culprits
    return ConflictCategory.OTHER, []


def _names(annotation: str | None) -> set[str]:
    if not annotation:
        return set()
    try:
        return normalize_type(annotation).names()
    except Exception:
        return set(re.findall(r"[\w.]+", annotation))


def attribute_conflicts(
    diags: Sequence[Diagnostic],
    applied: Sequence[str],
    working_copy: SourceRepo,
    annotations: Mapping[str, str] | None = None,
) -> list[ConflictReport]:
    """Attribute new diagnostics to slots in ``applied`` (in application order).

    ``working_copy`` is the repo *with* the batch applied, so diagnostic lines
    line up with its entity spans.  Diagnostics nothing can explain are
    charged to the most recently applied slot.
    """
    if not diags:
        raise ValueError("attribute_conflicts needs at least one diagnostic")
    loc = _Locator(working_copy)
    annotations = annotations or {}
    grouped: dict[tuple[ConflictCategory, tuple[str, ...], bool], ConflictReport] = {}
    for d in diags:
        category, culprits = _attribute_one(d, applied, loc, annotations)
        attributed = True
        if not culprits:
            category, culprits, attributed = ConflictCategory.OTHER, [applied[-1]], False
        culprits = list(dict.fromkeys(culprits))
        key = (category, tuple(culprits), attributed)
        rep = grouped.get(key)
        ctx = f"{d.file}:{d.line}: {loc.line(d.file, d.line)}"
        if rep is None:
            grouped[key] = ConflictReport([d], culprits, category, [ctx], attributed)
        else:
            rep.diagnostics.append(d)
            if ctx not in rep.context:
                rep.context.append(ctx)
    return list(grouped.values())


# -- repair -------------------------------------------------------------------------


class ResolutionAction(str, Enum):
    NARROW = "Narrow"
    INVALIDATE_FUNCTION = "InvalidateFunction"
    INVALIDATE_PARENT = "InvalidateParent"
    REFINE = "Refine"
    FALLBACK = "Fallback"


@dataclass
class Resolution:
    action: ResolutionAction
    slots: list[str]
    feedback: list[str]
    new_states: dict[str, TypeSlot] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "action": self.action.value,
            "slots": list(self.slots),
            "feedback": list(self.feedback),
            "states": {k: v.state.value for k, v in sorted(self.new_states.items())},
        }


_ACTIONS = {
    ConflictCategory.PARAM_TOO_PERMISSIVE: ResolutionAction.NARROW,
    ConflictCategory.PARAM_TOO_RESTRICTIVE: ResolutionAction.INVALIDATE_FUNCTION,
    ConflictCategory.OVERRIDE_MISMATCH: ResolutionAction.INVALIDATE_PARENT,
    ConflictCategory.NAME_UNDEFINED: ResolutionAction.REFINE,
    ConflictCategory.OTHER: ResolutionAction.REFINE,
}


def fallback_type(slot_id: str) -> str:
    """``Any``, except where the checker insists on ``None`` (``__init__`` returns)."""
    entity, role = split_slot(slot_id)
    if role == "return" and entity.rsplit(".", 1)[-1].split("~")[0] in ("__init__", "__init_subclass__"):
        return "None"
    return "Any"


def make_fallback(slot: TypeSlot) -> TypeSlot:
    out = slot.copy()
    out.annotation = fallback_type(slot.slot_id)
    out.state = SlotState.FALLBACK
    return out


def resolve_conflict(
    report: ConflictReport, slots: Mapping[str, TypeSlot], attempt_bound: int = DEFAULT_ATTEMPT_BOUND
) -> list[Resolution]:
    """Repair actions for one report.

    Culprits that still have oracle attempts left are reverted to Unannotated
    with feedback; the rest fall back.  Always returns at least one
    resolution.
    """
    action = _ACTIONS[report.category]
    lines = [d.render() for d in report.diagnostics]
    if action is ResolutionAction.INVALIDATE_FUNCTION:
        lines += [f"call site {c}" for c in report.context]
    elif action is ResolutionAction.INVALIDATE_PARENT:
        lines += [f"overriding signature {c}" for c in report.context]
    retry = Resolution(action, [], lines)
    fall = Resolution(ResolutionAction.FALLBACK, [], lines)
    for sid in report.culprit_slots:
        slot = slots[sid]
        if slot.attempts >= attempt_bound or slot.state is SlotState.FALLBACK:
            fall.slots.append(sid)
            fall.new_states[sid] = make_fallback(slot)
        else:
            new = slot.copy()
            new.annotation = None
            new.state = SlotState.UNANNOTATED
            new.feedback = list(lines)
            retry.slots.append(sid)
            retry.new_states[sid] = new
    return [r for r in (retry, fall) if r.slots] or [fall]


@dataclass
class BatchOutcome:
    repo: SourceRepo
    diagnostics: list[Diagnostic]
    validated: list[str] = field(default_factory=list)
    requeued: list[str] = field(default_factory=list)
    fallbacks: list[str] = field(default_factory=list)
    dropped: list[str] = field(default_factory=list)  # fallbacks that still conflicted; left unwritten
    reports: list[ConflictReport] = field(default_factory=list)
    resolutions: list[Resolution] = field(default_factory=list)
    checker_runs: int = 0


def validate_batch(
    wc: WorkingCopy,
    checker: Checker,
    batch: Mapping[str, str],
    slots: dict[str, TypeSlot],
    baseline: Sequence[Diagnostic],
    attempt_bound: int = DEFAULT_ATTEMPT_BOUND,
    ignored_codes: Iterable[str] | None = None,
) -> BatchOutcome:
    """Apply ``batch`` to the working copy, check, and repair until clean.

    ``slots`` is updated in place.  On return the working copy holds the
    previous contents plus whichever part of the batch survived.
    """
    start = wc.repo
    pending = dict(batch)
    order = list(batch)
    out = BatchOutcome(start, list(baseline))
    ignored = checker.config.ignored_codes if ignored_codes is None else frozenset(ignored_codes)
    while pending:
        applied = [s for s in order if s in pending]
        candidate = apply_annotations(start, {s: pending[s] for s in applied})
        wc.set(candidate)
        diags = checker.run_dir(wc.root, ignored)
        out.checker_runs += 1
        fresh = new_diagnostics(baseline, diags)
        if not fresh:
            for sid in applied:
                slot = slots[sid]
                slot.annotation = pending[sid]
                if slot.state is not SlotState.FALLBACK:
                    slot.state = SlotState.VALIDATED
                    out.validated.append(sid)
            out.repo = candidate
            out.diagnostics = diags
            return out
        reports = attribute_conflicts(fresh, applied, candidate, pending)
        wc.set(start)  # revert before anything else touches the copy
        out.reports.extend(reports)
        # a slot named by several reports is resolved once per round, judged
        # by its state when the round started
        fallback_before = {s for s in applied if slots[s].state is SlotState.FALLBACK}
        handled: set[str] = set()
        for rep in reports:
            todo = [s for s in rep.culprit_slots if s not in handled]
            if not todo:
                continue
            handled.update(todo)
            for res in resolve_conflict(replace(rep, culprit_slots=todo), slots, attempt_bound):
                out.resolutions.append(res)
                for sid, new in res.new_states.items():
                    was_fallback = sid in fallback_before
                    slots[sid] = new
                    if res.action is ResolutionAction.FALLBACK:
                        if was_fallback:
                            pending.pop(sid, None)
                            out.dropped.append(sid)
                        else:
                            pending[sid] = new.annotation or "Any"
                            out.fallbacks.append(sid)
                    else:
                        pending.pop(sid, None)
                        out.requeued.append(sid)
    wc.set(start)
    out.repo = start
    out.diagnostics = list(baseline)
    return out


# -- baseline preparation -------------------------------------------------------------


def _comment_insert_offset(line: str) -> int | None:
    """Where a trailing ``# type: ignore`` goes on ``line`` (None if unsafe)."""
    body = line.rstrip("\r\n")
    try:
        toks = list(tokenize.generate_tokens(io.StringIO(body + "\n").readline))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        # continuation line of a bracketed expression; plain append is still fine
        if "#" in body or body.rstrip().endswith("\\"):
            return None
        return len(body.rstrip())
    for tok in toks:
        if tok.type == tokenize.COMMENT:
            return tok.start[1]
    if body.rstrip().endswith("\\"):
        return None
    return len(body.rstrip())


_IGNORE_RE = re.compile(r"#\s*type:\s*ignore")


def add_ignore_comments(repo: SourceRepo, diags: Iterable[Diagnostic]) -> tuple[SourceRepo, int]:
    by_file: dict[str, set[int]] = {}
    for d in diags:
        by_file.setdefault(d.file, set()).add(d.line)
    updates: dict[str, str] = {}
    added = 0
    for path, lines in by_file.items():
        if path not in repo:
            continue
        text_lines = repo.text(path).splitlines(keepends=True)
        for ln in sorted(lines):
            if not 0 < ln <= len(text_lines):
                continue
            raw = text_lines[ln - 1]
            if _IGNORE_RE.search(raw):
                continue
            pos = _comment_insert_offset(raw)
            if pos is None:
                continue
            body = raw.rstrip("\r\n")
            eol = raw[len(body) :]
            if pos < len(body):  # existing comment: the ignore has to come first
                new = body[:pos] + "# type: ignore  " + body[pos:]
            else:
                new = body[:pos] + "  # type: ignore" + body[pos:]
            text_lines[ln - 1] = new + eol
            added += 1
        updates[path] = "".join(text_lines)
    return repo.replace(updates), added


@dataclass
class BaselineResult:
    repo: SourceRepo
    comments_added: int
    passes: int


def prepare_baseline(
    repo: SourceRepo,
    checker: Checker | None = None,
    ignored_codes: Iterable[str] = REFINEMENT_IGNORED,
    max_passes: int = 10,
) -> BaselineResult:
    """Strip annotations and silence every remaining checker error."""
    own = checker is None
    chk = checker or Checker(CheckerConfig(daemon=False))
    try:
        current, _ = strip_annotations(repo)
        total = 0
        for n in range(1, max_passes + 1):
            diags = chk.run_repo(current, ignored_codes)
            if not diags:
                return BaselineResult(current, total, n)
            current, added = add_ignore_comments(current, diags)
            total += added
            if added == 0:
                raise NonConverging(f"{len(diags)} diagnostic(s) cannot be suppressed", diags)
        remaining = chk.run_repo(current, ignored_codes)
        if remaining:
            raise NonConverging(f"still {len(remaining)} diagnostic(s) after {max_passes} passes", remaining)
        return BaselineResult(current, total, max_passes)
    finally:
        if own:
            chk.close()
