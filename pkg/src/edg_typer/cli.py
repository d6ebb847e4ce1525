"""``edg-typer`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from enum import IntEnum
from pathlib import Path

from .config import ConfigError, load_config
from .driver import checkpoint_load, progress_csv, run_pipeline, write_report
from .edg import build_edg, condense_and_bound
from .errors import (
    CheckerCrashed,
    CheckerMissing,
    CorruptCheckpoint,
    NonConverging,
    NoPythonFiles,
    OracleUnavailable,
    RepoIOError,
    SlotUniverseMismatch,
)
from .frontend import analyze, collect_statement_refs, load_repo, strip_annotations
from .metrics import count_introduced_errors, evaluate_repo_pair
from .validation import REFINEMENT_IGNORED, Checker, CheckerConfig, prepare_baseline

log = logging.getLogger("edg_typer")


class ExitStatus(IntEnum):
    OK = 0
    FALLBACKS = 1
    USAGE = 2
    ENVIRONMENT = 3


class _Usage(Exception):
    pass


def _repo(path: str):
    try:
        return load_repo(path)
    except (NoPythonFiles, RepoIOError) as exc:
        raise _Usage(str(exc)) from None


def _checker_config(args: argparse.Namespace, base: CheckerConfig | None = None) -> CheckerConfig:
    cfg = base or CheckerConfig()
    if getattr(args, "checker_path", None):
        cfg = replace(cfg, path=args.checker_path)
    return cfg


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def cmd_infer(args: argparse.Namespace) -> ExitStatus:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        raise _Usage(str(exc)) from None
    overrides: dict = {}
    if args.oracle:
        overrides["oracle"] = args.oracle
    if args.max_iterations is not None:
        overrides["max_iterations"] = args.max_iterations
    if args.cluster_bound is not None:
        overrides["cluster_bound"] = args.cluster_bound
    try:
        config = replace(config, checker=_checker_config(args, config.checker), **overrides)
        if config.oracle == "http" and not config.oracle_url:
            raise _Usage("--oracle http needs an endpoint (config [oracle] url or EDG_ORACLE_URL)")
    except ValueError as exc:
        raise _Usage(str(exc)) from None

    resume = None
    if args.checkpoint and args.resume and Path(args.checkpoint).exists():
        try:
            resume = checkpoint_load(args.checkpoint)
        except CorruptCheckpoint as exc:
            raise _Usage(str(exc)) from None
        repo = resume.working_copy
    else:
        repo = _repo(args.repo)

    result = run_pipeline(repo, config, resume=resume, checkpoint_path=args.checkpoint)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result.repo.write_to(out)
    if args.report:
        write_report(result.report, args.report)
    if args.progress:
        _write_text(args.progress, progress_csv(result.state))
    r = result.report
    print(
        f"iterations={r['iterations']} slots={r['slots_total']} "
        + " ".join(f"{k.lower()}={v}" for k, v in r["slot_states"].items())
        + f" conflict_free={str(r['conflict_free']).lower()}"
    )
    return ExitStatus.FALLBACKS if result.fallback_count else ExitStatus.OK


def cmd_graph(args: argparse.Namespace) -> ExitStatus:
    repo = _repo(args.repo)
    parsed, index, resolver = analyze(repo)
    g = build_edg(index, collect_statement_refs(parsed, index, resolver))
    if args.format == "dot":
        _write_text(args.out, g.to_dot())
        return ExitStatus.OK
    data = g.to_json()
    if args.clusters:
        dag = condense_and_bound(g, args.cluster_bound)
        data["clusters"] = [c.to_json() for c in dag.clusters]
        data["cluster_edges"] = [list(e) for e in sorted(dag.cluster_edges)]
    _write_text(args.out, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return ExitStatus.OK


def cmd_prepare_baseline(args: argparse.Namespace) -> ExitStatus:
    repo = _repo(args.repo)
    if args.archive:
        _, archive = strip_annotations(repo)
        archive.save(args.archive)
    with Checker(_checker_config(args, CheckerConfig(daemon=False))) as chk:
        result = prepare_baseline(repo, chk)
    dest = Path(args.out) if args.out else Path(args.repo)
    dest.mkdir(parents=True, exist_ok=True)
    result.repo.write_to(dest)
    print(f"suppressions_added={result.comments_added} passes={result.passes}")
    return ExitStatus.OK


def cmd_check(args: argparse.Namespace) -> ExitStatus:
    _repo(args.repo)  # validates the path
    ignored = REFINEMENT_IGNORED if args.ignore is None else frozenset(args.ignore)
    with Checker(_checker_config(args, CheckerConfig(daemon=False))) as chk:
        diags = chk.run_dir(Path(args.repo), ignored)
    for d in diags:
        print(d.render())
    return ExitStatus.OK if not diags else ExitStatus.FALLBACKS


def cmd_evaluate(args: argparse.Namespace) -> ExitStatus:
    pred, truth = _repo(args.pred), _repo(args.truth)
    warning = None
    try:
        report = evaluate_repo_pair(pred, truth)
    except SlotUniverseMismatch as exc:
        report = exc.report
        warning = exc.orphans
    if args.baseline:
        with Checker(_checker_config(args, CheckerConfig(daemon=False))) as chk:
            report.introduced_errors = count_introduced_errors(_repo(args.baseline), pred, chk)
    if args.report:
        _write_text(args.report, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    if args.csv:
        _write_text(args.csv, report.category_csv())
    sys.stdout.write(report.table())
    print(f"TypeSim {report.mean_sim:.2f} / TypeExact {report.exact_rate:.2f}")
    if warning:
        print(f"\nwarning: {len(warning)} slot(s) exist in only one repository:")
        for s in warning:
            print(f"  {s}")
    return ExitStatus.OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edg-typer", description="Infer conflict-free type annotations for a Python repository.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def checker_flag(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--checker-path", help="mypy-compatible executable (default: mypy from this interpreter)")

    sp = sub.add_parser("infer", help="annotate a repository")
    sp.add_argument("--repo", required=True, help="repository root to annotate")
    sp.add_argument("--out", help="directory that receives the annotated copy")
    sp.add_argument("--oracle", choices=["rule", "http"], help="inference oracle (default from config, else rule)")
    sp.add_argument("--config", help="TOML run configuration")
    sp.add_argument("--checkpoint", help="write a checkpoint here after every iteration")
    sp.add_argument("--resume", action="store_true", help="continue from --checkpoint if it exists")
    sp.add_argument("--report", help="JSON run report path")
    sp.add_argument("--progress", help="CSV coverage-per-iteration path")
    sp.add_argument("--max-iterations", type=int, help="iteration limit before the fallback flush")
    sp.add_argument("--cluster-bound", type=int, help="maximum entities per cluster")
    checker_flag(sp)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("graph", help="export the entity dependency graph")
    sp.add_argument("--repo", required=True, help="repository root")
    sp.add_argument("--format", choices=["json", "dot"], default="json", help="output format")
    sp.add_argument("--out", help="output file (default: stdout)")
    sp.add_argument("--clusters", action="store_true", help="include bounded clusters (json only)")
    sp.add_argument("--cluster-bound", type=int, default=5, help="maximum entities per cluster")
    sp.set_defaults(func=cmd_graph)

    sp = sub.add_parser("prepare-baseline", help="strip annotations and silence inherent checker errors")
    sp.add_argument("--repo", required=True, help="annotated repository")
    sp.add_argument("--out", help="output directory (default: rewrite --repo in place)")
    sp.add_argument("--archive", help="save the stripped annotations as JSON")
    checker_flag(sp)
    sp.set_defaults(func=cmd_prepare_baseline)

    sp = sub.add_parser("check", help="run the type checker and print normalized diagnostics")
    sp.add_argument("--repo", required=True, help="repository root")
    sp.add_argument("--ignore", nargs="*", metavar="CODE", help="error codes to drop (default: var-annotated assignment has-type)")
    checker_flag(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("evaluate", help="score predicted annotations against ground truth")
    sp.add_argument("--pred", required=True, help="annotated repository")
    sp.add_argument("--truth", required=True, help="ground-truth repository")
    sp.add_argument("--baseline", help="unannotated baseline; enables introduced-error counts")
    sp.add_argument("--report", help="JSON report path")
    sp.add_argument("--csv", help="per-category CSV path")
    checker_flag(sp)
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else ExitStatus.USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"edg-typer: error: {exc}", file=sys.stderr)
        return ExitStatus.USAGE
    except (CheckerMissing, CheckerCrashed, OracleUnavailable, NonConverging) as exc:
        print(f"edg-typer: environment error: {exc}", file=sys.stderr)
        return ExitStatus.ENVIRONMENT
