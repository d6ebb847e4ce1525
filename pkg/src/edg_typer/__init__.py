"""Repository-level type annotation inference over an entity dependency graph."""

from __future__ import annotations

from .driver import PipelineResult, RunConfig, run_pipeline
from .edg import EntityDependencyGraph, build_edg, condense_and_bound, select_targets
from .frontend import extract_entities, load_repo, strip_annotations
from .metrics import evaluate_repo_pair, type_exact, type_sim
from .typeexpr import NormalizedType, normalize_type
from .validation import Checker, CheckerConfig, prepare_baseline, run_checker

__version__ = "0.1.0"

__all__ = [
    "Checker",
    "CheckerConfig",
    "EntityDependencyGraph",
    "NormalizedType",
    "PipelineResult",
    "RunConfig",
    "build_edg",
    "condense_and_bound",
    "evaluate_repo_pair",
    "extract_entities",
    "load_repo",
    "normalize_type",
    "prepare_baseline",
    "run_checker",
    "run_pipeline",
    "select_targets",
    "strip_annotations",
    "type_exact",
    "type_sim",
]
