from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NoPythonFiles, RepoIOError, SourceEncodingError

_SKIP_DIRS = {"__pycache__", ".git", ".hg", ".mypy_cache", ".venv", "venv", ".tox", "node_modules"}


@dataclass(frozen=True)
class SourceRepo:
    """An in-memory snapshot of a repository's ``.py`` files.

    ``files`` is sorted by relative POSIX path; ``root`` is informational and
    may point at a directory that no longer matches the snapshot.
    """

    root: Path
    files: tuple[tuple[str, str], ...]
    _by_path: dict[str, str] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        files = tuple(sorted(self.files))
        object.__setattr__(self, "files", files)
        object.__setattr__(self, "_by_path", dict(files))

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.files]

    def text(self, path: str) -> str:
        return self._by_path[path]

    def __contains__(self, path: str) -> bool:
        return path in self._by_path

    def replace(self, updates: dict[str, str]) -> SourceRepo:
        merged = dict(self._by_path)
        merged.update(updates)
        return SourceRepo(self.root, tuple(merged.items()))

    def write_to(self, dest: Path) -> None:
        """Write every file under ``dest`` (existing unrelated files are kept)."""
        for rel, text in self.files:
            target = dest / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            # newline="" keeps \r\n sources byte-identical
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def module_name(rel_path: str) -> str:
    parts = rel_path[:-3].split("/")
    if parts[-1] == "__init__" and len(parts) > 1:
        parts.pop()
    return ".".join(parts)


def load_repo(root: str | os.PathLike[str]) -> SourceRepo:
    root = Path(root)
    if not root.is_dir():
        raise RepoIOError(f"repository root is not a readable directory: {root}")
    collected: list[tuple[str, str]] = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in _SKIP_DIRS and not d.startswith("."))
        for name in filenames:
            if not name.endswith(".py"):
                continue
            full = Path(dirpath) / name
            rel = full.relative_to(root).as_posix()
            try:
                data = full.read_bytes()
            except OSError as exc:
                raise RepoIOError(f"cannot read {rel}: {exc}") from exc
            try:
                text = data.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise SourceEncodingError(rel, str(exc)) from None
            collected.append((rel, text))
    if not collected:
        raise NoPythonFiles(f"no .py files under {root}")
    return SourceRepo(root, tuple(collected))
