"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class EdgTyperError(Exception):
    """Base class for all errors raised by the engine."""


# frontend
class RepoIOError(EdgTyperError, OSError):
    pass


class NoPythonFiles(EdgTyperError):
    pass


class SourceEncodingError(EdgTyperError):
    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: not valid UTF-8 ({reason})")
        self.path = path


class SourceParseError(EdgTyperError):
    def __init__(self, path: str, line: int | None, msg: str) -> None:
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line
        self.msg = msg


class InvalidTypeExpression(EdgTyperError, ValueError):
    pass


class UnknownSlot(EdgTyperError, KeyError):
    pass


# edg
class UnknownEntityRef(EdgTyperError):
    pass


# inference
class OracleUnavailable(EdgTyperError):
    pass


class MalformedResponse(EdgTyperError):
    pass


class OversizeCluster(EdgTyperError):
    pass


# validation
class CheckerMissing(EdgTyperError):
    pass


class CheckerCrashed(EdgTyperError):
    pass


class NonConverging(EdgTyperError):
    def __init__(self, msg: str, remaining: list) -> None:
        super().__init__(msg)
        self.remaining = remaining


# driver
class CorruptCheckpoint(EdgTyperError):
    pass


# metrics
class SlotUniverseMismatch(EdgTyperError):
    def __init__(self, report, orphans: list[str]) -> None:
        super().__init__(f"{len(orphans)} slot(s) present in only one repository")
        self.report = report
        self.orphans = orphans
