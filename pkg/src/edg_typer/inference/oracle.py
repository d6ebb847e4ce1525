"""Oracle interface and the non-rule implementations."""

from __future__ import annotations

import json
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol

from ..errors import MalformedResponse, OracleUnavailable
from .context import InferenceContext, Task

PROMPT_VERSION = "v1"


@dataclass(frozen=True)
class MissingRef:
    from_entity: str
    target_ref: str
    reason: str = ""


@dataclass
class OracleResponse:
    missing: list[MissingRef] = field(default_factory=list)
    annotations: list[tuple[str, str]] = field(default_factory=list)
    partial: bool = False

    def to_wire(self, task: Task) -> dict:
        if task is Task.FIND_MISSING:
            return {"missing": [{"from": m.from_entity, "ref": m.target_ref, "reason": m.reason} for m in self.missing]}
        return {"annotations": [{"slot": s, "type": t} for s, t in self.annotations], "partial": self.partial}

    @classmethod
    def from_wire(cls, task: Task, data: object) -> OracleResponse:
        if not isinstance(data, Mapping):
            raise MalformedResponse(f"response is not an object: {type(data).__name__}")
        try:
            if task is Task.FIND_MISSING:
                return cls(
                    missing=[
                        MissingRef(str(m["from"]), str(m["ref"]), str(m.get("reason", "")))
                        for m in data.get("missing", [])
                    ]
                )
            return cls(
                annotations=[(str(a["slot"]), str(a["type"])) for a in data.get("annotations", [])],
                partial=bool(data.get("partial", False)),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise MalformedResponse(f"bad {task.value} response: {exc!r}") from None


@dataclass
class OracleRequest:
    task: Task
    context: InferenceContext

    def to_wire(self) -> dict:
        return self.context.to_wire(self.task)


class Oracle(Protocol):
    def complete(self, request: OracleRequest) -> OracleResponse: ...


def load_prompt(task: Task) -> str:
    name = "find_missing.txt" if task is Task.FIND_MISSING else "infer_types.txt"
    return resources.files("edg_typer.prompts").joinpath(name).read_text(encoding="utf-8")


def render_prompt(request: OracleRequest) -> str:
    ctx = request.context
    defs = "\n\n".join(f"# {i}\n{code}" for i, code in ctx.member_definitions)
    deps = "\n".join(f"{d.slot_id}: {d.annotation}" for d in ctx.dependency_summaries) or "(none)"
    fb = "\n".join(ctx.feedback) or "(none)"
    body = load_prompt(request.task)
    return (
        body.replace("{definitions}", defs)
        .replace("{dependencies}", deps)
        .replace("{feedback}", fb)
        .replace("{slots}", "\n".join(ctx.target_slots))
    )


class HttpOracle:
    """JSON-over-POST client for a remote model service."""

    def __init__(self, url: str, token: str | None = None, model: str | None = None, timeout: float = 120.0, retries: int = 2) -> None:
        self.url = url
        self.token = token
        self.model = model
        self.timeout = timeout
        self.retries = retries

    def complete(self, request: OracleRequest) -> OracleResponse:
        import httpx

        payload = request.to_wire()
        payload["prompt"] = render_prompt(request)
        payload["prompt_version"] = PROMPT_VERSION
        if self.model:
            payload["model"] = self.model
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = httpx.post(self.url, json=payload, headers=headers, timeout=self.timeout)
            except httpx.HTTPError as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = OracleUnavailable(f"{self.url} answered {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise OracleUnavailable(f"{self.url} rejected the request: {resp.status_code} {resp.text[:200]}")
            try:
                data = resp.json()
            except json.JSONDecodeError as exc:
                raise MalformedResponse(f"non-JSON response: {exc}") from None
            return OracleResponse.from_wire(request.task, data)
        raise OracleUnavailable(f"oracle at {self.url} unreachable: {last}")


class ScriptedOracle:
    """Test double: per-slot answer lists, consumed one per request.

    ``answers[slot]`` is a list of type expressions; the i-th request for a
    slot gets the i-th entry (the last entry repeats).  Slots without a script
    and FindMissing requests go to ``fallback`` when given.
    """

    def __init__(
        self,
        answers: Mapping[str, Sequence[str]] | None = None,
        fallback: Oracle | None = None,
        missing: Callable[[OracleRequest], list[MissingRef]] | None = None,
    ) -> None:
        self.answers = {k: list(v) for k, v in (answers or {}).items()}
        self.fallback = fallback
        self.missing = missing
        self.calls: dict[str, int] = {}
        self.log: list[dict] = []

    def complete(self, request: OracleRequest) -> OracleResponse:
        self.log.append(request.to_wire())
        if request.task is Task.FIND_MISSING:
            if self.missing is not None:
                return OracleResponse(missing=self.missing(request))
            if self.fallback is not None:
                return self.fallback.complete(request)
            return OracleResponse()
        out: list[tuple[str, str]] = []
        rest = []
        for sid in request.context.target_slots:
            script = self.answers.get(sid)
            if script:
                n = self.calls.get(sid, 0)
                self.calls[sid] = n + 1
                out.append((sid, script[min(n, len(script) - 1)]))
            else:
                rest.append(sid)
        if rest and self.fallback is not None:
            got = dict(self.fallback.complete(request).annotations)
            out.extend((s, got[s]) for s in rest if s in got)
        return OracleResponse(annotations=out, partial=len(out) < len(request.context.target_slots))
