"""TOML run configuration with environment overrides for oracle credentials.

Example::

    [oracle]
    kind = "http"
    url = "http://localhost:8080/v1/types"
    model = "some-model"

    [pipeline]
    cluster_bound = 5
    attempt_bound = 3
    max_iterations = 100

    [checker]
    extra_flags = ["--strict-optional"]
    ignored_codes = ["var-annotated", "assignment", "has-type"]
"""

from __future__ import annotations

import os
import sys
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from .driver import RunConfig
from .validation import CheckerConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_URL = "EDG_ORACLE_URL"
ENV_TOKEN = "EDG_ORACLE_TOKEN"

_ORACLE_KEYS = {"kind": "oracle", "url": "oracle_url", "token": "oracle_token", "model": "oracle_model", "workers": "oracle_workers"}
_PIPELINE_KEYS = {"cluster_bound", "attempt_bound", "max_iterations", "stall_limit", "token_budget", "probe", "validate"}
_CHECKER_KEYS = {"path", "extra_flags", "ignored_codes", "daemon", "python_version", "timeout"}


class ConfigError(ValueError):
    pass


def _unknown(section: str, got: Mapping[str, Any], allowed: set[str]) -> None:
    extra = sorted(set(got) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def config_from_mapping(data: Mapping[str, Any], env: Mapping[str, str] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    _unknown("top level", data, {"oracle", "pipeline", "checker"})
    oracle = dict(data.get("oracle", {}))
    pipeline = dict(data.get("pipeline", {}))
    checker = dict(data.get("checker", {}))
    _unknown("oracle", oracle, set(_ORACLE_KEYS))
    _unknown("pipeline", pipeline, _PIPELINE_KEYS)
    _unknown("checker", checker, _CHECKER_KEYS)

    kwargs: dict[str, Any] = {_ORACLE_KEYS[k]: v for k, v in oracle.items()}
    kwargs.update(pipeline)
    if env.get(ENV_URL):
        kwargs["oracle_url"] = env[ENV_URL]
    if env.get(ENV_TOKEN):
        kwargs["oracle_token"] = env[ENV_TOKEN]
    if "extra_flags" in checker:
        checker["extra_flags"] = tuple(checker["extra_flags"])
    if "ignored_codes" in checker:
        checker["ignored_codes"] = frozenset(checker["ignored_codes"])
    try:
        return RunConfig(checker=CheckerConfig(**checker), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> RunConfig:
    """Read ``path`` (if given) and apply environment overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping(data, env)
