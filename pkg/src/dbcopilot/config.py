"""TOML configuration for the service and CLI. Unknown keys are rejected
with the offending key named, so typos fail loudly instead of silently
falling back to defaults."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):  # pragma: no cover
    import tomllib
else:
    import tomli as tomllib

from .engine import EngineConfig
from .errors import ConfigError
from .safety import DEFAULT_PII_PATTERNS, PiiLexicon
from .session import STANDARD_APPROVALS, TurnCountingPolicy


@dataclass
class LlmConfig:
    backend: str = "http"  # "http" | "scripted"
    script: str | None = None
    base_url_env: str = "LLM_BASE_URL"
    api_key_env: str = "LLM_API_KEY"
    model_env: str = "LLM_MODEL"
    model: str | None = None


@dataclass
class SafetyConfig:
    approvals: list[str] = field(default_factory=lambda: sorted(STANDARD_APPROVALS))
    pii_patterns: list[str] = field(default_factory=lambda: list(DEFAULT_PII_PATTERNS))
    extra_pii_patterns: list[str] = field(default_factory=list)
    collect_stats: bool = False

    def lexicon(self) -> PiiLexicon:
        return PiiLexicon(patterns=tuple(self.pii_patterns) + tuple(self.extra_pii_patterns))

    def approval_set(self) -> frozenset[str]:
        return frozenset(a.lower() for a in self.approvals)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8400


@dataclass
class EvalConfig:
    tasks: str | None = None
    db_root: str | None = None
    out: str | None = None
    n_runs: int = 1
    workers: int = 1


@dataclass
class AppConfig:
    databases: dict[str, str] = field(default_factory=dict)
    llm: LlmConfig = field(default_factory=LlmConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _build_section(cls, data: dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key: [{section}] {key}")
    if cls is EngineConfig and "turn_counting_policy" in data:
        try:
            data = {**data, "turn_counting_policy": TurnCountingPolicy(data["turn_counting_policy"])}
        except ValueError as exc:
            raise ConfigError(
                f"invalid value for [engine] turn_counting_policy: "
                f"{data['turn_counting_policy']!r}"
            ) from exc
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}] section: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> AppConfig:
    sections = {
        "llm": LlmConfig,
        "engine": EngineConfig,
        "safety": SafetyConfig,
        "service": ServiceConfig,
        "eval": EvalConfig,
    }
    known = set(sections) | {"databases"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
    databases = data.get("databases", {})
    if not isinstance(databases, dict) or not all(
        isinstance(v, str) for v in databases.values()
    ):
        raise ConfigError("[databases] must map names to URL strings")
    config = AppConfig(databases=dict(databases))
    for name, cls in sections.items():
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            setattr(config, name, _build_section(cls, dict(data[name]), name))
    return config


def load_config(path: str | Path) -> AppConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
