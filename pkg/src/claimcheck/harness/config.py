"""Pipeline configuration: defaults, YAML loading, strict key validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import ConfigInvalid

CONFIG_SCHEMA_VERSION = 1


@dataclass
class BackendConfig:
    kind: str = "mock_replay"          # mock_replay | http_chat
    endpoint: str | None = None
    model: str | None = None
    script: str | None = None          # fixture script path for mock_replay
    api_key_env: str = "CLAIMCHECK_API_KEY"


@dataclass
class SearchConfig:
    kind: str = "off"                  # http | fixture | off
    endpoint: str | None = None
    fixture: str | None = None


@dataclass
class PipelineConfig:
    schema_version: int = CONFIG_SCHEMA_VERSION
    max_claims: int = 10
    retry_budget: int = 2

    metrics: list[str] = field(default_factory=lambda: [
        "MRR", "Hits@1", "Hits@3", "Hits@10", "Accuracy", "F1", "AUC", "Loss"])
    tasks: list[str] = field(default_factory=list)
    datasets: list[str] = field(default_factory=list)
    comparative_markers: list[str] = field(default_factory=lambda: [
        "outperform", "better than", "state of the art", "beats", "surpass",
        "improves over", "superior to"])

    tolerance_relative: float = 0.02
    tolerance_absolute: float | None = 0.005
    metric_directions: dict = field(default_factory=dict)

    budget_wall_clock_seconds: float = 1800.0
    budget_max_output_bytes: int = 16 * 1024 * 1024
    budget_max_repair_attempts: int = 2
    grace_seconds: float = 1.0
    network_allowed: bool = True
    env_provider: str = "preinstalled"

    protected_globs: list[str] = field(default_factory=lambda: [
        "**/model*.py", "**/models/**/*.py", "**/*loss*.py", "**/*eval*.py",
        "**/evaluate*.py"])
    output_patterns: list[str] = field(default_factory=lambda: [
        "results*.txt", "results*.json", "*.log", "outputs/**"])
    repair_argument_defaults: dict = field(default_factory=dict)

    neighbor_cap: int = 25
    decision_tokens: list[str] = field(default_factory=lambda: [
        "accept", "reject", "acceptance", "rejection"])
    price_table: dict = field(default_factory=dict)   # backend name -> $ per 1k tokens

    backend: BackendConfig = field(default_factory=BackendConfig)
    search: SearchConfig = field(default_factory=SearchConfig)

    def to_dict(self) -> dict:
        return asdict(self)


def _apply(dc_type, data: dict, path: str):
    known = {f.name: f for f in fields(dc_type)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigInvalid(f"unknown config key: {path}{key}")
        if key == "backend":
            if not isinstance(value, dict):
                raise ConfigInvalid(f"{path}backend must be a mapping")
            kwargs[key] = _apply(BackendConfig, value, f"{path}backend.")
        elif key == "search":
            if not isinstance(value, dict):
                raise ConfigInvalid(f"{path}search must be a mapping")
            kwargs[key] = _apply(SearchConfig, value, f"{path}search.")
        else:
            kwargs[key] = value
    return dc_type(**kwargs)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load a YAML config; unknown keys are rejected outright."""
    if path is None:
        return PipelineConfig()
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return PipelineConfig()
    if not isinstance(raw, dict):
        raise ConfigInvalid("config file must be a mapping")
    cfg = _apply(PipelineConfig, raw, "")
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if cfg.schema_version != CONFIG_SCHEMA_VERSION:
        raise ConfigInvalid(f"unsupported config schema_version: {cfg.schema_version}")
    if cfg.budget_wall_clock_seconds <= 0 or cfg.budget_max_output_bytes <= 0:
        raise ConfigInvalid("budgets must be strictly positive")
    if cfg.budget_max_repair_attempts < 0:
        raise ConfigInvalid("budget_max_repair_attempts must be >= 0")
    if cfg.tolerance_relative <= 0:
        raise ConfigInvalid("tolerance_relative must be > 0")
    if cfg.tolerance_absolute is not None and cfg.tolerance_absolute < 0:
        raise ConfigInvalid("tolerance_absolute must be >= 0")
    if cfg.backend.kind not in ("mock_replay", "http_chat"):
        raise ConfigInvalid(f"unknown backend kind: {cfg.backend.kind}")
    if cfg.search.kind not in ("http", "fixture", "off"):
        raise ConfigInvalid(f"unknown search kind: {cfg.search.kind}")
