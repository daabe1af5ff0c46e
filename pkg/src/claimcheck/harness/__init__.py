"""Backend handles, configuration, orchestration, statistics, and the CLI."""

from .backends import (ExchangeLog, HttpChatBackend, MockReplayBackend,
                       read_exchange_log, request_digest)
from .config import (BackendConfig, PipelineConfig, SearchConfig, load_config)
from .pipeline import run_pipeline
from .stats import EpisodeStats, compute_episode_stats

__all__ = [
    "BackendConfig",
    "EpisodeStats",
    "ExchangeLog",
    "HttpChatBackend",
    "MockReplayBackend",
    "PipelineConfig",
    "SearchConfig",
    "compute_episode_stats",
    "load_config",
    "read_exchange_log",
    "request_digest",
    "run_pipeline",
]
