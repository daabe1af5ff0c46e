"""Sandboxed repository verification: workspace, environment, plan,
execution, bounded repair, and trace recording."""

from .environment import EnvHandle, build_environment, detect_env_spec
from .episode import EpisodeRunner, deterministic_episode_id
from .executor import EvidenceStore, archive_outputs, execute_task
from .plan import derive_task_plan, leaf_claims
from .repair import attempt_bounded_repair, diagnose, is_protected
from .trace import TraceWriter, load_episode, read_trace, reconstruct_episode
from .types import (ArtifactRef, Budget, EnvSpec, ExecutionRecord,
                    RepairAction, Task, VerificationEpisode, Workspace)
from .workspace import (DEFAULT_PROTECTED_GLOBS, create_workspace,
                        protected_digests, repo_root, resolve_artifact, tree_digest)

__all__ = [
    "ArtifactRef", "Budget", "EnvHandle", "EnvSpec", "EpisodeRunner",
    "EvidenceStore", "ExecutionRecord", "RepairAction", "Task", "TraceWriter",
    "VerificationEpisode", "Workspace", "DEFAULT_PROTECTED_GLOBS",
    "archive_outputs", "attempt_bounded_repair", "build_environment",
    "create_workspace", "derive_task_plan", "detect_env_spec",
    "deterministic_episode_id", "diagnose", "execute_task", "is_protected",
    "leaf_claims", "load_episode", "protected_digests", "read_trace",
    "reconstruct_episode", "repo_root", "resolve_artifact", "tree_digest",
]
