"""Value types shared across the sandbox: workspace, plan, records, episode.

All types serialize losslessly to/from JSON dicts so that an episode can be
reconstructed field-by-field from its trace file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TASK_ORIGINS = ("readme", "config", "entry_script", "structure_heuristic")
REPAIR_KINDS = ("install_dependency", "fix_path", "patch_launch_wrapper",
                "add_missing_argument")
ENV_PROVIDERS = ("preinstalled", "venv", "container")
OUTCOMES = ("evidence_produced", "failed")


@dataclass(frozen=True)
class ArtifactRef:
    source: str
    revision: str | None = None
    resolved_digest: str | None = None

    def to_dict(self) -> dict:
        return {"source": self.source, "revision": self.revision,
                "resolved_digest": self.resolved_digest}

    @classmethod
    def from_dict(cls, d: dict) -> "ArtifactRef":
        return cls(source=d["source"], revision=d.get("revision"),
                   resolved_digest=d.get("resolved_digest"))


@dataclass(frozen=True)
class Workspace:
    root: str
    episode_id: str
    created_at: float
    protected_globs: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"root": self.root, "episode_id": self.episode_id,
                "created_at": self.created_at,
                "protected_globs": list(self.protected_globs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Workspace":
        return cls(root=d["root"], episode_id=d["episode_id"],
                   created_at=d["created_at"],
                   protected_globs=tuple(d.get("protected_globs", [])))


@dataclass(frozen=True)
class EnvSpec:
    provider: str = "preinstalled"
    dependency_sources: tuple[str, ...] = ()
    build_steps: tuple[tuple[str, ...], ...] = ()

    def to_dict(self) -> dict:
        return {"provider": self.provider,
                "dependency_sources": list(self.dependency_sources),
                "build_steps": [list(s) for s in self.build_steps]}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        return cls(provider=d.get("provider", "preinstalled"),
                   dependency_sources=tuple(d.get("dependency_sources", [])),
                   build_steps=tuple(tuple(s) for s in d.get("build_steps", [])))


@dataclass(frozen=True)
class Budget:
    wall_clock_limit: float = 1800.0
    max_output_bytes: int = 16 * 1024 * 1024
    max_repair_attempts: int = 2
    cpu_seconds: float | None = None
    memory_bytes: int | None = None

    def to_dict(self) -> dict:
        return {"wall_clock_limit": self.wall_clock_limit,
                "max_output_bytes": self.max_output_bytes,
                "max_repair_attempts": self.max_repair_attempts,
                "cpu_seconds": self.cpu_seconds,
                "memory_bytes": self.memory_bytes}

    @classmethod
    def from_dict(cls, d: dict) -> "Budget":
        return cls(wall_clock_limit=d["wall_clock_limit"],
                   max_output_bytes=d["max_output_bytes"],
                   max_repair_attempts=d["max_repair_attempts"],
                   cpu_seconds=d.get("cpu_seconds"),
                   memory_bytes=d.get("memory_bytes"))


@dataclass(frozen=True)
class Task:
    id: str
    command: tuple[str, ...]
    origin: str
    budget: Budget
    claim_targets: tuple[str, ...] = ()
    output_patterns: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"id": self.id, "command": list(self.command),
                "origin": self.origin, "budget": self.budget.to_dict(),
                "claim_targets": list(self.claim_targets),
                "output_patterns": list(self.output_patterns)}

    @classmethod
    def from_dict(cls, d: dict) -> "Task":
        return cls(id=d["id"], command=tuple(d["command"]), origin=d["origin"],
                   budget=Budget.from_dict(d["budget"]),
                   claim_targets=tuple(d.get("claim_targets", [])),
                   output_patterns=tuple(d.get("output_patterns", [])))


@dataclass(frozen=True)
class ExecutionRecord:
    task_id: str
    command: tuple[str, ...]
    return_code: int
    started: float
    ended: float
    stdout_path: str
    stderr_path: str
    stdout_truncated: bool = False
    stderr_truncated: bool = False
    timed_out: bool = False
    archived_paths: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "command": list(self.command),
                "return_code": self.return_code,
                "started": self.started, "ended": self.ended,
                "stdout_path": self.stdout_path, "stderr_path": self.stderr_path,
                "stdout_truncated": self.stdout_truncated,
                "stderr_truncated": self.stderr_truncated,
                "timed_out": self.timed_out,
                "archived_paths": list(self.archived_paths)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutionRecord":
        return cls(task_id=d["task_id"], command=tuple(d["command"]),
                   return_code=d["return_code"], started=d["started"],
                   ended=d["ended"], stdout_path=d["stdout_path"],
                   stderr_path=d["stderr_path"],
                   stdout_truncated=d.get("stdout_truncated", False),
                   stderr_truncated=d.get("stderr_truncated", False),
                   timed_out=d.get("timed_out", False),
                   archived_paths=tuple(d.get("archived_paths", [])))


@dataclass(frozen=True)
class RepairAction:
    kind: str
    detail: str
    files_touched: tuple[str, ...] = ()
    task_id: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail,
                "files_touched": list(self.files_touched),
                "task_id": self.task_id}

    @classmethod
    def from_dict(cls, d: dict) -> "RepairAction":
        return cls(kind=d["kind"], detail=d["detail"],
                   files_touched=tuple(d.get("files_touched", [])),
                   task_id=d.get("task_id", ""))


@dataclass(frozen=True)
class VerificationEpisode:
    episode_id: str
    artifact: ArtifactRef
    workspace: Workspace
    env: EnvSpec
    plan: tuple[Task, ...]
    records: tuple[ExecutionRecord, ...]
    repairs: tuple[RepairAction, ...]
    outcome: str
    trace_path: str
