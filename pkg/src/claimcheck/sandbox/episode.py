"""Episode orchestration: one budgeted verification attempt with full trace.

Stage failures (unreachable artifact, broken environment, no runnable tasks)
are recorded in the trace and close the episode as failed; they never raise
out of run(). The evidence_produced/failed outcome is decided post hoc by the
alignment stage, so finalize() takes it as an argument.
"""

from __future__ import annotations

import hashlib
import time
from pathlib import Path

from ..claims import Claim
from ..errors import (AmbiguousArtifact, ArtifactUnreachable, BudgetExhausted,
                      EnvBuildFailed, NoRunnableTasks, RepairRefused)
from .environment import EnvHandle, build_environment, detect_env_spec
from .executor import EvidenceStore, archive_outputs, execute_task
from .plan import derive_task_plan
from .repair import attempt_bounded_repair
from .trace import REPAIR_POLICY_VERSION, TRACE_SCHEMA_VERSION, TraceWriter, reconstruct_episode
from .types import ArtifactRef, Budget, EnvSpec, Task, VerificationEpisode, Workspace
from .workspace import DEFAULT_PROTECTED_GLOBS, create_workspace, resolve_artifact


def deterministic_episode_id(manuscript_id: str, artifact_source: str,
                             index: int = 1) -> str:
    h = hashlib.sha256(f"{manuscript_id}\n{artifact_source}".encode()).hexdigest()[:12]
    return f"ep-{h}-{index:03d}"


class EpisodeRunner:
    def __init__(self, run_dir: str | Path, episode_id: str, *,
                 budget: Budget | None = None,
                 protected_globs: tuple[str, ...] = DEFAULT_PROTECTED_GLOBS,
                 grace: float = 1.0,
                 network_allowed: bool = True,
                 argument_defaults: dict[str, str] | None = None,
                 output_patterns: tuple[str, ...] = ("results*.txt", "results*.json",
                                                     "*.log", "outputs/**"),
                 env_provider: str = "preinstalled",
                 clock=time.time):
        self.run_dir = Path(run_dir)
        self.episode_id = episode_id
        self.budget = budget or Budget()
        self.grace = grace
        self.network_allowed = network_allowed
        self.argument_defaults = argument_defaults or {}
        self.output_patterns = output_patterns
        self.env_provider = env_provider
        self.clock = clock

        self.trace = TraceWriter(self.run_dir / "traces" / f"{episode_id}.jsonl",
                                 clock=clock)
        self.store = EvidenceStore(self.run_dir / "evidence")
        self.workspace: Workspace = create_workspace(
            self.run_dir, episode_id, protected_globs, clock=clock)
        self.artifact: ArtifactRef | None = None
        self.env_spec: EnvSpec = EnvSpec(provider=env_provider)
        self.env: EnvHandle | None = None
        self.plan: list[Task] = []
        self.stage_error: tuple[str, str, str] | None = None  # (stage, type, detail)

    # -- stages ---------------------------------------------------------------

    def run(self, ref: ArtifactRef, claims: list[Claim]) -> None:
        self.artifact = ref
        self.trace.emit("episode_start", {
            "episode_id": self.episode_id,
            "schema_version": TRACE_SCHEMA_VERSION,
            "repair_policy_version": REPAIR_POLICY_VERSION,
            "workspace": self.workspace.to_dict(),
            "artifact": ref.to_dict(),
        })
        try:
            self.artifact, repo = resolve_artifact(ref, self.workspace)
        except (ArtifactUnreachable, AmbiguousArtifact) as e:
            self.trace.emit("artifact_resolved",
                            {"error": type(e).__name__, "detail": str(e)})
            self.stage_error = ("artifact", type(e).__name__, str(e))
            return
        self.trace.emit("artifact_resolved",
                        {"digest": self.artifact.resolved_digest, "repo": str(repo)})

        self.env_spec = detect_env_spec(repo, provider=self.env_provider)
        try:
            self.env = build_environment(self.env_spec, self.workspace, self.budget,
                                         trace=self.trace,
                                         network_allowed=self.network_allowed)
        except (EnvBuildFailed, BudgetExhausted) as e:
            self.stage_error = ("environment", type(e).__name__, str(e))
            return

        try:
            self.plan = derive_task_plan(repo, claims, budget=self.budget,
                                         output_patterns=self.output_patterns)
        except NoRunnableTasks as e:
            self.stage_error = ("plan", type(e).__name__, str(e))
            return

        for task in self.plan:
            self._run_task(task)

    def _run_task(self, task: Task) -> None:
        current = task
        attempts = 0
        kinds_used: set[str] = set()
        while True:
            record = execute_task(
                current, self.env, self.workspace, grace=self.grace,
                trace=self.trace,
                archiver=lambda out_rel, err_rel, t=current: archive_outputs(
                    t, self.workspace, self.store,
                    extra_files=(out_rel, err_rel), trace=self.trace))
            if record.return_code == 0 or record.timed_out:
                return
            try:
                action, current = attempt_bounded_repair(
                    record, current, self.env, self.workspace,
                    attempts_used=attempts, kinds_used=kinds_used,
                    argument_defaults=self.argument_defaults, trace=self.trace)
            except RepairRefused:
                return
            attempts += 1
            kinds_used.add(action.kind)

    # -- finalization -----------------------------------------------------------

    def finalize(self, outcome: str, aligned_count: int = 0) -> VerificationEpisode:
        payload = {
            "outcome": outcome,
            "aligned_count": aligned_count,
            "env": self.env_spec.to_dict(),
            "plan": [t.to_dict() for t in self.plan],
        }
        if self.stage_error:
            payload["error"] = {"stage": self.stage_error[0],
                                "type": self.stage_error[1],
                                "detail": self.stage_error[2]}
        self.trace.emit("episode_end", payload)
        return reconstruct_episode(self.trace.events, str(self.trace.path))
