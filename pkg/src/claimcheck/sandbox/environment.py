"""Controlled environment construction for a resolved repository."""

from __future__ import annotations

import os
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from ..errors import BudgetExhausted, EnvBuildFailed
from .types import Budget, EnvSpec, Workspace
from .workspace import repo_root


@dataclass
class EnvHandle:
    """Handle to a built environment: interpreter, env vars, install hook."""

    python: str
    site_dir: str
    repo: str
    network_allowed: bool = True

    def env_vars(self) -> dict[str, str]:
        env = dict(os.environ)
        parts = [self.site_dir, self.repo]
        if env.get("PYTHONPATH"):
            parts.append(env["PYTHONPATH"])
        env["PYTHONPATH"] = os.pathsep.join(parts)
        env.setdefault("PYTHONUNBUFFERED", "1")
        return env

    def install(self, package: str, timeout: float = 600.0) -> subprocess.CompletedProcess:
        cmd = [self.python, "-m", "pip", "install", "--quiet",
               "--target", self.site_dir, package]
        return subprocess.run(cmd, capture_output=True, timeout=timeout)


def detect_env_spec(repo: Path, provider: str = "preinstalled") -> EnvSpec:
    """Derive build steps from declared dependency sources only."""
    sources: list[str] = []
    steps: list[tuple[str, ...]] = []
    site = "{site}"
    for name in ("requirements.txt", "requirements-dev.txt"):
        if (repo / name).exists():
            sources.append(name)
            steps.append((sys.executable, "-m", "pip", "install", "--quiet",
                          "--target", site, "-r", name))
    for name in ("pyproject.toml", "setup.py"):
        if (repo / name).exists() and name not in sources:
            sources.append(name)
    return EnvSpec(provider=provider, dependency_sources=tuple(sources),
                   build_steps=tuple(steps))


def build_environment(spec: EnvSpec, ws: Workspace, budget: Budget,
                      trace=None, network_allowed: bool = True) -> EnvHandle:
    """Execute the build steps in order under the budget.

    Emits one env_step trace event per step when a trace writer is supplied.
    """
    repo = repo_root(ws)
    site = Path(ws.root) / "env_site"
    site.mkdir(exist_ok=True)
    handle = EnvHandle(python=sys.executable, site_dir=str(site),
                       repo=str(repo), network_allowed=network_allowed)
    for idx, step in enumerate(spec.build_steps):
        cmd = [part.replace("{site}", str(site)) for part in step]
        try:
            proc = subprocess.run(cmd, cwd=repo, capture_output=True,
                                  timeout=budget.wall_clock_limit)
        except subprocess.TimeoutExpired as e:
            if trace:
                trace.emit("env_step", {"index": idx, "command": cmd,
                                        "error": "BudgetExhausted"})
            raise BudgetExhausted(
                f"environment step exceeded {budget.wall_clock_limit}s: {cmd}") from e
        log = (proc.stdout + proc.stderr).decode(errors="replace")[-4000:]
        if trace:
            trace.emit("env_step", {"index": idx, "command": cmd,
                                    "return_code": proc.returncode, "log": log})
        if proc.returncode != 0:
            raise EnvBuildFailed(f"step {cmd} exited {proc.returncode}:\n{log}")
    return handle
