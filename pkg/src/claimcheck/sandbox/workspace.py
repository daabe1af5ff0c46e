"""Workspace creation and artifact resolution."""

from __future__ import annotations

import hashlib
import shutil
import subprocess
import tarfile
import time
import zipfile
from pathlib import Path

from ..errors import AmbiguousArtifact, ArtifactUnreachable
from .types import ArtifactRef, Workspace

DEFAULT_PROTECTED_GLOBS = (
    "**/model*.py",
    "**/models/**/*.py",
    "**/*loss*.py",
    "**/*eval*.py",
    "**/evaluate*.py",
)


def create_workspace(run_dir: str | Path, episode_id: str,
                     protected_globs: tuple[str, ...] = DEFAULT_PROTECTED_GLOBS,
                     clock=time.time) -> Workspace:
    root = Path(run_dir) / "workspace" / episode_id
    if root.exists() and any(root.iterdir()):
        raise ArtifactUnreachable(f"workspace not empty: {root}")
    root.mkdir(parents=True, exist_ok=True)
    return Workspace(root=str(root), episode_id=episode_id,
                     created_at=clock(), protected_globs=protected_globs)


def repo_root(ws: Workspace) -> Path:
    return Path(ws.root) / "repo"


def tree_digest(root: Path) -> str:
    """Content digest over sorted relative paths + file bytes."""
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file() and ".git" not in p.parts:
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def protected_files(ws: Workspace) -> list[Path]:
    root = repo_root(ws)
    files: set[Path] = set()
    for pattern in ws.protected_globs:
        files.update(p for p in root.glob(pattern) if p.is_file())
    return sorted(files)


def protected_digests(ws: Workspace) -> dict[str, str]:
    root = repo_root(ws)
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in protected_files(ws)}


def resolve_artifact(ref: ArtifactRef, ws: Workspace) -> tuple[ArtifactRef, Path]:
    """Fetch the artifact into the workspace; returns the updated ref and root.

    Local directories are copied, archives extracted, URLs cloned via git.
    """
    dest = repo_root(ws)
    src = ref.source
    if src.startswith(("http://", "https://", "git://", "ssh://")) or src.endswith(".git"):
        cmd = ["git", "clone", "--quiet", src, str(dest)]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=600)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise ArtifactUnreachable(f"clone failed: {e}") from e
        if proc.returncode != 0:
            raise ArtifactUnreachable(
                f"clone failed: {proc.stderr.decode(errors='replace')[:500]}")
        if ref.revision:
            proc = subprocess.run(["git", "checkout", "--quiet", ref.revision],
                                  cwd=dest, capture_output=True)
            if proc.returncode != 0:
                raise ArtifactUnreachable(f"revision not found: {ref.revision}")
    else:
        path = Path(src)
        if not path.exists():
            raise ArtifactUnreachable(f"path does not exist: {src}")
        if path.is_dir():
            shutil.copytree(path, dest, ignore=shutil.ignore_patterns(".git"))
        elif zipfile.is_zipfile(path):
            staging = Path(ws.root) / "_extract"
            with zipfile.ZipFile(path) as zf:
                zf.extractall(staging)
            _adopt_extracted(staging, dest)
        elif tarfile.is_tarfile(path):
            staging = Path(ws.root) / "_extract"
            with tarfile.open(path) as tf:
                tf.extractall(staging)
            _adopt_extracted(staging, dest)
        else:
            raise ArtifactUnreachable(f"unsupported artifact type: {src}")

    digest = tree_digest(dest)
    return ArtifactRef(source=ref.source, revision=ref.revision,
                       resolved_digest=digest), dest


def _adopt_extracted(staging: Path, dest: Path) -> None:
    entries = [p for p in staging.iterdir() if not p.name.startswith(".")]
    dirs = [p for p in entries if p.is_dir()]
    files = [p for p in entries if p.is_file()]
    if len(dirs) == 1 and not files:
        shutil.move(str(dirs[0]), str(dest))
    elif len(dirs) > 1 and not files:
        raise AmbiguousArtifact(
            f"archive contains {len(dirs)} candidate project roots: "
            + ", ".join(sorted(d.name for d in dirs)))
    elif entries:
        dest.mkdir(parents=True, exist_ok=True)
        for p in entries:
            shutil.move(str(p), str(dest / p.name))
    else:
        raise ArtifactUnreachable("archive is empty")
    shutil.rmtree(staging, ignore_errors=True)
