"""Shared fixtures: the manuscript bundle, pipeline configs, a local wheel
for dependency-repair tests, and synthetic trace builders."""

import json
import zipfile
from pathlib import Path

import pytest

from claimcheck.docmodel import parse_document
from claimcheck.harness.config import PipelineConfig

FIXTURES = Path(__file__).parent / "fixtures"

TASK_VOCAB = ["link prediction", "node classification", "graph classification"]
DATASET_VOCAB = ["FB15k-237", "MUTAG"]


@pytest.fixture(scope="session")
def manuscript_path() -> Path:
    return FIXTURES / "compgcn.md"


@pytest.fixture(scope="session")
def manuscript(manuscript_path):
    return parse_document(manuscript_path.read_text())


def make_config() -> PipelineConfig:
    cfg = PipelineConfig()
    cfg.tasks = list(TASK_VOCAB)
    cfg.datasets = list(DATASET_VOCAB)
    cfg.backend.script = str(FIXTURES / "backend_script.json")
    cfg.search.kind = "fixture"
    cfg.search.fixture = str(FIXTURES / "search_fixture.json")
    return cfg


@pytest.fixture()
def pipeline_cfg() -> PipelineConfig:
    return make_config()


@pytest.fixture(scope="session")
def wheel_dir(tmp_path_factory) -> Path:
    """Directory holding a handmade mini_six wheel so install_dependency can
    resolve it offline via PIP_FIND_LINKS."""
    d = tmp_path_factory.mktemp("wheels")
    whl = d / "mini_six-1.0-py3-none-any.whl"
    with zipfile.ZipFile(whl, "w") as zf:
        zf.writestr("mini_six/__init__.py", "__version__ = '1.0'\n")
        zf.writestr("mini_six-1.0.dist-info/METADATA",
                    "Metadata-Version: 2.1\nName: mini-six\nVersion: 1.0\n")
        zf.writestr("mini_six-1.0.dist-info/WHEEL",
                    "Wheel-Version: 1.0\nGenerator: handmade\n"
                    "Root-Is-Purelib: true\nTag: py3-none-any\n")
        zf.writestr("mini_six-1.0.dist-info/RECORD",
                    "mini_six/__init__.py,,\n"
                    "mini_six-1.0.dist-info/METADATA,,\n"
                    "mini_six-1.0.dist-info/WHEEL,,\n"
                    "mini_six-1.0.dist-info/RECORD,,\n")
    return d


@pytest.fixture()
def local_pip(wheel_dir, monkeypatch):
    monkeypatch.setenv("PIP_FIND_LINKS", str(wheel_dir))
    return wheel_dir


# --- synthetic trace builders -------------------------------------------------

def _event(seq, type_, payload, ts=None):
    return {"seq": seq, "ts": 1000.0 + seq if ts is None else ts,
            "type": type_, "payload": payload}


def trace_success(episode_id="ep-ok", start_ts=0.0, end_ts=60.0):
    return [
        _event(1, "episode_start", {"episode_id": episode_id}, ts=start_ts),
        _event(2, "episode_end", {"outcome": "evidence_produced",
                                  "aligned_count": 1}, ts=end_ts),
    ]


def trace_artifact_failure(episode_id="ep-art"):
    return [
        _event(1, "episode_start", {"episode_id": episode_id}),
        _event(2, "artifact_resolved", {"error": "ArtifactUnreachable",
                                        "detail": "clone failed"}),
        _event(3, "episode_end", {"outcome": "failed",
                                  "error": {"stage": "artifact",
                                            "type": "ArtifactUnreachable",
                                            "detail": "clone failed"}}),
    ]


def trace_execution_failure(episode_id="ep-exec"):
    return [
        _event(1, "episode_start", {"episode_id": episode_id}),
        _event(2, "artifact_resolved", {"digest": "d" * 64, "repo": "/r"}),
        _event(3, "task_start", {"task_id": "t01", "command": ["x"]}),
        _event(4, "task_end", {"task_id": "t01", "command": ["x"],
                               "return_code": 1, "started": 0.0, "ended": 1.0,
                               "stdout_path": "o", "stderr_path": "e",
                               "timed_out": False}),
        _event(5, "episode_end", {"outcome": "failed"}),
    ]


def trace_interpretation_failure(episode_id="ep-interp"):
    return [
        _event(1, "episode_start", {"episode_id": episode_id}),
        _event(2, "artifact_resolved", {"digest": "d" * 64, "repo": "/r"}),
        _event(3, "task_start", {"task_id": "t01", "command": ["x"]}),
        _event(4, "task_end", {"task_id": "t01", "command": ["x"],
                               "return_code": 0, "started": 0.0, "ended": 1.0,
                               "stdout_path": "o", "stderr_path": "e",
                               "timed_out": False}),
        _event(5, "episode_end", {"outcome": "failed"}),
    ]


def write_trace(path: Path, events: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for ev in events:
            fh.write(json.dumps(ev) + "\n")
    return path
