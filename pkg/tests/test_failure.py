from decimal import Decimal
from fractions import Fraction

import pytest

from claimcheck.errors import IncompleteTrace
from claimcheck.failure import (ARTIFACT_LEVEL, EXECUTION_LEVEL,
                                INTERPRETATION_LEVEL, NOT_FAILED,
                                classify_failure, render_failure_table,
                                tabulate_failures)

from conftest import (trace_artifact_failure, trace_execution_failure,
                      trace_interpretation_failure, trace_success, _event)


def test_classify_success():
    assert classify_failure(trace_success()) == NOT_FAILED


def test_classify_levels():
    assert classify_failure(trace_artifact_failure()).failure_type == ARTIFACT_LEVEL
    assert classify_failure(trace_execution_failure()).failure_type == EXECUTION_LEVEL
    assert classify_failure(
        trace_interpretation_failure()).failure_type == INTERPRETATION_LEVEL


def test_classify_earliest_blocking_event_wins():
    events = trace_artifact_failure()
    # splice a later task failure in; the artifact error still decides
    events.insert(2, _event(9, "task_end", {
        "task_id": "t01", "command": ["x"], "return_code": 1,
        "started": 0.0, "ended": 1.0, "stdout_path": "o", "stderr_path": "e",
        "timed_out": False}))
    fr = classify_failure(events)
    assert fr.failure_type == ARTIFACT_LEVEL
    assert fr.blocking_event == 2


def test_classify_repaired_task_not_a_failure():
    events = [
        _event(1, "episode_start", {"episode_id": "e"}),
        _event(2, "artifact_resolved", {"digest": "d" * 64}),
        _event(3, "task_end", {"task_id": "t01", "command": ["x"],
                               "return_code": 1, "started": 0, "ended": 1,
                               "stdout_path": "o", "stderr_path": "e",
                               "timed_out": False}),
        _event(4, "repair_applied", {"task_id": "t01", "action": {
            "kind": "install_dependency", "detail": "pkg"}}),
        _event(5, "task_end", {"task_id": "t01", "command": ["x"],
                               "return_code": 0, "started": 1, "ended": 2,
                               "stdout_path": "o", "stderr_path": "e",
                               "timed_out": False}),
        _event(6, "episode_end", {"outcome": "failed"}),
    ]
    fr = classify_failure(events)
    # the task ultimately succeeded, so the failure is interpretation-level
    assert fr.failure_type == INTERPRETATION_LEVEL


def test_classify_timeout_is_execution_level():
    events = trace_interpretation_failure()
    events[3]["payload"]["timed_out"] = True
    assert classify_failure(events).failure_type == EXECUTION_LEVEL


def test_classify_incomplete():
    with pytest.raises(IncompleteTrace):
        classify_failure(trace_success()[:1])


def _records(n_art, n_exec, n_interp):
    out = []
    for i in range(n_art):
        out.append(classify_failure(trace_artifact_failure(f"a{i}")))
    for i in range(n_exec):
        out.append(classify_failure(trace_execution_failure(f"x{i}")))
    for i in range(n_interp):
        out.append(classify_failure(trace_interpretation_failure(f"i{i}")))
    return out


def test_tabulation_arithmetic():
    records = _records(8, 14, 5)
    tab = tabulate_failures(records, total_episodes=72)
    assert tab.counts == {ARTIFACT_LEVEL: 8, EXECUTION_LEVEL: 14,
                          INTERPRETATION_LEVEL: 5}
    # [DERIVED] independent oracle: exact fractions, half-up to one decimal
    def oracle(c, t):
        f = Fraction(c * 1000, t)
        return Decimal(int(f) + (1 if f - int(f) >= Fraction(1, 2) else 0)) / 10
    assert tab.failure_shares[ARTIFACT_LEVEL] == oracle(8, 27)
    assert tab.failure_shares[EXECUTION_LEVEL] == oracle(14, 27)
    assert tab.failure_shares[INTERPRETATION_LEVEL] == oracle(5, 27)
    assert tab.episode_shares[ARTIFACT_LEVEL] == oracle(8, 72)
    assert tab.total_failure_share_of_episodes == oracle(27, 72)
    # [PAPER] printed distribution for the 72-episode study
    assert tab.failure_shares[ARTIFACT_LEVEL] == Decimal("29.6")
    assert tab.failure_shares[EXECUTION_LEVEL] == Decimal("51.9")
    assert tab.failure_shares[INTERPRETATION_LEVEL] == Decimal("18.5")
    assert tab.episode_shares[ARTIFACT_LEVEL] == Decimal("11.1")
    assert tab.episode_shares[EXECUTION_LEVEL] == Decimal("19.4")
    assert tab.episode_shares[INTERPRETATION_LEVEL] == Decimal("6.9")
    assert tab.total_failure_share_of_episodes == Decimal("37.5")


def test_tabulation_empty():
    tab = tabulate_failures([], total_episodes=0)
    assert tab.total_failure_share_of_episodes == Decimal("0.0")


def test_render_failure_table():
    tab = tabulate_failures(_records(8, 14, 5), total_episodes=72)
    text = render_failure_table(tab)
    assert "Artifact-level" in text and "29.6" in text and "37.5" in text
