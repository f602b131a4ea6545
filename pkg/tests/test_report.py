import json
import math

import numpy as np

from chsim.report import BatchReport, ExitCode, Report, Status, canonical_json
from chsim.utils import canonical, round_significant


def _report(scenario_id: str, status: Status, code: ExitCode, **metrics: float) -> Report:
    return Report(scenario_id=scenario_id, kind="measurement", status=status, exit_code=code, metrics=metrics)


# -- canonical data --


def test_round_significant():
    assert round_significant(0.1 + 0.2) == 0.3
    assert round_significant(1 / 3) == 0.333333333333
    assert round_significant(-0.0) == 0.0
    assert math.copysign(1.0, round_significant(-0.0)) == 1.0


def test_canonical_converts_numpy_and_complex():
    data = canonical({"a": np.float64(0.5), "b": np.array([1, 2]), "c": 1j, 2.0: np.bool_(True)})
    assert data == {"a": 0.5, "b": [1, 2], "c": [0.0, 1.0], "2.0": True}


def test_canonical_keeps_non_finite_as_text():
    assert canonical([float("inf"), float("nan")]) == ["inf", "nan"]


def test_canonical_json_sorts_keys():
    text = canonical_json({"b": 1, "a": 2})
    assert text.index('"a"') < text.index('"b"')


# -- reports --


def test_report_json_is_stable():
    report = _report("s", Status.PASS, ExitCode.PASS, probability_pi1=0.1 + 0.2)
    data = json.loads(report.to_json())
    assert data["metrics"]["probability_pi1"] == 0.3
    assert data["status"] == "pass"
    assert data["exit_code"] == 0
    assert report.to_json() == report.to_json()


def test_report_text_lists_metrics_sorted():
    report = _report("s", Status.FAIL, ExitCode.FAIL, zeta=1.0, alpha=2.0)
    text = report.to_text()
    assert "status    fail (exit 1)" in text
    assert text.index("alpha") < text.index("zeta")


def test_batch_exit_code_is_the_most_severe():
    batch = BatchReport(
        reports=[
            _report("a", Status.PASS, ExitCode.PASS),
            _report("b", Status.VIOLATION, ExitCode.VIOLATION),
            _report("c", Status.FAIL, ExitCode.FAIL),
        ]
    )
    assert batch.exit_code == ExitCode.VIOLATION
    assert batch.counts() == {"pass": 1, "fail": 1, "violation": 1, "error": 0}


def test_empty_batch_passes():
    assert BatchReport(reports=[]).exit_code == ExitCode.PASS


def test_batch_json_summary():
    batch = BatchReport(reports=[_report("a", Status.ERROR, ExitCode.NUMERIC)])
    data = json.loads(batch.to_json())
    assert data["summary"] == {"pass": 0, "fail": 0, "violation": 0, "error": 1, "exit_code": 4}
    assert [s["scenario_id"] for s in data["scenarios"]] == ["a"]


def test_report_json_round_trips():
    report = _report("s", Status.PASS, ExitCode.PASS, probability_pi1=1 / 3, commutator_norm=-0.0)
    text = report.to_json()
    assert canonical_json(json.loads(text)) == text
