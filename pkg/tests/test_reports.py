import json

import numpy as np
import pytest

import tamelab as tl
from tamelab.reports import dump_summary, finish_report


def test_verdict_threshold_semantics():
    rows = [("a", 0.1, 3, -0.5e-8), ("b", 0.1, 4, 2.0)]
    rep = finish_report("x", {}, rows, tolerance=1e-8)
    assert rep.verdict == "pass"
    assert rep.worst_margin == -0.5e-8
    assert rep.worst_location == (3, "a@t=0.1")
    rep2 = finish_report("x", {}, [("a", 0.1, 3, -2e-8)], tolerance=1e-8)
    assert rep2.verdict == "fail"
    assert rep2.passed is False


def test_report_only_never_fails():
    rep = finish_report("x", {}, [("a", 0.0, 0, -99.0)], tolerance=1e-8, report_only=True)
    assert rep.verdict == "report-only"
    assert rep.passed


def test_nan_margins_demote_to_report_only():
    rep = finish_report("x", {}, [("a", 0.0, 0, float("nan")), ("b", 0.0, 1, 1.0)],
                        tolerance=1e-8)
    assert rep.verdict == "report-only"
    assert rep.metadata["nan_margins"] == 1
    assert rep.worst_margin == 1.0


def test_margin_rows_sorted():
    rows = [("b", 0.2, 1, 0.1), ("a", 0.1, 5, 0.2), ("a", 0.1, 2, 0.3)]
    rep = finish_report("x", {}, rows, tolerance=0.0)
    assert rep.margins == [("a", 0.1, 2, 0.3), ("a", 0.1, 5, 0.2), ("b", 0.2, 1, 0.1)]


def test_dump_summary_handles_numpy_and_nonfinite(tmp_path):
    payload = {"a": np.float64(1.5), "b": np.int32(3), "c": np.array([1.0, 2.0]),
               "d": float("inf"), "e": np.bool_(True)}
    path = tmp_path / "s.json"
    dump_summary(path, payload)
    back = json.loads(path.read_text())
    assert back == {"a": 1.5, "b": 3, "c": [1.0, 2.0], "d": "inf", "e": True}
