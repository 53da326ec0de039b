"""Inequality-check records and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = "tamelab-report/1"

PASS = "pass"
FAIL = "fail"
REPORT_ONLY = "report-only"


@dataclass
class InequalityReport:
    check_name: str
    parameters: dict
    worst_margin: float
    worst_location: tuple          # (node index, test id)
    tolerance: float
    verdict: str
    refinement_trend: tuple | None = None
    metadata: dict = field(default_factory=dict)
    margins: list = field(default_factory=list)  # (test_id, t, node, margin) rows

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL

    def to_dict(self) -> dict:
        return {
            "check": self.check_name,
            "parameters": _plain(self.parameters),
            "worst_margin": _plain(self.worst_margin),
            "worst_location": _plain(self.worst_location),
            "tolerance": _plain(self.tolerance),
            "verdict": self.verdict,
            "refinement_trend": _plain(self.refinement_trend),
            "metadata": _plain(self.metadata),
        }


def finish_report(check_name, parameters, margins, tolerance, report_only=False,
                  metadata=None) -> InequalityReport:
    """Assemble a report from margin rows (test_id, t, node, margin)."""
    metadata = dict(metadata or {})
    rows = sorted(margins, key=lambda r: (str(r[0]), float(r[1]), int(r[2])))
    finite = [r for r in rows if np.isfinite(r[3])]
    if len(finite) < len(rows):
        metadata["nan_margins"] = len(rows) - len(finite)
        report_only = True
    if finite:
        worst = min(finite, key=lambda r: r[3])
        worst_margin = float(worst[3])
        worst_location = (int(worst[2]), f"{worst[0]}@t={worst[1]:g}")
    else:
        worst_margin = float("nan")
        worst_location = (-1, "none")
    if report_only:
        verdict = REPORT_ONLY
    else:
        verdict = PASS if worst_margin >= -tolerance else FAIL
    return InequalityReport(check_name=check_name, parameters=dict(parameters),
                            worst_margin=worst_margin, worst_location=worst_location,
                            tolerance=float(tolerance), verdict=verdict,
                            metadata=metadata, margins=rows)


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON emission."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_summary(path, payload: dict) -> None:
    """Canonical JSON: sorted keys, no timestamps, stable float repr."""
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_margins_csv(path, report: InequalityReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_id", "t", "node", "margin"])
        for test_id, t, node, margin in report.margins:
            writer.writerow([test_id, repr(float(t)), int(node), repr(float(margin))])


def dump_profile_csv(path, rows, header=("t", "rho", "alpha", "potential_sup")) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else repr(float(v)) for v in row])
