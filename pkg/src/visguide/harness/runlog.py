"""Per-frame run log with CSV round-tripping and regression comparison."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

COLUMNS: List[str] = [
    "frame", "t",
    # truth
    "uas_x", "uas_y", "uas_speed", "uas_heading",
    "veh_x", "veh_y", "veh_speed", "veh_heading", "veh_a", "veh_delta",
    "r", "theta", "V_r", "V_theta",
    "truth_u", "truth_v", "in_fov",
    # vision front end
    "has_measurement", "meas_u", "meas_v", "naive_u", "naive_v", "meas_x", "meas_y",
    "r_meas", "theta_meas",
    "occlusion", "case", "good_count",
    # estimator
    "est_x", "est_y", "est_vx", "est_vy", "est_ax", "est_ay",
    "r_est", "theta_est", "V_r_est", "V_theta_est", "a_B_est", "delta_B_est",
    # guidance
    "y1", "y1_hat", "y2", "y2_hat", "e1", "e2",
    "a_lat", "a_long", "saturated", "regularized", "events",
]

TEXT_COLUMNS = {"occlusion", "case", "events"}

TRACKER_COLUMNS = ["frame", "t", "occlusion", "case", "good_count", "naive_u", "naive_v",
                   "meas_u", "meas_v", "truth_u", "truth_v"]
ESTIMATOR_COLUMNS = ["frame", "t", "veh_x", "veh_y", "meas_x", "meas_y", "est_x", "est_y",
                     "est_vx", "est_vy", "est_ax", "est_ay", "r", "r_meas", "r_est", "theta",
                     "theta_meas", "theta_est", "V_r", "V_r_est", "V_theta", "V_theta_est"]
GUIDANCE_COLUMNS = ["frame", "t", "y1", "y1_hat", "y2", "y2_hat", "e1", "e2", "a_lat",
                    "a_long", "saturated", "regularized"]


class SchemaMismatchError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            raise ValueError(f"non-finite value {f!r} in run log")
        return repr(f)
    return str(v)


@dataclass
class RunLog:
    """Rows of per-frame values; missing quantities are stored as None."""

    columns: List[str] = field(default_factory=lambda: list(COLUMNS))
    rows: List[Dict[str, object]] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    def append(self, row: Dict[str, object]) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown log columns {sorted(unknown)}")
        self.rows.append({c: row.get(c) for c in self.columns})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        """Numeric column with NaN for missing cells (text columns return objects)."""
        if name not in self.columns:
            raise KeyError(name)
        if name in TEXT_COLUMNS:
            return np.array([r[name] if r[name] is not None else "" for r in self.rows], dtype=object)
        return np.array([np.nan if r[name] is None else float(r[name]) for r in self.rows])

    def to_csv(self, path, columns: Optional[Sequence[str]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = list(columns) if columns is not None else self.columns
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r.get(c)) for c in cols])
        return path

    @classmethod
    def from_csv(cls, path) -> "RunLog":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            log = cls(columns=header)
            for rec in rd:
                row = {}
                for c, v in zip(header, rec):
                    if v == "":
                        row[c] = None
                    elif c in TEXT_COLUMNS:
                        row[c] = v
                    else:
                        row[c] = float(v)
                log.rows.append(row)
        return log


@dataclass
class CompareReport:
    max_abs: Dict[str, float]
    text_mismatches: Dict[str, int]
    missing_mismatches: Dict[str, int]
    rows: int

    @property
    def identical(self) -> bool:
        return (all(v == 0.0 for v in self.max_abs.values())
                and not any(self.text_mismatches.values())
                and not any(self.missing_mismatches.values()))

    def differing(self) -> List[str]:
        cols = {c for c, v in self.max_abs.items() if v != 0.0}
        cols |= {c for c, v in self.text_mismatches.items() if v}
        cols |= {c for c, v in self.missing_mismatches.items() if v}
        return sorted(cols)

    def summary(self) -> str:
        if self.identical:
            return f"identical ({self.rows} rows)"
        lines = [f"{len(self.differing())} differing columns over {self.rows} rows:"]
        for c in self.differing():
            parts = []
            if self.max_abs.get(c):
                parts.append(f"max |diff| = {self.max_abs[c]:.6g}")
            if self.text_mismatches.get(c):
                parts.append(f"{self.text_mismatches[c]} text mismatches")
            if self.missing_mismatches.get(c):
                parts.append(f"{self.missing_mismatches[c]} empty/non-empty mismatches")
            lines.append(f"  {c}: " + ", ".join(parts))
        return "\n".join(lines)


def regression_compare(log: RunLog, golden: RunLog) -> CompareReport:
    """Column-wise maximum absolute difference between two logs of the same schema."""
    if list(log.columns) != list(golden.columns):
        raise SchemaMismatchError("column sets differ")
    if len(log) != len(golden):
        raise SchemaMismatchError(f"row counts differ ({len(log)} vs {len(golden)})")
    max_abs, text, missing = {}, {}, {}
    for c in log.columns:
        if c in TEXT_COLUMNS:
            text[c] = sum(1 for a, b in zip(log.rows, golden.rows) if (a[c] or "") != (b[c] or ""))
            continue
        a = log.column(c)
        b = golden.column(c)
        na, nb = np.isnan(a), np.isnan(b)
        missing[c] = int(np.sum(na != nb))
        both = ~na & ~nb
        max_abs[c] = float(np.max(np.abs(a[both] - b[both]))) if both.any() else 0.0
    return CompareReport(max_abs, text, missing, len(log))
