"""Versioned JSON reports and CSV tables.

Reports carry no wall-clock fields, so identical inputs give byte-identical
files.  Non-finite floats are written as the strings "inf", "-inf", "nan".
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

SCHEMA = "diraclab.report/1"


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, Fraction):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def digest(inputs: Any) -> str:
    """sha256 of the canonical JSON form of ``inputs``."""
    blob = json.dumps(to_jsonable(inputs), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def make_report(name: str, inputs: Dict, values: Any, residuals: Any = None, grid: Optional[Dict] = None,
                solver: Optional[Dict] = None, passed: Optional[bool] = None) -> Dict:
    return {
        "schema": SCHEMA,
        "name": name,
        "inputs": inputs,
        "inputs_digest": digest(inputs),
        "grid": grid or {},
        "solver": solver or {},
        "values": values,
        "residuals": residuals if residuals is not None else {},
        "passed": passed,
    }


def write_report(path, report: Dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report))
    return path


def write_virial_csv(path, report) -> Path:
    """Columns t, theta, dtheta, d2theta, residual_first, residual_second, crosscheck."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def cell(v):
        return "" if v is None else repr(float(v))

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "theta", "dtheta", "d2theta", "residual_first", "residual_second", "crosscheck"])
        for k, t in enumerate(report.times):
            w.writerow([cell(t), cell(report.theta[k]), cell(report.dtheta_identity[k]),
                        cell(report.d2theta_identity[k]), cell(report.residual_first[k]),
                        cell(report.residual_second[k]), cell(report.crosscheck[k])])
    return path
