"""Run reports and machine-readable output.

A run report echoes its config, carries one entry per metric with the
declared threshold and verdict, and is written atomically (temp file +
rename in the same directory). CSV rows, when an experiment produces
per-path data, are written with shortest-roundtrip float formatting so
identical runs are byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .config import ExperimentConfig, config_as_dict

REPORT_SCHEMA_VERSION = 1


@dataclass
class RunReport:
    kind: str
    config: dict
    metrics: dict
    passed: bool
    wall_clock_s: float
    rows: Optional[list] = None
    failure_cause: Optional[str] = None
    library_version: str = __version__
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "library_version": self.library_version,
            "kind": self.kind,
            "passed": self.passed,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "config": self.config,
            "metrics": self.metrics,
        }
        if self.failure_cause:
            payload["failure_cause"] = self.failure_cause
        return json.dumps(payload, indent=2, sort_keys=True,
                          default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.rows:
            names = list(self.rows[0])
            writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: _csv_cell(v) for k, v in row.items()})
        else:
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["metric", "value"])
            for key, value in sorted(_flatten(self.metrics).items()):
                writer.writerow([key, _csv_cell(value)])
        return buf.getvalue()


def _json_default(obj):
    try:
        import numpy as np
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.bool_,)):
            return bool(obj)
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _csv_cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, path + "."))
        elif isinstance(value, (list, tuple)):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    out.update(_flatten(item, f"{path}[{i}]."))
                else:
                    out[f"{path}[{i}]"] = item
        else:
            out[path] = value
    return out


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: RunReport, cfg: ExperimentConfig) -> Optional[str]:
    path = cfg.output.get("path")
    if not path:
        return None
    fmt = cfg.output.get("format", "json")
    atomic_write(path, report.to_csv() if fmt == "csv" else report.to_json())
    return path


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False


def make_report(kind: str, cfg: ExperimentConfig, metrics: dict, passed: bool,
                elapsed: float, rows=None, failure_cause=None) -> RunReport:
    return RunReport(kind=kind, config=config_as_dict(cfg), metrics=metrics,
                     passed=bool(passed), wall_clock_s=elapsed, rows=rows,
                     failure_cause=failure_cause)
