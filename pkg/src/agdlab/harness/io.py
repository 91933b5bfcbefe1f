"""Metrics and report persistence (CSV and JSON lines)."""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Iterable

from ..agd import RunMetrics

METRICS_COLUMNS = ("step", "epoch", "objective", "G", "eta", "train_acc", "test_acc", "mean_rel_update")

__all__ = [
    "METRICS_COLUMNS",
    "metrics_row",
    "write_metrics_csv",
    "write_metrics_jsonl",
    "read_metrics_csv",
    "read_metrics_jsonl",
    "write_reports_jsonl",
    "run_root",
]


def run_root() -> Path:
    """Directory under which run outputs go, from ``AGDLAB_RUN_DIR`` (default ``runs``)."""
    return Path(os.environ.get("AGDLAB_RUN_DIR", "runs"))


def metrics_row(m: RunMetrics) -> dict:
    return {
        "step": m.step,
        "epoch": m.epoch,
        "objective": m.objective,
        "G": m.G,
        "eta": m.eta,
        "train_acc": m.train_accuracy,
        "test_acc": m.test_accuracy,
        "mean_rel_update": m.mean_relative_update,
    }


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def write_metrics_csv(metrics: Iterable[RunMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for m in metrics:
            row = metrics_row(m)
            row = {k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()}
            writer.writerow(row)


def write_metrics_jsonl(metrics: Iterable[RunMetrics], path) -> None:
    with open(path, "w") as fh:
        for m in metrics:
            row = {k: _json_safe(v) for k, v in metrics_row(m).items()}
            row["per_layer_relative_update"] = m.per_layer_relative_update
            row["per_layer_grad_fro"] = m.per_layer_grad_fro
            fh.write(json.dumps(row) + "\n")


def _parse(value: str):
    if value == "":
        return None
    return float(value)


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            out = {k: _parse(v) for k, v in row.items()}
            out["step"], out["epoch"] = int(out["step"]), int(out["epoch"])
            rows.append(out)
        return rows


def read_metrics_jsonl(path) -> list[dict]:
    with open(path) as fh:
        rows = []
        for line in fh:
            row = json.loads(line)
            rows.append({k: float(v) if isinstance(v, str) else v for k, v in row.items()})
        return rows


def write_reports_jsonl(reports: Iterable, path) -> int:
    """Write one bound report per line; returns the number written."""
    count = 0
    with open(path, "w") as fh:
        for r in reports:
            d = r.to_dict()
            row = {k: d[k] for k in ("name", "lhs", "rhs", "satisfied", "slack", "tolerance", "seed", "instance_id")}
            if d.get("extra"):
                row["extra"] = d["extra"]
            fh.write(json.dumps({k: _json_safe(v) for k, v in row.items()}) + "\n")
            count += 1
    return count
