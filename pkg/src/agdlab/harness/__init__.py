"""Data ingestion, metrics persistence and the command line."""

from .data import (
    load_cifar10_binary,
    load_csv_dataset,
    normalize_dataset,
    synth_teacher_dataset,
    write_csv_dataset,
)
from .io import write_metrics_csv, write_metrics_jsonl, write_reports_jsonl
