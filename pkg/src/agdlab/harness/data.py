"""Dataset construction, loading and norm preprocessing."""

from __future__ import annotations

import csv
import logging
import os
from pathlib import Path

import numpy as np

from ..network import NetworkConfig, forward, init_weights
from ..objective import Dataset

logger = logging.getLogger(__name__)

CIFAR10_RECORD_BYTES = 3073
CIFAR10_PIXELS = 3072
CIFAR10_RECORDS_PER_BATCH = 10000
CIFAR10_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR10_TEST_FILE = "test_batch.bin"

__all__ = [
    "normalize_dataset",
    "one_hot",
    "synth_teacher_dataset",
    "load_csv_dataset",
    "write_csv_dataset",
    "load_cifar10_binary",
    "find_cifar10_dir",
    "CIFAR10_RECORD_BYTES",
]


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"class index outside [0, {num_classes})")
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def normalize_dataset(raw: Dataset) -> Dataset:
    """Rescale every input row to norm ``sqrt(d_0)`` and target row to ``sqrt(d_L)``.

    Raises
    ------
    ValueError
        If an input or target row is all zeros; the message names the row.
    """
    x = np.array(raw.inputs, dtype=np.float64)
    y = np.array(raw.targets, dtype=np.float64)
    for name, arr in (("input", x), ("target", y)):
        norms = np.linalg.norm(arr, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ValueError(f"{name} row {int(zero[0])} is zero and cannot be rescaled")
        arr *= (np.sqrt(arr.shape[1]) / norms)[:, None]
    return Dataset(x, y, normalized=True)


def synth_teacher_dataset(config: NetworkConfig, n: int, seed: int, normalize: bool = True) -> Dataset:
    """Inputs drawn uniformly on the sphere, targets from a random teacher network.

    The teacher is a prescription-initialised network drawn from the same
    seed. With ``normalize=False`` the targets are the raw teacher outputs.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    teacher = init_weights(config, rng)
    x = rng.standard_normal((n, config.dims[0]))
    x *= (np.sqrt(config.dims[0]) / np.linalg.norm(x, axis=1))[:, None]
    y, _ = forward(teacher, x)
    data = Dataset(x, np.atleast_2d(y))
    if not normalize:
        return data
    return normalize_dataset(data)


def load_csv_dataset(path, d_0: int, d_L: int) -> Dataset:
    """Read a headerless CSV of ``d_0`` feature columns then targets.

    Targets are either ``d_L`` value columns or a single integer class index,
    which is one-hot encoded. Blank lines and lines starting with ``#`` are
    skipped.
    """
    rows_x, rows_y = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) not in (d_0 + d_L, d_0 + 1):
                raise ValueError(
                    f"{path}:{lineno}: expected {d_0 + d_L} or {d_0 + 1} columns, got {len(row)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: non-numeric field ({err})") from None
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows_x.append(values[:d_0])
            if len(row) == d_0 + d_L:
                rows_y.append(values[d_0:])
            else:
                label = values[d_0]
                if label != int(label) or not 0 <= label < d_L:
                    raise ValueError(f"{path}:{lineno}: class index {label!r} not in [0, {d_L})")
                rows_y.append(one_hot([int(label)], d_L)[0])
    if not rows_x:
        raise ValueError(f"{path}: no data rows")
    return Dataset(np.array(rows_x), np.array(rows_y))


def write_csv_dataset(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, y in zip(data.inputs, data.targets):
            writer.writerow([repr(float(v)) for v in np.concatenate([x, y])])


def _read_cifar_file(path: Path, limit: int | None) -> tuple[np.ndarray, np.ndarray]:
    size = path.stat().st_size
    if size % CIFAR10_RECORD_BYTES:
        raise ValueError(f"{path}: size {size} is not a multiple of {CIFAR10_RECORD_BYTES}")
    count = size // CIFAR10_RECORD_BYTES
    if limit is not None:
        count = min(count, limit)
    raw = np.fromfile(path, dtype=np.uint8, count=count * CIFAR10_RECORD_BYTES)
    raw = raw.reshape(count, CIFAR10_RECORD_BYTES)
    labels = raw[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        bad = int(np.flatnonzero(labels > 9)[0])
        raise ValueError(f"{path}: record {bad} has label byte {labels[bad]} > 9")
    return raw[:, 1:].astype(np.float64) / 255.0, labels


def load_cifar10_binary(
    directory, subset: int | None = None, train: bool = True, files=None
) -> Dataset:
    """Load CIFAR-10 from the binary distribution.

    Each record is one label byte followed by 3072 channel-major pixel
    bytes. Pixels are scaled to [0, 1]; labels become one-hot rows of width
    10. ``subset`` keeps the first records only. The result is not
    normalized.
    """
    directory = Path(directory)
    if files is None:
        files = CIFAR10_TRAIN_FILES if train else (CIFAR10_TEST_FILE,)
    paths = [directory / name for name in files]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"missing CIFAR-10 batch files: {', '.join(missing)}")
    xs, ys = [], []
    remaining = subset
    for path in paths:
        x, y = _read_cifar_file(path, remaining)
        xs.append(x)
        ys.append(y)
        if remaining is not None:
            remaining -= len(y)
            if remaining <= 0:
                break
    return Dataset(np.concatenate(xs), one_hot(np.concatenate(ys), 10))


def find_cifar10_dir() -> Path | None:
    """Locate the binary batches via ``AGDLAB_CIFAR10_DIR`` or a few usual paths."""
    candidates = []
    if os.environ.get("AGDLAB_CIFAR10_DIR"):
        candidates.append(Path(os.environ["AGDLAB_CIFAR10_DIR"]))
    candidates += [
        Path("data/cifar-10-batches-bin"),
        Path.home() / "data" / "cifar-10-batches-bin",
        Path.home() / ".cache" / "cifar-10-batches-bin",
    ]
    for c in candidates:
        if (c / CIFAR10_TRAIN_FILES[0]).is_file():
            return c
    return None
