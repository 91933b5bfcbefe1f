"""Automatic gradient descent and a fixed learning-rate baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import NetworkConfig, check_weights, forward, init_weights
from .objective import Dataset, LossKind, accuracy, loss_value, objective_and_gradient

logger = logging.getLogger(__name__)

__all__ = [
    "StepReport",
    "RunMetrics",
    "EpochSummary",
    "TrainResult",
    "TrainingDiverged",
    "gradient_summary",
    "auto_lr",
    "agd_step",
    "gd_step",
    "train",
    "summarise_epochs",
]


@dataclass
class StepReport:
    G: float
    eta: float
    per_layer_update_fro: list[float]
    per_layer_relative_update: list[float]


@dataclass
class RunMetrics:
    """One optimiser step, measured before the update is applied.

    Step 0 is the evaluation at initialisation on the full training set and
    carries no update. For later steps ``objective`` and ``train_accuracy``
    refer to the mini-batch the step was computed on (the full set in
    full-batch mode). ``test_accuracy`` is filled on the last step of each
    epoch when a test set is given.
    """

    step: int
    epoch: int
    objective: float
    G: float
    eta: float
    train_accuracy: float
    test_accuracy: float | None = None
    per_layer_relative_update: list[float] = field(default_factory=list)
    per_layer_grad_fro: list[float] = field(default_factory=list)

    @property
    def mean_relative_update(self) -> float:
        if not self.per_layer_relative_update:
            return 0.0
        return float(np.mean(self.per_layer_relative_update))


@dataclass
class EpochSummary:
    epoch: int
    objective: float
    train_accuracy: float
    test_accuracy: float | None
    eta_min: float
    eta_mean: float
    eta_max: float
    rel_update_min: float
    rel_update_mean: float
    rel_update_max: float


@dataclass
class TrainResult:
    weights: list[np.ndarray]
    metrics: list[RunMetrics]
    epochs: list[EpochSummary]


class TrainingDiverged(FloatingPointError):
    """A non-finite objective or gradient was met; ``record`` holds the step."""

    def __init__(self, record: RunMetrics, metrics: list[RunMetrics]):
        super().__init__(
            f"non-finite value at step {record.step} (epoch {record.epoch}): "
            f"objective={record.objective!r}, G={record.G!r}"
        )
        self.record = record
        self.metrics = metrics


def _scales(weights: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([math.sqrt(w.shape[0] / w.shape[1]) for w in weights])


def gradient_summary(grads: Sequence[np.ndarray], config: NetworkConfig | None = None) -> float:
    """Width-weighted mean of per-layer gradient Frobenius norms."""
    if config is not None:
        if [g.shape for g in grads] != config.shapes():
            raise ValueError("gradient shapes do not match the network config")
        scales = config.layer_scales()
    else:
        scales = _scales(grads)
    norms = np.array([np.linalg.norm(g) for g in grads])
    return float(np.mean(scales * norms))


def auto_lr(G: float) -> float:
    """``log((1 + sqrt(1 + 4G)) / 2)``, the minimiser of the majorisation."""
    if G < 0:
        raise ValueError("gradient summary must be non-negative")
    return math.log((1.0 + math.sqrt(1.0 + 4.0 * G)) / 2.0)


def agd_step(
    weights: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    config: NetworkConfig | None = None,
) -> tuple[list[np.ndarray], StepReport]:
    """One automatic gradient descent update.

    Each layer moves against its gradient by ``sqrt(d_k/d_{k-1}) * eta / L``
    in Frobenius norm. Layers whose gradient is exactly zero are left as is.
    """
    config = config or check_weights(weights)
    if len(grads) != len(weights) or any(g.shape != w.shape for g, w in zip(grads, weights)):
        raise ValueError("gradient shapes do not match the weights")
    G = gradient_summary(grads, config)
    eta = auto_lr(G)
    depth = len(weights)
    new, upd, rel = [], [], []
    for w, g, scale in zip(weights, grads, config.layer_scales()):
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0 or eta == 0.0:
            new.append(w.copy())
            upd.append(0.0)
            rel.append(0.0)
            continue
        delta = -(eta / depth) * scale * (g / gnorm)
        new.append(w + delta)
        size = float(np.linalg.norm(delta))
        upd.append(size)
        rel.append(size / float(np.linalg.norm(w)))
    return new, StepReport(G, eta, upd, rel)


def gd_step(weights: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr) -> list[np.ndarray]:
    """Plain gradient descent. ``lr`` is a scalar or one value per layer."""
    lrs = np.broadcast_to(np.asarray(lr, dtype=np.float64), (len(weights),))
    if np.any(lrs < 0):
        raise ValueError("learning rate must be non-negative")
    return [w - a * g for w, g, a in zip(weights, grads, lrs)]


def _evaluate(weights, data, kind):
    value, grads, f = objective_and_gradient(weights, data, kind)
    return value, grads, accuracy(f, data.targets)


def _finite(value, grads) -> bool:
    return math.isfinite(value) and all(np.all(np.isfinite(g)) for g in grads)


def train(
    config: NetworkConfig,
    data: Dataset,
    kind: LossKind = LossKind.SQUARE,
    epochs: int = 1,
    batch_size: int | None = None,
    seed: int = 0,
    optimiser: str = "agd",
    lr: float | None = None,
    test_data: Dataset | None = None,
    weights: Sequence[np.ndarray] | None = None,
    stop_at_accuracy: float | None = None,
) -> TrainResult:
    """Train a fully-connected network with AGD or fixed-rate gradient descent.

    Parameters
    ----------
    config : NetworkConfig
    data : Dataset
        Training set; should be normalized for AGD's scaling to apply.
    kind : LossKind
    epochs : int
        Passes over the data; 0 only evaluates the initial weights.
    batch_size : int, optional
        Mini-batch size, ``None`` or ``len(data)`` for full batch.
    seed : int
        Seeds both the initialisation and the per-epoch shuffles.
    optimiser : {"agd", "gd"}
    lr : float
        Learning rate, required for ``"gd"``.
    test_data : Dataset, optional
    weights : list of ndarray, optional
        Start from these weights instead of a fresh initialisation.
    stop_at_accuracy : float, optional
        End training after the first epoch whose full training-set accuracy
        reaches this value.

    Raises
    ------
    TrainingDiverged
        On the first non-finite objective or gradient.
    """
    kind = LossKind(kind)
    if optimiser not in ("agd", "gd"):
        raise ValueError(f"unknown optimiser {optimiser!r}")
    if optimiser == "gd" and (lr is None or lr <= 0):
        raise ValueError("gd needs a positive learning rate")
    if data.input_dim != config.dims[0] or data.output_dim != config.dims[-1]:
        raise ValueError("dataset widths do not match the network config")
    n = len(data)
    batch_size = n if batch_size is None else int(batch_size)
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if not data.normalized:
        logger.warning("training on a dataset that is not normalized")

    rng = np.random.default_rng(seed)
    weights = init_weights(config, rng) if weights is None else [w.copy() for w in weights]
    full_batch = batch_size >= n

    value, grads, acc = _evaluate(weights, data, kind)
    G = gradient_summary(grads, config)
    metrics = [
        RunMetrics(
            step=0,
            epoch=0,
            objective=value,
            G=G,
            eta=auto_lr(G) if optimiser == "agd" and math.isfinite(G) else (lr or 0.0),
            train_accuracy=acc,
            test_accuracy=_test_accuracy(weights, test_data),
            per_layer_grad_fro=[float(np.linalg.norm(g)) for g in grads],
        )
    ]
    if not _finite(value, grads):
        raise TrainingDiverged(metrics[0], metrics)

    step = 0
    epochs_out: list[EpochSummary] = []
    for epoch in range(1, epochs + 1):
        order = np.arange(n) if full_batch else rng.permutation(n)
        for start in range(0, n, batch_size):
            step += 1
            if not (full_batch and step == 1):
                batch = data if full_batch else data.subset(order[start : start + batch_size])
                value, grads, acc = _evaluate(weights, batch, kind)
            record = RunMetrics(
                step=step,
                epoch=epoch,
                objective=value,
                G=float("nan"),
                eta=float("nan"),
                train_accuracy=acc,
                per_layer_grad_fro=[float(np.linalg.norm(g)) for g in grads],
            )
            if not _finite(value, grads):
                metrics.append(record)
                raise TrainingDiverged(record, metrics)
            if optimiser == "agd":
                weights, report = agd_step(weights, grads, config)
                record.G, record.eta = report.G, report.eta
                record.per_layer_relative_update = report.per_layer_relative_update
            else:
                old = weights
                weights = gd_step(weights, grads, lr)
                record.G, record.eta = gradient_summary(grads, config), lr
                record.per_layer_relative_update = [
                    float(np.linalg.norm(a - b) / np.linalg.norm(b)) for a, b in zip(weights, old)
                ]
            metrics.append(record)
        metrics[-1].test_accuracy = _test_accuracy(weights, test_data)
        summary = summarise_epochs([m for m in metrics if m.epoch == epoch])[0]
        f, _ = forward(weights, data.inputs)
        summary.objective = float(np.mean(loss_value(kind, f, data.targets)))
        summary.train_accuracy = accuracy(f, data.targets)
        epochs_out.append(summary)
        logger.info(
            "epoch %d objective %.6g train acc %.4f eta mean %.4g",
            epoch, summary.objective, summary.train_accuracy, summary.eta_mean,
        )
        if stop_at_accuracy is not None and summary.train_accuracy >= stop_at_accuracy:
            break

    return TrainResult(weights, metrics, epochs_out)


def _test_accuracy(weights, test_data: Dataset | None) -> float | None:
    if test_data is None:
        return None
    f, _ = forward(weights, test_data.inputs)
    return accuracy(f, test_data.targets)


def summarise_epochs(metrics: Sequence[RunMetrics]) -> list[EpochSummary]:
    """Group step records by epoch.

    Objective and train accuracy are step means over the epoch; ``train``
    replaces them with a full training-set evaluation at the epoch's end.
    """
    out = []
    for e in sorted({m.epoch for m in metrics if m.step > 0}):
        rows = [m for m in metrics if m.epoch == e and m.step > 0]
        etas = np.array([m.eta for m in rows])
        rel = np.array([m.mean_relative_update for m in rows])
        out.append(
            EpochSummary(
                epoch=e,
                objective=float(np.mean([m.objective for m in rows])),
                train_accuracy=float(np.mean([m.train_accuracy for m in rows])),
                test_accuracy=rows[-1].test_accuracy,
                eta_min=float(etas.min()),
                eta_mean=float(etas.mean()),
                eta_max=float(etas.max()),
                rel_update_min=float(rel.min()),
                rel_update_mean=float(rel.mean()),
                rel_update_max=float(rel.max()),
            )
        )
    return out
