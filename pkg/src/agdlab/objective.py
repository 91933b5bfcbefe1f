"""Losses, their Bregman divergences and the composite objective.

Per-sample functions act on the last axis, so a 1-d ``f`` gives a scalar and
a 2-d batch gives one value per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .network import backward, check_weights, forward, perturbation_paths

__all__ = [
    "LossKind",
    "Dataset",
    "DecompositionReport",
    "softmax",
    "log_sum_exp",
    "square_loss",
    "square_loss_grad",
    "xent_loss",
    "xent_loss_grad",
    "bregman_square",
    "bregman_xent",
    "kl_divergence",
    "loss_value",
    "loss_grad",
    "composite_objective",
    "objective_and_gradient",
    "accuracy",
    "decompose_linearisation_error",
    "measure_orthogonality",
]


class LossKind(str, Enum):
    SQUARE = "square"
    XENT = "xent"


@dataclass
class Dataset:
    """Inputs and targets, one sample per row.

    ``normalized`` records that rows have been rescaled to the input norm
    ``sqrt(d_0)`` and target norm ``sqrt(d_L)``; see
    :func:`agdlab.harness.data.normalize_dataset`.
    """

    inputs: np.ndarray
    targets: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} input rows but {self.targets.shape[0]} target rows"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset has non-finite entries")
        if self.normalized:
            d0, dl = self.inputs.shape[1], self.targets.shape[1]
            xn = np.linalg.norm(self.inputs, axis=1)
            yn = np.linalg.norm(self.targets, axis=1)
            if np.any(np.abs(xn - np.sqrt(d0)) > 1e-9 * np.sqrt(d0)) or np.any(
                np.abs(yn - np.sqrt(dl)) > 1e-9 * np.sqrt(dl)
            ):
                raise ValueError("dataset flagged normalized but row norms are off")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[1]

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.targets[index], self.normalized)


@dataclass
class DecompositionReport:
    objective_linearisation_error: float
    model_error_term: float
    loss_error_term: float
    residual: float


def _pair(f, y):
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if f.shape != y.shape:
        raise ValueError(f"output shape {f.shape} does not match target shape {y.shape}")
    return f, y


def _check_distribution(y: np.ndarray, atol: float = 1e-9):
    if np.any(y < 0) or np.any(np.abs(np.sum(y, axis=-1) - 1.0) > atol):
        raise ValueError("xent targets must be non-negative and sum to one")


def log_sum_exp(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    m = np.max(f, axis=-1, keepdims=True)
    return np.squeeze(m, -1) + np.log(np.sum(np.exp(f - m), axis=-1))


def softmax(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    e = np.exp(f - np.max(f, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def square_loss(f, y, d_L: int | None = None):
    """``||f - y||^2 / (2 d_L)``."""
    f, y = _pair(f, y)
    d_L = f.shape[-1] if d_L is None else d_L
    return np.sum((f - y) ** 2, axis=-1) / (2.0 * d_L)


def square_loss_grad(f, y, d_L: int | None = None) -> np.ndarray:
    f, y = _pair(f, y)
    d_L = f.shape[-1] if d_L is None else d_L
    return (f - y) / d_L


def xent_loss(f, y):
    """Cross-entropy written as ``-f.y + log ||exp f||_1``."""
    f, y = _pair(f, y)
    _check_distribution(y)
    return log_sum_exp(f) - np.sum(f * y, axis=-1)


def xent_loss_grad(f, y) -> np.ndarray:
    f, y = _pair(f, y)
    _check_distribution(y)
    return softmax(f) - y


def bregman_square(delta_f, d_L: int | None = None):
    delta_f = np.asarray(delta_f, dtype=np.float64)
    d_L = delta_f.shape[-1] if d_L is None else d_L
    return np.sum(delta_f**2, axis=-1) / (2.0 * d_L)


def bregman_xent(f, delta_f, y):
    """Linearisation error of cross-entropy at ``f`` along ``delta_f``.

    Evaluated as ``lse(f + df) - lse(f) - softmax(f).df``; the target only
    enters through the linear term and cancels. Clipped at zero, since the
    exact value is a KL divergence.
    """
    f, delta_f = _pair(f, delta_f)
    _, y = _pair(f, y)
    _check_distribution(y)
    value = log_sum_exp(f + delta_f) - log_sum_exp(f) - np.sum(softmax(f) * delta_f, axis=-1)
    return np.maximum(value, 0.0)


def kl_divergence(p, q):
    p, q = _pair(p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return np.sum(terms, axis=-1)


def loss_value(kind: LossKind, f, y):
    kind = LossKind(kind)
    return square_loss(f, y) if kind is LossKind.SQUARE else xent_loss(f, y)


def loss_grad(kind: LossKind, f, y) -> np.ndarray:
    kind = LossKind(kind)
    return square_loss_grad(f, y) if kind is LossKind.SQUARE else xent_loss_grad(f, y)


def _bregman(kind: LossKind, f, delta_f, y):
    if LossKind(kind) is LossKind.SQUARE:
        return bregman_square(delta_f)
    return bregman_xent(f, delta_f, y)


def composite_objective(weights: Sequence[np.ndarray], data: Dataset, kind: LossKind) -> float:
    """Mean per-sample loss of the network over ``data``."""
    f, _ = forward(weights, data.inputs)
    return float(np.mean(loss_value(kind, f, data.targets)))


def objective_and_gradient(
    weights: Sequence[np.ndarray], data: Dataset, kind: LossKind
) -> tuple[float, list[np.ndarray], np.ndarray]:
    """Objective, per-layer gradients and the network outputs in one pass."""
    f, cache = forward(weights, data.inputs)
    value = float(np.mean(loss_value(kind, f, data.targets)))
    grads = backward(weights, cache, loss_grad(kind, f, data.targets))
    return value, grads, f


def accuracy(outputs, targets) -> float:
    """Fraction of rows whose output argmax matches the target argmax."""
    outputs = np.atleast_2d(outputs)
    targets = np.atleast_2d(targets)
    return float(np.mean(np.argmax(outputs, axis=1) == np.argmax(targets, axis=1)))


def _linearisation_terms(weights, delta_w, data, kind):
    check_weights(weights)
    if len(delta_w) != len(weights) or any(
        dw.shape != w.shape for dw, w in zip(delta_w, weights)
    ):
        raise ValueError("perturbation shapes do not match the weights")
    f, cache = forward(weights, data.inputs)
    g = loss_grad(kind, f, data.targets)
    _, remainder = perturbation_paths(weights, delta_w, data.inputs)
    return f, cache, g, remainder


def decompose_linearisation_error(
    weights: Sequence[np.ndarray],
    delta_w: Sequence[np.ndarray],
    data: Dataset,
    kind: LossKind,
) -> DecompositionReport:
    """Split the objective's linearisation error into model and loss parts.

    The objective term uses two direct forward passes and the backprop
    gradient; the model term uses the propagated model linearisation error;
    the loss term is the mean Bregman divergence of the direct output change.
    """
    f, cache, g, remainder = _linearisation_terms(weights, delta_w, data, kind)
    grads = backward(weights, cache, g)
    perturbed = [w + dw for w, dw in zip(weights, delta_w)]
    f_new, _ = forward(perturbed, data.inputs)

    before = float(np.mean(loss_value(kind, f, data.targets)))
    after = float(np.mean(loss_value(kind, f_new, data.targets)))
    first_order = float(sum(np.sum(dw * gw) for dw, gw in zip(delta_w, grads)))
    objective_error = (after - before) - first_order

    model_term = float(np.mean(np.sum(g * remainder, axis=1)))
    loss_term = float(np.mean(_bregman(kind, f, f_new - f, data.targets)))
    residual = objective_error - model_term - loss_term
    return DecompositionReport(objective_error, model_term, loss_term, residual)


def measure_orthogonality(
    weights: Sequence[np.ndarray],
    delta_w: Sequence[np.ndarray],
    data: Dataset,
    kind: LossKind,
) -> float:
    """Cosine-style score of the model linearisation error against the loss gradient.

    Mean inner product of ``grad_f loss`` with ``df - J dw`` divided by the
    mean product of their euclidean norms. Zero when the orthogonality
    assumption holds exactly.
    """
    _, _, g, remainder = _linearisation_terms(weights, delta_w, data, kind)
    num = float(np.mean(np.sum(g * remainder, axis=1)))
    den = float(np.mean(np.linalg.norm(g, axis=1) * np.linalg.norm(remainder, axis=1)))
    return 0.0 if den == 0.0 else num / den
