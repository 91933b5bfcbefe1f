"""Numerical checkers for the perturbation bounds behind AGD.

Every checker returns a :class:`BoundReport` (or a list of them) comparing a
measured left-hand side against the bound. Campaign functions run the
unconditional checks over randomized prescription-scaled instances.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .agd import RunMetrics, agd_step, gradient_summary
from .linalg import operator_norm, stable_rank
from .network import NetworkConfig, forward, init_weights
from .objective import (
    Dataset,
    LossKind,
    composite_objective,
    decompose_linearisation_error,
    measure_orthogonality,
    objective_and_gradient,
)

TOLERANCE = 1e-9

__all__ = [
    "TOLERANCE",
    "BoundReport",
    "ConvergenceReport",
    "check_output_bound",
    "check_deep_relative_trust",
    "check_majorisation",
    "check_objective_bound",
    "check_objective_bound_corrected",
    "check_gradient_bound",
    "check_gradient_summary_bound",
    "check_convergence",
    "measure_gradient_stable_rank",
    "check_weyl_sandwich",
    "random_instance",
    "agd_perturbation",
    "bounds_campaign",
    "majorisation_campaign",
    "UNCONDITIONAL",
]

# checks whose violation means a bug rather than a failed assumption
UNCONDITIONAL = (
    "output_bound",
    "deep_relative_trust",
    "deep_relative_trust/prescribed",
    "objective_bound",
    "objective_bound/corrected",
    "gradient_bound",
    "gradient_bound/prescribed",
    "weyl_lower",
    "weyl_upper",
)


@dataclass
class BoundReport:
    name: str
    lhs: float
    rhs: float
    satisfied: bool = field(init=False)
    slack: float = field(init=False)
    tolerance: float = TOLERANCE
    seed: int | None = None
    instance_id: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.slack = self.rhs - self.lhs
        self.satisfied = bool(self.lhs <= self.rhs + self.tolerance)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceReport:
    T: int
    min_G_sq: float
    bound_11_over_T: float
    critical_rate_holds: bool
    alpha_hat: float
    final_objective: float
    pl_bound_6_over_alpha2T: float
    global_rate_holds: bool
    non_increasing_fraction: float


def _op_norms(weights: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([operator_norm(w) for w in weights])


def check_output_bound(weights: Sequence[np.ndarray], x) -> BoundReport:
    x = np.asarray(x, dtype=np.float64)
    f, _ = forward(weights, x)
    lhs = float(np.linalg.norm(f))
    rhs = float(np.prod(_op_norms(weights)) * np.linalg.norm(x))
    return BoundReport("output_bound", lhs, rhs)


def check_deep_relative_trust(
    weights: Sequence[np.ndarray],
    delta_w: Sequence[np.ndarray],
    x,
    prescribed_eta: float | None = None,
) -> BoundReport:
    """Output change against the deep relative trust bound.

    With ``prescribed_eta`` the right-hand side is the simplified form
    ``sqrt(d_L) * (exp(eta) - 1)``, valid when data, weights and
    perturbation all follow the dimensional scaling.
    """
    x = np.asarray(x, dtype=np.float64)
    f, _ = forward(weights, x)
    f_new, _ = forward([w + dw for w, dw in zip(weights, delta_w)], x)
    lhs = float(np.linalg.norm(f_new - f))
    if prescribed_eta is not None:
        d_out = weights[-1].shape[0]
        rhs = math.sqrt(d_out) * math.expm1(prescribed_eta)
        return BoundReport("deep_relative_trust/prescribed", lhs, rhs)
    w_norms = _op_norms(weights)
    dw_norms = _op_norms(delta_w)
    # prod(|W|+|dW|) - prod(|W|) equals the relative form when no |W_k| is 0
    rhs = float((np.prod(w_norms + dw_norms) - np.prod(w_norms)) * np.linalg.norm(x))
    return BoundReport("deep_relative_trust", lhs, rhs)


def agd_perturbation(
    grads: Sequence[np.ndarray], eta: float, normalise: str = "frobenius"
) -> list[np.ndarray]:
    """AGD-shaped perturbation at learning rate ``eta``.

    Each layer points against its gradient with size
    ``sqrt(d_k/d_{k-1}) * eta / L``, measured in Frobenius norm (the update
    AGD applies) or in operator norm (the premise of the majorisation).
    """
    depth = len(grads)
    out = []
    for g in grads:
        scale = math.sqrt(g.shape[0] / g.shape[1])
        size = np.linalg.norm(g) if normalise == "frobenius" else operator_norm(g)
        if size == 0.0:
            out.append(np.zeros_like(g))
        else:
            out.append(-(eta / depth) * scale * g / size)
    return out


def check_majorisation(
    weights: Sequence[np.ndarray],
    data: Dataset,
    eta: float,
    normalise: str = "operator",
) -> BoundReport:
    """Objective after an AGD-shaped step against the exponential majorisation.

    The right-hand side is ``L(w) + sum_k tr(dW_k^T grad_k) + (e^eta - 1)^2 / 2``,
    which is the stated majorisation when each ``|dW_k|_*`` equals its
    prescribed size. The report's ``extra`` carries the measured
    orthogonality residual (model term and its cosine score) so a failure can
    be attributed to the orthogonality assumption.
    """
    value, grads, _ = objective_and_gradient(weights, data, LossKind.SQUARE)
    delta_w = agd_perturbation(grads, eta, normalise)
    lhs = composite_objective([w + dw for w, dw in zip(weights, delta_w)], data, LossKind.SQUARE)
    first_order = float(sum(np.sum(dw * g) for dw, g in zip(delta_w, grads)))
    rhs = value + first_order + 0.5 * math.expm1(eta) ** 2
    dec = decompose_linearisation_error(weights, delta_w, data, LossKind.SQUARE)
    score = measure_orthogonality(weights, delta_w, data, LossKind.SQUARE)
    return BoundReport(
        f"majorisation/{normalise}",
        lhs,
        rhs,
        extra={"model_error_term": dec.model_error_term, "orthogonality": score, "eta": eta},
    )


def check_objective_bound(weights: Sequence[np.ndarray], data: Dataset) -> BoundReport:
    return BoundReport("objective_bound", composite_objective(weights, data, LossKind.SQUARE), 1.0)


def check_objective_bound_corrected(weights: Sequence[np.ndarray], data: Dataset) -> BoundReport:
    """Square-loss objective against ``mean (|f| + |y|)^2 / (2 d_L)``.

    Follows from the triangle inequality alone. Under the dimensional
    scaling both norms are at most ``sqrt(d_L)``, so the bound is at most 2;
    the cross term ``-2 f.y`` is what keeps the tighter constant 1 from
    holding when outputs and targets point apart.
    """
    f, _ = forward(weights, data.inputs)
    lhs = composite_objective(weights, data, LossKind.SQUARE)
    norms = np.linalg.norm(f, axis=1) + np.linalg.norm(data.targets, axis=1)
    rhs = float(np.mean(norms**2)) / (2.0 * data.output_dim)
    return BoundReport("objective_bound/corrected", lhs, rhs, extra={"bound_le_2": rhs <= 2.0 + TOLERANCE})


def check_gradient_bound(
    weights: Sequence[np.ndarray], data: Dataset, prescribed: bool = False
) -> list[BoundReport]:
    """Per-layer gradient Frobenius norm against its operator-norm bound.

    ``prescribed=True`` uses the scaled form ``sqrt(2 d_{k-1} / d_k)``.
    """
    value, grads, _ = objective_and_gradient(weights, data, LossKind.SQUARE)
    reports = []
    if prescribed:
        for k, g in enumerate(grads):
            rhs = math.sqrt(2.0 * g.shape[1] / g.shape[0])
            reports.append(
                BoundReport("gradient_bound/prescribed", float(np.linalg.norm(g)), rhs, extra={"layer": k + 1})
            )
        return reports
    w_norms = _op_norms(weights)
    d_out = weights[-1].shape[0]
    x_rms = math.sqrt(float(np.mean(np.sum(data.inputs**2, axis=1))))
    common = math.sqrt(2.0 * max(value, 0.0) / d_out) * x_rms
    for k, g in enumerate(grads):
        others = float(np.prod(np.delete(w_norms, k)))
        reports.append(
            BoundReport("gradient_bound", float(np.linalg.norm(g)), others * common, extra={"layer": k + 1})
        )
    return reports


def check_gradient_summary_bound(weights: Sequence[np.ndarray], data: Dataset) -> BoundReport:
    """Gradient summary against 2; strict inequality is what matters, so no tolerance."""
    _, grads, _ = objective_and_gradient(weights, data, LossKind.SQUARE)
    report = BoundReport("gradient_summary_bound", gradient_summary(grads), 2.0, tolerance=0.0)
    report.satisfied = report.lhs < report.rhs
    return report


def measure_gradient_stable_rank(grads: Sequence[np.ndarray]) -> list[float | None]:
    """Stable rank per layer, ``None`` where the gradient is zero."""
    return [None if not np.any(g) else stable_rank(g) for g in grads]


def check_weyl_sandwich(
    before: Sequence[np.ndarray], after: Sequence[np.ndarray], eta: float, depth: int | None = None
) -> list[BoundReport]:
    """Operator norm drift of each layer over one step at learning rate ``eta``."""
    depth = len(before) if depth is None else depth
    reports = []
    for k, (w, w_new) in enumerate(zip(before, after)):
        op, op_new = operator_norm(w), operator_norm(w_new)
        reports.append(BoundReport("weyl_lower", (1 - eta / depth) * op, op_new, extra={"layer": k + 1}))
        reports.append(BoundReport("weyl_upper", op_new, (1 + eta / depth) * op, extra={"layer": k + 1}))
    return reports


def check_convergence(metrics: Sequence[RunMetrics], config: NetworkConfig) -> ConvergenceReport:
    """Post-hoc convergence checks on a full-batch square-loss AGD run.

    Uses the update steps (``step >= 1``). The critical-point rate compares
    ``min G_t^2`` with ``11/T``. ``alpha_hat`` is the smallest ratio of a
    layer's gradient norm to ``sqrt(2 L(w) d_{k-1}/d_k)`` seen during the run,
    and the global rate compares the final objective with
    ``6 / (alpha_hat^2 T)``.
    """
    steps = [m for m in metrics if m.step >= 1]
    if not steps:
        raise ValueError("no optimisation steps in the metrics")
    T = len(steps)
    g_sq = min(m.G**2 for m in steps)
    bound = 11.0 / T
    fan = [config.dims[k] / config.dims[k + 1] for k in range(config.depth)]
    alpha = math.inf
    for m in steps:
        if m.objective <= 0:
            continue
        for gnorm, ratio in zip(m.per_layer_grad_fro, fan):
            alpha = min(alpha, gnorm / math.sqrt(2.0 * m.objective * ratio))
    final = steps[-1].objective
    pl_bound = math.inf if alpha in (0.0, math.inf) else 6.0 / (alpha**2 * T)
    objectives = np.array([m.objective for m in steps])
    frac = float(np.mean(np.diff(objectives) <= 0.0)) if T > 1 else 1.0
    return ConvergenceReport(
        T=T,
        min_G_sq=g_sq,
        bound_11_over_T=bound,
        critical_rate_holds=g_sq <= bound,
        alpha_hat=alpha,
        final_objective=final,
        pl_bound_6_over_alpha2T=pl_bound,
        global_rate_holds=final <= pl_bound,
        non_increasing_fraction=frac,
    )


# ---------------------------------------------------------------------------
# randomized campaigns


def random_instance(rng: np.random.Generator, max_depth: int = 8, max_width: int = 64, max_n: int = 16):
    """A prescription-scaled network with a normalized random square-loss dataset."""
    from .harness.data import normalize_dataset

    depth = int(rng.integers(1, max_depth + 1))
    dims = tuple(int(d) for d in rng.integers(1, max_width + 1, size=depth + 1))
    config = NetworkConfig(dims)
    weights = init_weights(config, rng)
    n = int(rng.integers(1, max_n + 1))
    x = rng.standard_normal((n, dims[0]))
    y = rng.standard_normal((n, dims[-1]))
    data = normalize_dataset(Dataset(x, y))
    return config, weights, data


def bounds_campaign(instances: int, seed: int, max_depth: int = 8, max_width: int = 64) -> Iterator[BoundReport]:
    """Run every unconditional checker on ``instances`` random instances.

    Each instance yields output bound, deep relative trust (general and
    prescribed, at an eta drawn from {0.01, 0.1, 1}), objective bound,
    gradient bounds (general and prescribed), gradient summary bound and the
    Weyl sandwich for one AGD step.
    """
    rng = np.random.default_rng(seed)
    etas = (0.01, 0.1, 1.0)
    for i in range(instances):
        config, weights, data = random_instance(rng, max_depth, max_width)
        x = data.inputs[0]
        reports = [check_output_bound(weights, x)]

        _, grads, _ = objective_and_gradient(weights, data, LossKind.SQUARE)
        eta = etas[i % 3]
        dw = agd_perturbation(grads, eta, normalise="operator")
        reports.append(check_deep_relative_trust(weights, dw, x))
        if all(np.any(d) for d in dw):
            reports.append(check_deep_relative_trust(weights, dw, x, prescribed_eta=eta))

        reports.append(check_objective_bound(weights, data))
        reports.append(check_objective_bound_corrected(weights, data))
        reports.extend(check_gradient_bound(weights, data))
        reports.extend(check_gradient_bound(weights, data, prescribed=True))
        reports.append(check_gradient_summary_bound(weights, data))

        after, step = agd_step(weights, grads, config)
        reports.extend(check_weyl_sandwich(weights, after, step.eta))
        for r in reports:
            r.seed, r.instance_id = seed, i
            yield r


def majorisation_campaign(
    instances: int, seed: int, max_depth: int = 4, max_width: int = 32, max_eta: float = 0.5
) -> Iterator[BoundReport]:
    """Majorisation checks with attributed orthogonality residuals.

    Not asserted in general: the bound leans on the orthogonality assumption,
    which deep networks only satisfy approximately.
    """
    rng = np.random.default_rng(seed)
    for i in range(instances):
        config, weights, data = random_instance(rng, max_depth, max_width)
        eta = float(rng.uniform(0.0, max_eta))
        for normalise in ("operator", "frobenius"):
            r = check_majorisation(weights, data, eta, normalise)
            r.seed, r.instance_id = seed, i
            r.extra["depth"] = config.depth
            yield r
