"""Automatic gradient descent for fully-connected networks, with numerical
checks of the perturbation bounds it is derived from."""

from .agd import (
    EpochSummary,
    RunMetrics,
    StepReport,
    TrainingDiverged,
    TrainResult,
    agd_step,
    auto_lr,
    gd_step,
    gradient_summary,
    train,
)
from .network import ForwardCache, NetworkConfig, backward, forward, init_weights
from .objective import Dataset, LossKind, composite_objective

__version__ = "0.1.0"
