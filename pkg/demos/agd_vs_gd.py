"""Automatic gradient descent next to a learning-rate sweep of plain gradient descent.

Plain gradient descent needs its learning rate tuned, and the best value
depends on the architecture. AGD picks its step from the gradient summary
at every iteration. Both optimisers start from the same initialisation and
see the same mini-batches. Here a well-chosen
fixed rate can beat AGD, while a rate ten times larger diverges.

Run: python3 demos/agd_vs_gd.py
"""

import numpy as np

from agdlab import NetworkConfig, TrainingDiverged, train
from agdlab.harness import synth_teacher_dataset

config = NetworkConfig((32, 128, 128, 128, 8))
data = synth_teacher_dataset(config, n=512, seed=0)
epochs = 30

runs = [("agd", None)] + [("gd", lr) for lr in (0.01, 0.1, 1.0, 10.0, 100.0)]
for optimiser, lr in runs:
    label = "agd" if lr is None else f"gd lr={lr:g}"
    try:
        # large rates overflow before the divergence check fires
        with np.errstate(over="ignore", invalid="ignore"):
            result = train(config, data, epochs=epochs, batch_size=64, seed=1, optimiser=optimiser, lr=lr)
    except TrainingDiverged as err:
        print(f"{label:14s} diverged at step {err.record.step}")
        continue
    final = result.epochs[-1]
    print(f"{label:14s} objective after {epochs} epochs: {final.objective:.5f}")
