"""How well does the exponential majorisation hold once the network is deep?

For a single layer the model is linear, its linearisation error vanishes and
the majorisation is exact. Deeper networks add a model linearisation error
that the bound ignores. This script measures how often the bound fails as
depth grows and how large the ignored term is, for perturbations scaled in
operator norm (the bound's premise) and in Frobenius norm (what AGD applies).

Run: python3 demos/majorisation_residuals.py [instances]
"""

import collections
import sys

import numpy as np

from agdlab.verify import majorisation_campaign

instances = int(sys.argv[1]) if len(sys.argv) > 1 else 300

stats = collections.defaultdict(list)
for r in majorisation_campaign(instances, seed=3):
    stats[(r.extra["depth"], r.name)].append((r.satisfied, r.extra["orthogonality"], r.slack))

print(f"{'depth':>5} {'scaling':24s} {'runs':>5} {'held':>6} {'|cos| mean':>11} {'min slack':>11}")
for (depth, name), rows in sorted(stats.items()):
    held = np.mean([s for s, _, _ in rows])
    cos = np.mean([abs(c) for _, c, _ in rows])
    slack = min(s for _, _, s in rows)
    print(f"{depth:5d} {name:24s} {len(rows):5d} {held:6.1%} {cos:11.4f} {slack:11.2e}")
