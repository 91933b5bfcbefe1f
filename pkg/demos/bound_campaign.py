"""Randomized audit of the perturbation bounds on prescription-scaled networks.

Every instance draws a random depth and widths, a semi-orthogonal
initialisation and a normalized Gaussian dataset, then measures each bound.
Most bounds never come close to failing. The square-loss objective bound of
1 does fail, because it silently assumes outputs and targets never point
apart; the corrected constant of 2 always holds. The last part builds the
smallest counterexample by hand.

Run: python3 demos/bound_campaign.py [instances]
"""

import collections
import sys

import numpy as np

from agdlab import Dataset, NetworkConfig, forward, init_weights
from agdlab.verify import bounds_campaign, check_objective_bound, check_objective_bound_corrected

instances = int(sys.argv[1]) if len(sys.argv) > 1 else 200

total, bad, tightest = collections.Counter(), collections.Counter(), {}
for r in bounds_campaign(instances, seed=7):
    total[r.name] += 1
    bad[r.name] += not r.satisfied
    ratio = r.lhs / r.rhs if r.rhs > 0 else 0.0
    tightest[r.name] = max(tightest.get(r.name, 0.0), ratio)

print(f"{'check':34s} {'count':>6s} {'violations':>10s} {'max lhs/rhs':>12s}")
for name in sorted(total):
    print(f"{name:34s} {total[name]:6d} {bad[name]:10d} {tightest[name]:12.4f}")

# one layer, one sample, target opposite to the output
config = NetworkConfig((1, 1))
weights = init_weights(config, seed=0)
x = np.array([[1.0]])
f, _ = forward(weights, x)
data = Dataset(x, -f, normalized=True)
plain = check_objective_bound(weights, data)
fixed = check_objective_bound_corrected(weights, data)
print()
print(f"counterexample: objective {plain.lhs:.3f} against bound {plain.rhs:.0f} (satisfied: {plain.satisfied})")
print(f"corrected bound {fixed.rhs:.3f} (satisfied: {fixed.satisfied})")
