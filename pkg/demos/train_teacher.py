"""Train a small relu network on a random teacher with no learning rate to tune.

The teacher is another prescription-initialised network, so the task is
realisable up to the target renormalisation. Watch the automatic learning
rate shrink as the gradient summary falls, then check the run against the
1/T critical-point rate.

Run: python3 demos/train_teacher.py
"""

from agdlab import NetworkConfig, train
from agdlab.harness import synth_teacher_dataset
from agdlab.verify import check_convergence

config = NetworkConfig((16, 32, 32, 16))
data = synth_teacher_dataset(config, n=256, seed=0)

result = train(config, data, epochs=500, seed=1)

print(f"{'step':>5} {'objective':>11} {'G':>9} {'eta':>9}")
for m in result.metrics[1::50]:
    print(f"{m.step:5d} {m.objective:11.6f} {m.G:9.5f} {m.eta:9.5f}")

report = check_convergence(result.metrics, config)
print()
print(f"min G^2 over {report.T} steps: {report.min_G_sq:.3e} (bound 11/T = {report.bound_11_over_T:.3e})")
print(f"objective non-increasing on {100 * report.non_increasing_fraction:.1f}% of steps")
print(f"measured PL constant {report.alpha_hat:.3f}, final objective {report.final_objective:.3e}")
print(f"global rate 6/(alpha^2 T) = {report.pl_bound_6_over_alpha2T:.3e} holds: {report.global_rate_holds}")
