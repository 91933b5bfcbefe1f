"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line through ``record_criterion`` before it
asserts, so the summary at the end of the run lists all verdicts.
"""

import collections
import math
import time

import numpy as np
import pytest

from agdlab.agd import TrainingDiverged, agd_step, auto_lr, train
from agdlab.harness.data import find_cifar10_dir, load_cifar10_binary, normalize_dataset, synth_teacher_dataset
from agdlab.network import NetworkConfig, init_weights
from agdlab.objective import (
    Dataset,
    bregman_square,
    bregman_xent,
    composite_objective,
    decompose_linearisation_error,
    objective_and_gradient,
    square_loss,
    square_loss_grad,
)
from agdlab.verify import bounds_campaign, check_convergence
from conftest import record_criterion
from oracles import direct_kl, direct_softmax, finite_difference_gradient, jacobi_singular_values

CAMPAIGN_INSTANCES = 1000
CAMPAIGN_SEED = 7


@pytest.fixture(scope="module")
def campaign():
    start = time.perf_counter()
    reports = list(bounds_campaign(CAMPAIGN_INSTANCES, CAMPAIGN_SEED))
    return reports, time.perf_counter() - start


def test_criterion_1_bregman_identities():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_sq = worst_kl = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 33))
        f, y, df = (rng.standard_normal(d) * 3 for _ in range(3))
        direct = square_loss(f + df, y, d) - square_loss(f, y, d) - square_loss_grad(f, y, d) @ df
        worst_sq = max(worst_sq, abs(bregman_square(df, d) - direct))
    for _ in range(1000):
        d = int(rng.integers(1, 33))
        f, df = rng.standard_normal(d) * 3, rng.standard_normal(d) * 3
        y = rng.dirichlet(np.ones(d))
        kl = direct_kl(direct_softmax(f), direct_softmax(f + df))
        worst_kl = max(worst_kl, abs(bregman_xent(f, df, y) - kl))
    elapsed = time.perf_counter() - start
    ok = worst_sq <= 1e-10 and worst_kl <= 1e-9 and elapsed < 10
    record_criterion(1, ok, f"max square err {worst_sq:.2e}, max KL err {worst_kl:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_gradient_exactness():
    rng = np.random.default_rng(102)
    start = time.perf_counter()
    worst = 0.0
    nets = 100
    for _ in range(nets):
        depth = int(rng.integers(1, 6))
        dims = tuple(int(d) for d in rng.integers(1, 17, size=depth + 1))
        config = NetworkConfig(dims)
        weights = init_weights(config, rng)
        data = normalize_dataset(Dataset(rng.standard_normal((4, dims[0])), rng.standard_normal((4, dims[-1]))))
        _, grads, _ = objective_and_gradient(weights, data, "square")
        fd = finite_difference_gradient(lambda ws: composite_objective(ws, data, "square"), weights, h=1e-5)
        g, h = np.concatenate([x.ravel() for x in grads]), np.concatenate([x.ravel() for x in fd])
        scale = max(np.linalg.norm(h), np.linalg.norm(g))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(g - h) / scale))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 60
    record_criterion(2, ok, f"{nets} nets, max relative error {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_unconditional_bounds(campaign):
    reports, elapsed = campaign
    counted = ("output_bound", "deep_relative_trust", "deep_relative_trust/prescribed", "objective_bound",
               "gradient_bound", "gradient_bound/prescribed", "weyl_lower", "weyl_upper")
    totals, bad = collections.Counter(), collections.Counter()
    for r in reports:
        if r.name in counted:
            totals[r.name] += 1
            bad[r.name] += not r.satisfied
    instances = {r.instance_id for r in reports}
    violations = sum(bad.values())
    ok = violations == 0 and len(instances) == CAMPAIGN_INSTANCES and elapsed < 300
    detail = ", ".join(f"{n} {bad[n]}/{totals[n]}" for n in counted)
    record_criterion(3, ok, f"{violations} violations over {len(instances)} instances in {elapsed:.0f}s: {detail}")
    assert ok, detail


def test_criterion_4_agd_formula():
    etas = [auto_lr(0.0), auto_lr(2.0), auto_lr(6.0)]
    formula_ok = etas[0] == 0.0 and abs(etas[1] - math.log(2)) <= 1e-12 and abs(etas[2] - math.log(3)) <= 1e-12
    config = NetworkConfig((12, 24, 24, 6))
    data = synth_teacher_dataset(config, 64, seed=104)
    weights = init_weights(config, 105)
    worst = 0.0
    for _ in range(100):
        _, grads, _ = objective_and_gradient(weights, data, "square")
        new, report = agd_step(weights, grads, config)
        for w, w_new, scale in zip(weights, new, config.layer_scales()):
            worst = max(worst, abs(np.linalg.norm(w_new - w) - scale * report.eta / config.depth))
        weights = new
    ok = formula_ok and worst <= 1e-12
    record_criterion(4, ok, f"eta(0,2,6) = {etas}, max per-layer update error {worst:.2e} over 100 steps")
    assert ok


def test_criterion_5_initialisation_spectrum():
    rng = np.random.default_rng(106)
    configs = [(64, 64), (64, 8), (8, 64), (1, 64), (64, 1), (3, 17, 64, 5)]
    configs += [tuple(int(d) for d in rng.integers(1, 65, size=int(rng.integers(2, 6)))) for _ in range(10)]
    worst = 0.0
    for dims in configs:
        config = NetworkConfig(dims)
        for w, scale in zip(init_weights(config, rng), config.layer_scales()):
            worst = max(worst, float(np.max(np.abs(jacobi_singular_values(w) - scale))))
    ok = worst <= 1e-9
    record_criterion(5, ok, f"{len(configs)} configs, max singular value error {worst:.2e}")
    assert ok


def test_criterion_6_convergence():
    start = time.perf_counter()
    config = NetworkConfig((16, 32, 32, 16))
    data = synth_teacher_dataset(config, 256, seed=106)
    result = train(config, data, epochs=500, seed=107)
    rep = check_convergence(result.metrics, config)
    elapsed = time.perf_counter() - start
    ok = rep.T == 500 and rep.critical_rate_holds and rep.non_increasing_fraction >= 0.99 and elapsed < 120
    record_criterion(
        6,
        ok,
        f"min G^2 {rep.min_G_sq:.3e} vs 11/T {rep.bound_11_over_T:.3e}, "
        f"non-increasing {rep.non_increasing_fraction:.3f}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_7_gradient_summary_below_two(campaign):
    reports, _ = campaign
    gs = [r for r in reports if r.name == "gradient_summary_bound"]
    worst = max(r.lhs for r in gs)
    ok = len(gs) == CAMPAIGN_INSTANCES and all(r.satisfied for r in gs) and worst < 2.0
    record_criterion(7, ok, f"{len(gs)} instances, max G {worst:.4f}")
    assert ok


def test_criterion_8_cifar10_desk_scale():
    directory = find_cifar10_dir()
    if directory is None:
        msg = "CIFAR-10 binaries not found; set AGDLAB_CIFAR10_DIR to the cifar-10-batches-bin directory"
        record_criterion(8, False, msg)
        pytest.fail(msg)
    start = time.perf_counter()
    data = normalize_dataset(load_cifar10_binary(directory, subset=1000))
    config = NetworkConfig((3072, 256, 256, 10))
    try:
        result = train(config, data, epochs=200, batch_size=128, seed=0, stop_at_accuracy=0.99)
    except TrainingDiverged as err:
        record_criterion(8, False, f"non-finite value: {err}")
        raise
    best = max(e.train_accuracy for e in result.epochs)
    elapsed = time.perf_counter() - start
    ok = best >= 0.99 and elapsed < 1800
    record_criterion(8, ok, f"train accuracy {best:.3f} after {len(result.epochs)} epochs, {elapsed:.0f}s")
    assert ok


def test_criterion_9_decomposition_identity():
    rng = np.random.default_rng(109)
    worst = 0.0
    for _ in range(500):
        depth = int(rng.integers(1, 6))
        dims = tuple(int(d) for d in rng.integers(2, 17, size=depth + 1))
        weights = init_weights(NetworkConfig(dims), rng)
        kind = "square" if rng.random() < 0.5 else "xent"
        n = int(rng.integers(1, 9))
        x = rng.standard_normal((n, dims[0]))
        y = rng.standard_normal((n, dims[-1])) if kind == "square" else rng.dirichlet(np.ones(dims[-1]), n)
        data = normalize_dataset(Dataset(x, y)) if kind == "square" else Dataset(x, y)
        dw = [float(rng.uniform(0.01, 0.5)) * rng.standard_normal(w.shape) / math.sqrt(w.shape[1]) for w in weights]
        worst = max(worst, abs(decompose_linearisation_error(weights, dw, data, kind).residual))
    linear_terms = []
    for _ in range(100):
        dims = tuple(int(d) for d in rng.integers(1, 17, size=2))
        weights = init_weights(NetworkConfig(dims), rng)
        data = Dataset(rng.standard_normal((5, dims[0])), rng.standard_normal((5, dims[1])))
        dw = [rng.standard_normal(weights[0].shape)]
        linear_terms.append(decompose_linearisation_error(weights, dw, data, "square").model_error_term)
    ok = worst <= 1e-8 and all(t == 0.0 for t in linear_terms)
    record_criterion(9, ok, f"max residual {worst:.2e} over 500 instances, linear model terms all zero: {ok}")
    assert ok
