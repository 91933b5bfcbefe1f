import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agdlab.linalg import (
    OperatorNormError,
    euclidean_norm,
    frobenius_norm,
    infinity_norm,
    manhattan_norm,
    operator_norm,
    outer_product,
    sample_semi_orthogonal,
    stable_rank,
)
from oracles import (
    compensated_euclidean,
    jacobi_singular_values,
    loop_abs_max,
    loop_abs_sum,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def matrices(max_side=8):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


def test_vector_norm_examples():
    assert manhattan_norm([1, -2, 3]) == 6
    assert manhattan_norm(np.zeros(5)) == 0
    assert euclidean_norm([3, 4]) == 5
    for n in (1, 4, 9):
        assert euclidean_norm(np.eye(n)[n - 1]) == 1
    assert infinity_norm([1, -7, 2]) == 7
    assert infinity_norm(np.zeros(3)) == 0


def test_vector_norms_match_loop_oracles():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.standard_normal(rng.integers(1, 40)) * 10
        assert manhattan_norm(v) == pytest.approx(loop_abs_sum(v), rel=1e-15)
        assert infinity_norm(v) == loop_abs_max(v)
        assert euclidean_norm(v) == pytest.approx(compensated_euclidean(v), rel=1e-12)


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        euclidean_norm([1.0, np.nan])
    with pytest.raises(ValueError):
        frobenius_norm([[np.inf]])


def test_frobenius_examples():
    assert frobenius_norm(np.eye(2)) == pytest.approx(np.sqrt(2))
    assert frobenius_norm([[3, 4], [0, 0]]) == 5
    m = np.random.default_rng(0).standard_normal((7, 5))
    sv = jacobi_singular_values(m)
    assert frobenius_norm(m) == pytest.approx(np.sqrt(np.sum(sv**2)), rel=1e-9)


def test_operator_norm_examples():
    assert operator_norm(np.eye(5)) == pytest.approx(1.0, rel=1e-12)
    assert operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-12)
    assert operator_norm(np.zeros((3, 2))) == 0.0
    m = np.random.default_rng(1).standard_normal((6, 4))
    assert operator_norm(m) == pytest.approx(jacobi_singular_values(m)[0], rel=1e-8)


def test_operator_norm_near_degenerate_top():
    # top two singular values differ by 1e-6; plain power iteration stalls
    u, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((20, 20)))
    v, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((20, 20)))
    s = np.linspace(1.0, 0.5, 20)
    s[0] = 1.0 + 1e-6
    m = (u * s) @ v.T
    assert operator_norm(m) == pytest.approx(1.0 + 1e-6, rel=1e-10)


def test_operator_norm_reports_non_convergence():
    m = np.diag([1.0, 0.999999, 0.5])
    with pytest.raises(OperatorNormError) as info:
        operator_norm(m, tol=1e-15, max_iter=3)
    assert info.value.vector.shape == (3,)
    assert info.value.estimate > 0


def test_operator_norm_validates_arguments():
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), tol=0)
    with pytest.raises(ValueError):
        operator_norm(np.eye(2), max_iter=0)


@settings(max_examples=200, deadline=None)
@given(matrices())
def test_norm_sandwich(m):
    op, fro = operator_norm(m), frobenius_norm(m)
    assert op <= fro * (1 + 1e-9) + 1e-12
    assert fro <= np.sqrt(min(m.shape)) * op * (1 + 1e-9) + 1e-12


@settings(max_examples=200, deadline=None)
@given(matrices(), st.data())
def test_operator_norm_bounds_matvec(m, data):
    v = data.draw(arrays(np.float64, m.shape[1], elements=finite))
    assert np.linalg.norm(m @ v) <= operator_norm(m) * np.linalg.norm(v) * (1 + 1e-9) + 1e-9


@settings(max_examples=100, deadline=None)
@given(matrices(6))
def test_operator_norm_matches_jacobi(m):
    assert operator_norm(m) == pytest.approx(jacobi_singular_values(m)[0], rel=1e-8, abs=1e-12)


def test_stable_rank_examples():
    q = sample_semi_orthogonal(7, 4, seed=0)
    assert stable_rank(q) == pytest.approx(4.0, rel=1e-10)
    assert stable_rank(outer_product([1.0, 2.0, -1.0], [0.5, 3.0])) == pytest.approx(1.0, rel=1e-12)
    assert stable_rank(np.diag([2.0, 1.0, 1.0])) == pytest.approx(1.5, rel=1e-12)
    with pytest.raises(ValueError):
        stable_rank(np.zeros((2, 2)))


@settings(max_examples=100, deadline=None)
@given(matrices(), st.floats(1e-3, 1e3))
def test_stable_rank_scale_invariant_and_bounded(m, c):
    if frobenius_norm(m) < 1e-6:
        return
    r = stable_rank(m)
    assert 1 - 1e-9 <= r <= min(m.shape) * (1 + 1e-9)
    assert stable_rank(c * m) == pytest.approx(r, rel=1e-8)


def test_semi_orthogonal_examples():
    one = sample_semi_orthogonal(1, 1, seed=5)
    assert abs(one[0, 0]) == pytest.approx(1.0, abs=1e-15)
    q = sample_semi_orthogonal(4, 4, seed=1)
    np.testing.assert_allclose(q.T @ q, np.eye(4), atol=1e-10)


@pytest.mark.parametrize("rows,cols", [(1, 5), (5, 1), (3, 8), (8, 3), (6, 6)])
def test_semi_orthogonal_singular_values(rows, cols):
    q = sample_semi_orthogonal(rows, cols, seed=rows * 10 + cols)
    np.testing.assert_allclose(jacobi_singular_values(q), 1.0, atol=1e-10)
    small = min(rows, cols)
    gram = q.T @ q if rows >= cols else q @ q.T
    np.testing.assert_allclose(gram, np.eye(small), atol=1e-10)


def test_semi_orthogonal_deterministic():
    np.testing.assert_array_equal(sample_semi_orthogonal(5, 3, 9), sample_semi_orthogonal(5, 3, 9))


def test_semi_orthogonal_haar_moments():
    # Monte-Carlo check of uniformity: the column inner products are exactly
    # zero, so we look at entrywise products across a column pair, plus the
    # first two moments of individual entries (mean 0, variance 1/rows).
    rng = np.random.default_rng(11)
    samples = np.array([sample_semi_orthogonal(8, 3, rng) for _ in range(10000)])
    np.testing.assert_allclose(np.einsum("nip,niq->npq", samples, samples), np.broadcast_to(np.eye(3), (10000, 3, 3)), atol=1e-10)
    for p, q in [(0, 1), (0, 2), (1, 2)]:
        prod = samples[:, :, p] * samples[:, :, q]
        se = prod.std(axis=0, ddof=1) / np.sqrt(len(prod))
        assert np.all(np.abs(prod.mean(axis=0)) < 4 * se)
    entries = samples.reshape(len(samples), -1)
    se = entries.std(axis=0, ddof=1) / np.sqrt(len(entries))
    assert np.all(np.abs(entries.mean(axis=0)) < 4 * se)
    np.testing.assert_allclose(entries.var(axis=0), 1 / 8, rtol=0.1)


def test_outer_product():
    np.testing.assert_array_equal(outer_product([1, 0], [0, 1]), [[0, 1], [0, 0]])
    rng = np.random.default_rng(4)
    for _ in range(20):
        u, v = rng.standard_normal(rng.integers(1, 9)), rng.standard_normal(rng.integers(1, 9))
        p = outer_product(u, v)
        assert frobenius_norm(p) == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12)
        assert operator_norm(p) == pytest.approx(frobenius_norm(p), rel=1e-8)
