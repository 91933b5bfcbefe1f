"""Dense linear algebra helpers.

Vectors and matrices are plain float64 numpy arrays. The functions here
validate shape and finiteness, then compute norms, the operator norm by
power iteration, stable rank and Haar-distributed semi-orthogonal samples.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "OperatorNormError",
    "as_vector",
    "as_matrix",
    "manhattan_norm",
    "euclidean_norm",
    "infinity_norm",
    "frobenius_norm",
    "operator_norm",
    "stable_rank",
    "sample_semi_orthogonal",
    "outer_product",
]


class OperatorNormError(RuntimeError):
    """Power iteration failed to reach the requested tolerance.

    Attributes
    ----------
    estimate : float
        Last operator norm estimate.
    vector : ndarray
        Last right singular vector iterate.
    residual : float
        Relative change of the estimate over the final iteration.
    """

    def __init__(self, estimate: float, vector: np.ndarray, residual: float):
        super().__init__(
            f"power iteration did not converge: estimate={estimate!r}, "
            f"relative change={residual:.3e}"
        )
        self.estimate = estimate
        self.vector = vector
        self.residual = residual


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def manhattan_norm(v) -> float:
    return float(np.sum(np.abs(as_vector(v))))


def euclidean_norm(v) -> float:
    return float(np.linalg.norm(as_vector(v)))


def infinity_norm(v) -> float:
    return float(np.max(np.abs(as_vector(v))))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(as_matrix(m)))


def operator_norm(m, tol: float = 1e-10, max_iter: int = 1000) -> float:
    """Largest singular value of ``m`` by power iteration.

    Iterates on the Gram matrix of the smaller side, starting from a fixed
    seeded vector. Whenever 50 iterations pass without convergence the
    iteration matrix is squared, which raises the spectral gap ratio to
    the next power of two and keeps near-degenerate tops from stalling.
    The returned value is the Rayleigh quotient on the unsquared Gram.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
    tol : float
        Relative change of the estimate between iterations at which to stop.
    max_iter : int
        Iteration budget.

    Raises
    ------
    OperatorNormError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    m = as_matrix(m)
    gram = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    scale = float(np.max(np.abs(gram)))
    if scale == 0.0:
        return 0.0
    gram = gram / scale

    rng = np.random.default_rng(0)
    x = rng.standard_normal(gram.shape[0])
    x /= np.linalg.norm(x)
    it_mat = gram
    estimate = float(x @ gram @ x)
    change = np.inf
    stale = 0
    for _ in range(max_iter):
        y = it_mat @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # start vector orthogonal to the range of a squared-to-zero matrix
            x = rng.standard_normal(gram.shape[0])
            x /= np.linalg.norm(x)
            it_mat = gram
            continue
        x = y / ny
        new = float(x @ gram @ x)
        change = abs(new - estimate) / max(new, np.finfo(float).tiny)
        estimate = new
        if change <= tol:
            # one confirming step guards against a coincidental plateau
            z = gram @ x
            z /= np.linalg.norm(z)
            confirm = float(z @ gram @ z)
            if abs(confirm - estimate) <= tol * confirm:
                return float(np.sqrt(max(confirm, estimate) * scale))
        stale += 1
        if stale == 50:
            it_mat = it_mat @ it_mat
            it_mat /= np.max(np.abs(it_mat))
            stale = 0
    raise OperatorNormError(float(np.sqrt(max(estimate, 0.0) * scale)), x, change)


def stable_rank(m) -> float:
    """Squared Frobenius norm over squared operator norm."""
    m = as_matrix(m)
    fro = frobenius_norm(m)
    if fro == 0.0:
        raise ValueError("stable rank of the zero matrix is undefined")
    op = operator_norm(m)
    return fro**2 / op**2


def sample_semi_orthogonal(rows: int, cols: int, seed) -> np.ndarray:
    """Haar-uniform matrix with all singular values equal to one.

    A Gaussian matrix is QR-factorised along its shorter dimension and the
    columns of Q are multiplied by the signs of R's diagonal, which makes
    the distribution exactly uniform. ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tall = rows >= cols
    shape = (rows, cols) if tall else (cols, rows)
    gauss = rng.standard_normal(shape)
    q, r = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    return q if tall else q.T


def outer_product(u, v) -> np.ndarray:
    return np.outer(as_vector(u), as_vector(v))
