"""Bias-free fully-connected relu networks.

A network is described by its widths ``dims = [d_0, ..., d_L]`` and a list
of weight matrices, layer ``k`` having shape ``(d_k, d_{k-1})``. There is
no relu after the last layer.

Inputs may be a single vector of shape ``(d_0,)`` or a batch with one
sample per row, shape ``(N, d_0)``. Batch gradients are means over rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_matrix, sample_semi_orthogonal

__all__ = [
    "NetworkConfig",
    "ForwardCache",
    "init_weights",
    "check_weights",
    "forward",
    "backward",
    "jvp",
    "perturbation_paths",
]


@dataclass(frozen=True)
class NetworkConfig:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ValueError("dims needs at least an input and an output width")
        if any(d < 1 for d in dims):
            raise ValueError(f"all widths must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    def layer_scales(self) -> np.ndarray:
        """``sqrt(d_k / d_{k-1})`` for each layer."""
        d = np.asarray(self.dims, dtype=np.float64)
        return np.sqrt(d[1:] / d[:-1])

    def shapes(self) -> list[tuple[int, int]]:
        return [(self.dims[k + 1], self.dims[k]) for k in range(self.depth)]

    @classmethod
    def from_weights(cls, weights: Sequence[np.ndarray]) -> "NetworkConfig":
        return cls(tuple([weights[0].shape[1]] + [w.shape[0] for w in weights]))


@dataclass
class ForwardCache:
    """Per-layer activations of one forward pass.

    ``activations[0]`` is the input, ``activations[k]`` for ``0 < k < L`` the
    post-relu output of layer ``k`` and ``activations[L]`` the network
    output. ``masks[k-1]`` is the boolean relu mask of hidden layer ``k``.
    All arrays are 2-d with one row per sample.
    """

    activations: list[np.ndarray]
    masks: list[np.ndarray]
    single: bool = False

    @property
    def output(self) -> np.ndarray:
        out = self.activations[-1]
        return out[0] if self.single else out


def init_weights(config: NetworkConfig, seed) -> list[np.ndarray]:
    """Semi-orthogonal layers rescaled to operator norm ``sqrt(d_k/d_{k-1})``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [
        sample_semi_orthogonal(rows, cols, rng) * scale
        for (rows, cols), scale in zip(config.shapes(), config.layer_scales())
    ]


def check_weights(weights: Sequence[np.ndarray]) -> NetworkConfig:
    """Validate that layer shapes chain; returns the implied config."""
    if len(weights) == 0:
        raise ValueError("a network needs at least one layer")
    for k, w in enumerate(weights):
        as_matrix(w)
        if k > 0 and w.shape[1] != weights[k - 1].shape[0]:
            raise ValueError(
                f"layer {k + 1} expects input width {w.shape[1]} "
                f"but layer {k} outputs {weights[k - 1].shape[0]}"
            )
    return NetworkConfig.from_weights(weights)


def _as_batch(x, d0: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d0:
        raise ValueError(f"input has shape {x.shape[-1:]}, network expects width {d0}")
    return x, single


def forward(weights: Sequence[np.ndarray], x) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network, returning the output and the activation cache."""
    h, single = _as_batch(x, weights[0].shape[1])
    activations = [h]
    masks = []
    last = len(weights) - 1
    for k, w in enumerate(weights):
        if w.shape[1] != h.shape[1]:
            raise ValueError(f"layer {k + 1} expects width {w.shape[1]}, got {h.shape[1]}")
        z = h @ w.T
        if k < last:
            mask = z > 0
            h = np.where(mask, z, 0.0)
            masks.append(mask)
        else:
            h = z
        activations.append(h)
    cache = ForwardCache(activations, masks, single)
    return cache.output, cache


def backward(
    weights: Sequence[np.ndarray], cache: ForwardCache, loss_grad
) -> list[np.ndarray]:
    """Gradient of the (batch-mean) loss with respect to every layer.

    ``loss_grad`` is the derivative of the per-sample loss with respect to
    the network output, one row per sample in the cache.
    """
    delta = np.asarray(loss_grad, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    out = cache.activations[-1]
    if delta.shape != out.shape:
        raise ValueError(f"loss gradient has shape {delta.shape}, expected {out.shape}")
    n = delta.shape[0]
    grads = [None] * len(weights)
    for k in range(len(weights) - 1, -1, -1):
        grads[k] = delta.T @ cache.activations[k] / n
        if k > 0:
            delta = (delta @ weights[k]) * cache.masks[k - 1]
    return grads


def jvp(weights: Sequence[np.ndarray], cache: ForwardCache, delta_w) -> np.ndarray:
    """Directional derivative of the output along ``delta_w`` (forward mode)."""
    tangent = np.zeros_like(cache.activations[0])
    last = len(weights) - 1
    for k, (w, dw) in enumerate(zip(weights, delta_w)):
        tangent = cache.activations[k] @ dw.T + tangent @ w.T
        if k < last:
            tangent = tangent * cache.masks[k]
    return tangent[0] if cache.single else tangent


def perturbation_paths(
    weights: Sequence[np.ndarray], delta_w: Sequence[np.ndarray], x
) -> tuple[np.ndarray, np.ndarray]:
    """Output change and model linearisation error for a weight perturbation.

    Returns ``(delta_f, remainder)`` where ``delta_f = f(x; w + dw) - f(x; w)``
    and ``remainder = delta_f - J dw``. The remainder is propagated layer by
    layer rather than formed as a difference of two outputs, so it is exactly
    zero for a single linear layer.
    """
    h, single = _as_batch(x, weights[0].shape[1])
    dh = np.zeros_like(h)  # change of the layer input
    t = np.zeros_like(h)  # tangent of the layer input
    r = np.zeros_like(h)  # dh - t
    last = len(weights) - 1
    for k, (w, dw) in enumerate(zip(weights, delta_w)):
        z = h @ w.T
        dz = dh @ w.T + (h + dh) @ dw.T
        tz = t @ w.T + h @ dw.T
        if k < last:
            mask = z > 0
            new_h = np.where(mask, z, 0.0)
            new_dh = np.maximum(z + dz, 0.0) - new_h
            t = tz * mask
            r = new_dh - t
            h, dh = new_h, new_dh
        else:
            # dz - tz without cancellation: W r + dW dh
            r = r @ w.T + dh @ dw.T
            dh = dz
    if single:
        return dh[0], r[0]
    return dh, r
