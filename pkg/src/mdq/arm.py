"""Causal context model over latent grids.

A small MLP maps the causal neighborhood of each latent symbol to the
location and scale of a Laplace distribution; integrating that density
over the symbol's unit interval gives its coding probability. Levels are
modeled independently (no cross-level conditioning).

The default 12-pixel context covers two full rows above the current
pixel (dx in -2..2) plus the two pixels to its left:

        . . c c c c c
        . . c c c c c
        . . c c X

Out-of-bounds positions contribute 0. This layout is normative for the
bitstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _dist
from .synthesis import HIDDEN_WIDTH, _init_mlp, flatten_params

P_MIN = 2.0**-16
B_MIN = 1e-3
B_MAX = 1e3
LOG_B_MIN = float(np.log(B_MIN))
LOG_B_MAX = float(np.log(B_MAX))

_DEFAULT_OFFSETS = tuple(
    [(-2, dx) for dx in range(-2, 3)]
    + [(-1, dx) for dx in range(-2, 3)]
    + [(0, -2), (0, -1)]
)


@dataclass(frozen=True)
class ContextSpec:
    """Ordered causal offsets (dy, dx) gathered ahead of each pixel."""

    offsets: tuple = _DEFAULT_OFFSETS

    def __post_init__(self):
        for dy, dx in self.offsets:
            if dy > 0 or (dy == 0 and dx >= 0):
                raise ValueError(f"offset ({dy}, {dx}) is not causal in raster order")

    @property
    def size(self) -> int:
        return len(self.offsets)


DEFAULT_CONTEXT = ContextSpec()


@dataclass
class ArmParams:
    """Context-model MLP: context_size -> 12 -> 12 -> (mu, raw scale)."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("context MLP has exactly two hidden layers")
        if self.weights[-1].shape[1] != 2:
            raise ValueError("context MLP must output exactly (mu, raw scale)")

    @property
    def context_size(self) -> int:
        return self.weights[0].shape[0]

    @classmethod
    def init_random(cls, context_size: int, rng) -> "ArmParams":
        return cls(*_init_mlp(rng, (context_size, HIDDEN_WIDTH, HIDDEN_WIDTH, 2)))

    def flatten(self) -> np.ndarray:
        return flatten_params(self.weights, self.biases)


@lru_cache(maxsize=None)
def _context_indices(shape, offsets) -> np.ndarray:
    """(H*W, C) flat source indices in raster order; -1 marks out-of-bounds."""
    h, w = shape
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    rows = rows.reshape(-1, 1)
    cols = cols.reshape(-1, 1)
    dy = np.array([o[0] for o in offsets])
    dx = np.array([o[1] for o in offsets])
    src_r = rows + dy
    src_c = cols + dx
    inside = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    return np.where(inside, src_r * w + src_c, -1)


def context_indices(shape, spec: ContextSpec = DEFAULT_CONTEXT) -> np.ndarray:
    return _context_indices(tuple(shape), spec.offsets)


def extract_context(level: np.ndarray, row: int, col: int, spec: ContextSpec = DEFAULT_CONTEXT) -> np.ndarray:
    """Causal neighborhood of (row, col); out-of-bounds entries are 0."""
    h, w = level.shape
    if not (0 <= row < h and 0 <= col < w):
        raise ValueError(f"position ({row}, {col}) outside a {h}x{w} grid")
    idx = context_indices(level.shape, spec)[row * w + col]
    vals = level.reshape(-1)[np.maximum(idx, 0)].astype(np.float64)
    vals[idx < 0] = 0.0
    return vals


def context_matrix(level: np.ndarray, spec: ContextSpec = DEFAULT_CONTEXT) -> np.ndarray:
    """All contexts of a grid at once, raster order, shape (H*W, C)."""
    idx = context_indices(level.shape, spec)
    flat = level.reshape(-1)
    vals = flat[np.maximum(idx, 0)].astype(np.float64)
    vals[idx < 0] = 0.0
    return vals


def laplace_prob(symbol, mu, b):
    """Probability of a quantized symbol under Laplace(mu, b), floored at 2^-16."""
    if np.any(np.asarray(b) <= 0):
        raise ValueError("Laplace scale must be positive")
    return np.clip(_dist.interval_prob(symbol, mu, b), P_MIN, 1.0)


def _predict_raw(params: ArmParams, contexts: np.ndarray):
    h = contexts
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    out = h @ params.weights[-1] + params.biases[-1]
    mu = out[..., 0]
    b = np.exp(np.clip(out[..., 1], LOG_B_MIN, LOG_B_MAX))
    return mu, b


def predict(params: ArmParams, context: np.ndarray):
    """(mu, b) for one context vector; b = exp(raw) clamped to [1e-3, 1e3]."""
    context = np.asarray(context, dtype=np.float64)
    if context.shape != (params.context_size,):
        raise ValueError(
            f"context has length {context.shape}, expected ({params.context_size},)"
        )
    mu, b = _predict_raw(params, context[None, :])
    return float(mu[0]), float(b[0])


def predict_level(params: ArmParams, level: np.ndarray, spec: ContextSpec = DEFAULT_CONTEXT):
    """Vectorized (mu, b) for every pixel of a grid, raster order."""
    return _predict_raw(params, context_matrix(level, spec))


def beta_weight(level_shape, k: int) -> float:
    """Rate weight of level k: (W_k * H_k) / 2^(2k)."""
    hk, wk = level_shape
    return (wk * hk) / float(1 << (2 * k))


def level_rate(params: ArmParams, level: np.ndarray, spec: ContextSpec = DEFAULT_CONTEXT) -> float:
    """Codelength estimate of one quantized grid, in bits."""
    if not np.array_equal(level, np.round(level)):
        raise ValueError("rate evaluation expects integer symbols")
    mu, b = predict_level(params, level, spec)
    p = np.clip(_dist.interval_prob(level.reshape(-1), mu, b), P_MIN, 1.0)
    return float(-np.sum(np.log2(p)))


def rate_pyramid(params: ArmParams, pyramid, spec: ContextSpec = DEFAULT_CONTEXT, weighted: bool = False) -> float:
    """Total bits of a quantized pyramid; weighted applies the per-level beta."""
    total = 0.0
    for k, level in enumerate(pyramid.levels):
        bits = level_rate(params, np.asarray(level, dtype=np.float64), spec)
        total += beta_weight(level.shape, k) * bits if weighted else bits
    return total
