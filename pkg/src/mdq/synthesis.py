"""Bicubic plane upsampling and the shared per-pixel synthesis MLP.

Upsampling uses the Catmull-Rom kernel (a = -0.5) with half-pixel-aligned
sampling and clamp-to-edge borders. Because the map is linear, each level
is an (out x src) matrix applied along rows then columns; the same
matrices serve inference and training (the backward pass is the transpose
map).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

HIDDEN_WIDTH = 12
KERNEL_A = -0.5


def _catmull_rom(t: float) -> float:
    t = abs(t)
    if t <= 1.0:
        return (KERNEL_A + 2.0) * t**3 - (KERNEL_A + 3.0) * t**2 + 1.0
    if t < 2.0:
        return KERNEL_A * (t**3 - 5.0 * t**2 + 8.0 * t - 4.0)
    return 0.0


@lru_cache(maxsize=None)
def upsample_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) interpolation matrix; identity when src == dst."""
    if src <= 0:
        raise ValueError("cannot upsample an empty grid")
    if dst < src:
        raise ValueError(f"target size {dst} smaller than source {src}")
    m = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for r in range(dst):
        s = (r + 0.5) * scale - 0.5
        base = int(np.floor(s))
        frac = s - base
        for d, dist in ((-1, 1.0 + frac), (0, frac), (1, 1.0 - frac), (2, 2.0 - frac)):
            j = min(max(base + d, 0), src - 1)
            m[r, j] += _catmull_rom(dist)
    return m


def upsample_bicubic(level: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Upsample a 2-D grid to (target_h, target_w)."""
    level = np.asarray(level, dtype=np.float64)
    if level.ndim != 2 or level.size == 0:
        raise ValueError("expected a non-empty 2-D grid")
    src_h, src_w = level.shape
    return upsample_matrix(src_h, target_h) @ level @ upsample_matrix(src_w, target_w).T


@dataclass
class UpsampledStack:
    """Full-resolution latent planes, one per hierarchy level."""

    planes: list

    def __post_init__(self):
        shape = self.planes[0].shape
        if any(p.shape != shape for p in self.planes):
            raise ValueError("all planes must share the target resolution")

    @property
    def num_planes(self) -> int:
        return len(self.planes)


def mlp_forward(weights, biases, x: np.ndarray) -> np.ndarray:
    """Plain forward pass: ReLU between hidden layers, linear output."""
    h = x
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    return h @ weights[-1] + biases[-1]


@dataclass
class SynthesisParams:
    """Weights of the shared synthesis MLP: num_latents -> 12 -> 12 -> channels."""

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("synthesis MLP has exactly two hidden layers")
        for w in self.weights[:-1]:
            if w.shape[1] != HIDDEN_WIDTH:
                raise ValueError(f"hidden layers must have {HIDDEN_WIDTH} units")
        if self.weights[1].shape[0] != HIDDEN_WIDTH:
            raise ValueError(f"hidden layers must have {HIDDEN_WIDTH} units")

    @property
    def num_latents(self) -> int:
        return self.weights[0].shape[0]

    @property
    def channels(self) -> int:
        return self.weights[-1].shape[1]

    @classmethod
    def init_random(cls, num_latents: int, channels: int, rng) -> "SynthesisParams":
        return cls(*_init_mlp(rng, (num_latents, HIDDEN_WIDTH, HIDDEN_WIDTH, channels)))

    def flatten(self) -> np.ndarray:
        return flatten_params(self.weights, self.biases)


def _init_mlp(rng, dims):
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return weights, biases


def flatten_params(weights, biases) -> np.ndarray:
    """Layer order, weight then bias, row-major. Normative for serialization."""
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in zip(weights, biases)])


def unflatten_params(flat: np.ndarray, dims):
    """Inverse of flatten_params for an MLP with the given layer dims."""
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out).copy())
        pos += fan_in * fan_out
        biases.append(flat[pos : pos + fan_out].copy())
        pos += fan_out
    if pos != flat.size:
        raise ValueError(f"parameter vector has {flat.size} values, expected {pos}")
    return weights, biases


def synth_forward(params: SynthesisParams, stack: UpsampledStack) -> np.ndarray:
    """Map N upsampled planes to an (H, W, C) image, one MLP eval per pixel."""
    if stack.num_planes != params.num_latents:
        raise ValueError(
            f"stack has {stack.num_planes} planes but the MLP expects {params.num_latents}"
        )
    h, w = stack.planes[0].shape
    x = np.stack([p.reshape(-1) for p in stack.planes], axis=1)
    out = mlp_forward(params.weights, params.biases, x)
    return out.reshape(h, w, params.channels)
