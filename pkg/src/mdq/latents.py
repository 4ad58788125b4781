"""Hierarchical latent pyramids: quantization, noise relaxation, interleaving.

Level k of a pyramid has shape (ceil(H / 2^k), ceil(W / 2^k)). Grids are
stored in units of their quantization step, so optimization, the uniform
noise relaxation and the integer symbols seen by the entropy coder all
share one scale; the per-level step converts back to signal values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def round_half_away(x):
    """Round to nearest integer with ties going away from zero."""
    return np.floor(np.abs(x) + 0.5) * np.sign(x)


def quantize(value, step):
    """Uniform scalar quantizer: step * round(value / step), ties away from 0."""
    if step <= 0:
        raise ValueError(f"quantization step must be positive, got {step}")
    return step * round_half_away(np.asarray(value, dtype=np.float64) / step)


def level_shapes(height: int, width: int, levels: int):
    """Grid shapes for each pyramid level, halving (ceil) per level."""
    return [(-(-height // (1 << k)), -(-width // (1 << k))) for k in range(levels)]


@dataclass
class LatentPyramid:
    """One description's latent hierarchy, finest level first.

    levels: float64 grids in step units; steps: per-level positive reals.
    """

    levels: list
    steps: list
    description_id: int

    def __post_init__(self):
        if self.description_id not in (1, 2):
            raise ValueError(f"description_id must be 1 or 2, got {self.description_id}")
        if len(self.levels) != len(self.steps):
            raise ValueError("one quantization step per level is required")
        if any(s <= 0 for s in self.steps):
            raise ValueError("quantization steps must be positive")
        h0, w0 = self.levels[0].shape
        for k, (hk, wk) in enumerate(level_shapes(h0, w0, len(self.levels))):
            if self.levels[k].shape != (hk, wk):
                raise ValueError(
                    f"level {k} has shape {self.levels[k].shape}, expected {(hk, wk)}"
                )

    @classmethod
    def zeros(cls, height, width, levels, description_id, steps=None):
        shapes = level_shapes(height, width, levels)
        if steps is None:
            steps = [1.0] * levels
        return cls(
            levels=[np.zeros(s, dtype=np.float64) for s in shapes],
            steps=list(steps),
            description_id=description_id,
        )

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def copy(self) -> "LatentPyramid":
        return LatentPyramid(
            levels=[lv.copy() for lv in self.levels],
            steps=list(self.steps),
            description_id=self.description_id,
        )


@dataclass
class CentralLatentSet:
    """Interleaved latent levels: even levels from one side, odd from the other."""

    levels: list
    provenance: list
    steps: list


def quantize_pyramid(p: LatentPyramid) -> LatentPyramid:
    """Round every grid to integer symbols (idempotent)."""
    return LatentPyramid(
        levels=[round_half_away(lv) for lv in p.levels],
        steps=list(p.steps),
        description_id=p.description_id,
    )


def add_uniform_noise(p: LatentPyramid, rng_seed) -> LatentPyramid:
    """Add independent U[-0.5, 0.5) noise per element, in step units.

    Deterministic for a fixed seed; levels are drawn finest-first.
    """
    rng = np.random.default_rng(rng_seed)
    return LatentPyramid(
        levels=[lv + (rng.random(lv.shape) - 0.5) for lv in p.levels],
        steps=list(p.steps),
        description_id=p.description_id,
    )


def interleave(p1: LatentPyramid, p2: LatentPyramid) -> CentralLatentSet:
    """Build the central latent set: even levels from p1, odd levels from p2."""
    if p1.num_levels != p2.num_levels:
        raise ValueError(
            f"pyramids have different depths: {p1.num_levels} vs {p2.num_levels}"
        )
    levels = []
    provenance = []
    steps = []
    for k in range(p1.num_levels):
        a, b = p1.levels[k], p2.levels[k]
        if a.shape != b.shape:
            raise ValueError(f"level {k} shapes differ: {a.shape} vs {b.shape}")
        for lv in (a, b):
            if not np.array_equal(lv, np.round(lv)):
                raise ValueError("interleave expects quantized pyramids")
        src = p1 if k % 2 == 0 else p2
        levels.append(src.levels[k].astype(np.int64))
        provenance.append(src.description_id)
        steps.append(src.steps[k])
    return CentralLatentSet(levels=levels, provenance=provenance, steps=steps)
