"""Decoder-side reconstruction: quantized latents through the synthesis MLP."""

from __future__ import annotations

import numpy as np

from . import latents, synthesis

# Symbol alphabet for coded latents, fixed by the stream format. Quantized
# latents are clamped into it before rate evaluation and coding so that
# estimated and actual codelengths agree.
LATENT_SYMBOL_MIN = -256
LATENT_SYMBOL_MAX = 255


def clamp_pyramid(p: latents.LatentPyramid) -> latents.LatentPyramid:
    """Clamp quantized symbols into the coder alphabet."""
    return latents.LatentPyramid(
        levels=[np.clip(lv, LATENT_SYMBOL_MIN, LATENT_SYMBOL_MAX) for lv in p.levels],
        steps=list(p.steps),
        description_id=p.description_id,
    )


def _synthesize(theta: synthesis.SynthesisParams, levels, steps) -> np.ndarray:
    h, w = levels[0].shape
    planes = [
        synthesis.upsample_bicubic(np.asarray(lv, dtype=np.float64) * step, h, w)
        for lv, step in zip(levels, steps)
    ]
    return synthesis.synth_forward(theta, synthesis.UpsampledStack(planes))


def synthesize_pyramid(theta: synthesis.SynthesisParams, p: latents.LatentPyramid) -> np.ndarray:
    """Side reconstruction from one description's quantized pyramid."""
    return _synthesize(theta, p.levels, p.steps)


def synthesize_central(theta: synthesis.SynthesisParams, c: latents.CentralLatentSet) -> np.ndarray:
    """Central reconstruction from an interleaved latent set."""
    return _synthesize(theta, c.levels, c.steps)
