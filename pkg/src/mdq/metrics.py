"""PSNR and multi-scale SSIM on unit-range images.

MS-SSIM follows the standard 5-scale recipe: 11x11 Gaussian window with
sigma 1.5, scale weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333),
stability constants K1 = 0.01 and K2 = 0.03, dyadic downsampling by 2x2
mean pooling. Images too small for five scales use as many scales as fit
(weights renormalized); channels are scored independently and averaged.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP_DB = 100.0

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ValueError("expected (H, W) or (H, W, C) images")
    return a, b


def psnr(a, b) -> float:
    """10 * log10(1 / MSE) with peak 1.0, capped at 100 dB for identical images."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window():
    half = (_WINDOW_SIZE - 1) / 2.0
    x = np.arange(_WINDOW_SIZE) - half
    g = np.exp(-(x**2) / (2.0 * _WINDOW_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _filter(x):
    return fftconvolve(x, _WINDOW, mode="valid")


def _downsample(x):
    h, w = x.shape
    x = x[: (h // 2) * 2, : (w // 2) * 2]
    return x.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _ssim_parts(x, y):
    c1 = _K1**2
    c2 = _K2**2
    mu_x = _filter(x)
    mu_y = _filter(y)
    sxx = _filter(x * x) - mu_x * mu_x
    syy = _filter(y * y) - mu_y * mu_y
    sxy = _filter(x * y) - mu_x * mu_y
    luminance = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    contrast_structure = (2.0 * sxy + c2) / (sxx + syy + c2)
    # Negative structure terms would make fractional powers undefined.
    lcs = max(float(np.mean(luminance * contrast_structure)), 0.0)
    cs = max(float(np.mean(contrast_structure)), 0.0)
    return lcs, cs


def _ms_ssim_channel(x, y, scales):
    score = 1.0
    for s in range(scales):
        lcs, cs = _ssim_parts(x, y)
        weight = _NORMALIZED_WEIGHTS[scales][s]
        score *= (lcs if s == scales - 1 else cs) ** weight
        if s != scales - 1:
            x = _downsample(x)
            y = _downsample(y)
    return score


_NORMALIZED_WEIGHTS = {
    m: tuple(w / sum(MS_SSIM_WEIGHTS[:m]) for w in MS_SSIM_WEIGHTS[:m])
    for m in range(1, 6)
}


def ms_ssim(a, b) -> float:
    """Multi-scale SSIM in [0, 1]; 1.0 exactly for identical images."""
    a, b = _check_pair(a, b)
    min_dim = min(a.shape[0], a.shape[1])
    scales = 0
    while (
        scales < len(MS_SSIM_WEIGHTS) and (min_dim >> scales) >= _WINDOW_SIZE
    ):
        scales += 1
    if scales == 0:
        raise ValueError(
            f"images must be at least {_WINDOW_SIZE}x{_WINDOW_SIZE}, got {a.shape}"
        )
    per_channel = [
        _ms_ssim_channel(a[:, :, c], b[:, :, c], scales) for c in range(a.shape[2])
    ]
    return float(np.mean(per_channel))
