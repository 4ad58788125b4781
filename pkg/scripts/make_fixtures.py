#!/usr/bin/env python3
"""Generate the committed test images.

Multi-octave smooth noise with a decaying amplitude spectrum plus a few
hard edges: statistically close enough to photographic content for
rate-distortion exercises, and fully deterministic.
"""

from pathlib import Path

import numpy as np

from mdq.imageio import save_ppm_bytes


def _bilinear_resize(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    gh, gw = grid.shape
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    y0 = np.floor(ys).astype(int).clip(0, gh - 2)
    x0 = np.floor(xs).astype(int).clip(0, gw - 2)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = grid[np.ix_(y0, x0)]
    b = grid[np.ix_(y0, x0 + 1)]
    c = grid[np.ix_(y0 + 1, x0)]
    d = grid[np.ix_(y0 + 1, x0 + 1)]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


def synth_natural(size: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    luma = np.zeros((size, size))
    cell = 4
    octave = 0
    while cell <= size:
        grid = rng.standard_normal((size // cell + 2, size // cell + 2))
        luma += _bilinear_resize(grid, size, size) * (cell / size) ** 0.85
        cell *= 2
        octave += 1
    # a few straight edges for structure
    yy, xx = np.mgrid[0:size, 0:size] / size
    luma += 0.35 * np.tanh((xx - 0.3 * yy - 0.45) * 24.0)
    luma += 0.2 * np.tanh((yy - 0.7) * 30.0)
    luma = (luma - luma.min()) / (luma.max() - luma.min())
    chroma1 = _bilinear_resize(rng.standard_normal((size // 16 + 2, size // 16 + 2)), size, size)
    chroma2 = _bilinear_resize(rng.standard_normal((size // 16 + 2, size // 16 + 2)), size, size)
    img = np.stack(
        [
            luma + 0.08 * chroma1,
            luma,
            luma - 0.06 * chroma1 + 0.07 * chroma2,
        ],
        axis=2,
    )
    return np.clip(0.05 + 0.9 * img, 0.0, 1.0)


def main():
    out_dir = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    for size, seed, name in [
        (128, 2024, "natural_128.ppm"),
        (512, 2025, "natural_512.ppm"),
        (64, 2026, "natural_64.ppm"),
    ]:
        img = synth_natural(size, seed)
        (out_dir / name).write_bytes(save_ppm_bytes(img))
        print(f"wrote {out_dir / name}")


if __name__ == "__main__":
    main()
