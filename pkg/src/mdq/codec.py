"""End-to-end encode pipeline and shared evaluation helpers.

An encode overfits the model, searches parameter quantization steps,
serializes both descriptions, and measures every scenario. Reported PSNR
and MS-SSIM are computed on the 8-bit export of each reconstruction, so
decoding a written file and measuring it reproduces the encoder's
numbers exactly; bpp is file bytes * 8 / (W * H), with the central
scenario counting both files.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import bitstream, latents, metrics, param_quant, training
from .imageio import export_domain
from .reconstruct import clamp_pyramid, synthesize_central, synthesize_pyramid
from .reports import RdReport


@dataclass
class EncodeResult:
    description1: bytes
    description2: bytes
    model: training.TrainedModel
    qparams: param_quant.QuantizedParams
    reports: list
    reconstructions: dict


def encode_image(image: np.ndarray, cfg: training.TrainConfig) -> EncodeResult:
    """Full encode of one image; deterministic for a fixed config."""
    start = time.perf_counter()
    model = training.train(image, cfg)
    qparams = param_quant.search_steps(model, image, cfg)
    p1 = clamp_pyramid(latents.quantize_pyramid(model.y1))
    p2 = clamp_pyramid(latents.quantize_pyramid(model.y2))
    channels = image.shape[2]
    data1 = bitstream.write_description(qparams, p1, channels).to_bytes()
    data2 = bitstream.write_description(qparams, p2, channels).to_bytes()

    theta_hat = param_quant.rebuild_synthesis(
        qparams.theta_values(), cfg.levels, channels
    )
    recons = {
        "side1": synthesize_pyramid(theta_hat, p1),
        "side2": synthesize_pyramid(theta_hat, p2),
        "central": synthesize_central(theta_hat, latents.interleave(p1, p2)),
    }
    wall = time.perf_counter() - start

    npix = image.shape[0] * image.shape[1]
    bpp1 = len(data1) * 8.0 / npix
    bpp2 = len(data2) * 8.0 / npix
    bpps = {"side1": bpp1, "side2": bpp2, "central": bpp1 + bpp2}
    reports = [
        RdReport(
            scenario=name,
            bpp=bpps[name],
            psnr_db=metrics.psnr(image, export_domain(recons[name])),
            ms_ssim=metrics.ms_ssim(image, export_domain(recons[name])),
            alpha=cfg.alpha,
            lambda1=cfg.lambda1,
            lambda2=cfg.lambda2,
            wall_time_s=wall,
        )
        for name in ("central", "side1", "side2")
    ]
    return EncodeResult(
        description1=data1,
        description2=data2,
        model=model,
        qparams=qparams,
        reports=reports,
        reconstructions=recons,
    )


def decode_bytes(streams):
    """Decode one or two serialized descriptions; returns (image, mode, bpp)."""
    descs = [bitstream.Description.from_bytes(s) for s in streams]
    image, mode = bitstream.decode_image(descs)
    npix = descs[0].header.width * descs[0].header.height
    bpp = sum(len(s) for s in streams) * 8.0 / npix
    return image, mode, bpp
