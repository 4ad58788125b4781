"""HTTP facade over the codec: encode, decode and metrics endpoints.

The service wraps the same library entry points the CLI uses. Encoding
overfits a model per request and can take minutes for large images;
clients should size timeouts accordingly.
"""

from __future__ import annotations

import base64
import binascii
import io
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import codec, imageio, metrics
from ..training import DEFAULT_LAMBDA, TrainConfig
from .schemas import (
    DecodeRequest,
    DecodeResponse,
    EncodeRequest,
    EncodeResponse,
    HealthResponse,
    MetricsRequest,
    MetricsResponse,
    ScenarioReport,
)

app = FastAPI(title="mdq codec service", version="0.1.0")


def _b64_bytes(field: str, value: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"{field}: invalid base64") from exc


def _decode_image_field(field: str, value: str) -> np.ndarray:
    data = _b64_bytes(field, value)
    try:
        if data[:2] in (b"P5", b"P6"):
            return imageio.load_ppm_bytes(data)
        with tempfile.NamedTemporaryFile(suffix=".png") as tmp:
            tmp.write(data)
            tmp.flush()
            return imageio.load_image(tmp.name)
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"{field}: {exc}") from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=app.version)


@app.post("/encode", response_model=EncodeResponse)
def encode(request: EncodeRequest) -> EncodeResponse:
    image = _decode_image_field("image_b64", request.image_b64)
    try:
        cfg = TrainConfig(
            alpha=request.alpha,
            lambda1=request.lambda1 if request.lambda1 is not None else DEFAULT_LAMBDA,
            lambda2=request.lambda2 if request.lambda2 is not None else DEFAULT_LAMBDA,
            iterations=request.iterations,
            levels=request.levels,
            lr=request.lr,
            seed=request.seed,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    try:
        result = codec.encode_image(image, cfg)
    except (ValueError, RuntimeError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return EncodeResponse(
        description1_b64=base64.b64encode(result.description1).decode(),
        description2_b64=base64.b64encode(result.description2).decode(),
        reports=[ScenarioReport(**r.__dict__) for r in result.reports],
    )


@app.post("/decode", response_model=DecodeResponse)
def decode(request: DecodeRequest) -> DecodeResponse:
    streams = [
        _b64_bytes(f"descriptions_b64[{i}]", s)
        for i, s in enumerate(request.descriptions_b64)
    ]
    try:
        image, mode, bpp = codec.decode_bytes(streams)
    except Exception as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    if request.format == "ppm":
        payload = imageio.save_ppm_bytes(image)
    else:
        from PIL import Image

        arr = imageio.to_uint8(image)
        if arr.shape[2] == 1:
            arr = arr[:, :, 0]
        buf = io.BytesIO()
        Image.fromarray(arr).save(buf, format="PNG")
        payload = buf.getvalue()
    return DecodeResponse(
        image_b64=base64.b64encode(payload).decode(), mode=mode, bpp=bpp
    )


@app.post("/metrics", response_model=MetricsResponse)
def measure(request: MetricsRequest) -> MetricsResponse:
    ref = _decode_image_field("ref_b64", request.ref_b64)
    test = _decode_image_field("test_b64", request.test_b64)
    try:
        return MetricsResponse(
            psnr_db=metrics.psnr(ref, test), ms_ssim=metrics.ms_ssim(ref, test)
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
