"""Request/response models for the HTTP service.

Binary payloads (images and description streams) travel base64-encoded.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class EncodeRequest(BaseModel):
    image_b64: str = Field(description="PPM/PGM/PNG file content, base64")
    alpha: float = 0.1
    lambda1: float | None = None
    lambda2: float | None = None
    iterations: int = 10000
    levels: int = 6
    lr: float = 0.1
    seed: int = 0


class ScenarioReport(BaseModel):
    scenario: Literal["central", "side1", "side2"]
    bpp: float
    psnr_db: float
    ms_ssim: float
    alpha: float
    lambda1: float
    lambda2: float
    wall_time_s: float


class EncodeResponse(BaseModel):
    description1_b64: str
    description2_b64: str
    reports: list[ScenarioReport]


class DecodeRequest(BaseModel):
    descriptions_b64: list[str] = Field(min_length=1, max_length=2)
    format: Literal["png", "ppm"] = "png"


class DecodeResponse(BaseModel):
    image_b64: str
    mode: Literal["central", "side1", "side2"]
    bpp: float


class MetricsRequest(BaseModel):
    ref_b64: str
    test_b64: str


class MetricsResponse(BaseModel):
    psnr_db: float
    ms_ssim: float


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str
