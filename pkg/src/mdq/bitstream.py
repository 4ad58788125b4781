"""Description serialization and full decode orchestration.

File layout (all integers little-endian):

    magic "IMDQ" | version u8 | description_id u8 | width u16 | height u16
    channels u8 | levels u8 | context_count u8
    param_step f32 x2 (synthesis, context model)
    param_sigma f32 x2 (synthesis, context model)
    latent_step f32 x levels (finest level first)
    payload_len u32 x (2 + levels): synthesis, context model, then one per
    level in DECODE order (coarsest first)
    payloads in the same order

Parameters are coded with a static zero-mean Laplace table; each latent
level is coded in raster order, every pixel's table predicted from the
causal context of the symbols decoded so far.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import arm, latents, range_coder
from .arm import DEFAULT_CONTEXT, ContextSpec
from .errors import (
    FormatError,
    InconsistentPairError,
    LengthMismatchError,
    TruncatedStreamError,
)
from .param_quant import (
    PARAM_SYMBOL_MAX,
    PARAM_SYMBOL_MIN,
    QuantizedParams,
    arm_dims,
    param_count,
    rebuild_arm,
    rebuild_synthesis,
    synthesis_dims,
)
from .reconstruct import (
    LATENT_SYMBOL_MAX,
    LATENT_SYMBOL_MIN,
    synthesize_central,
    synthesize_pyramid,
)

MAGIC = b"IMDQ"
VERSION = 1

_FIXED = struct.Struct("<4sBBHHBBB")
_PARAM_F32 = struct.Struct("<ffff")


@dataclass
class Header:
    """Decoder configuration carried at the front of each description."""

    description_id: int
    width: int
    height: int
    channels: int
    levels: int
    context_count: int
    theta_step: float
    psi_step: float
    theta_sigma: float
    psi_sigma: float
    latent_steps: list
    theta_len: int
    psi_len: int
    level_lens: list

    def pack(self) -> bytes:
        out = bytearray()
        out += _FIXED.pack(
            MAGIC,
            VERSION,
            self.description_id,
            self.width,
            self.height,
            self.channels,
            self.levels,
            self.context_count,
        )
        out += _PARAM_F32.pack(
            self.theta_step, self.psi_step, self.theta_sigma, self.psi_sigma
        )
        out += struct.pack(f"<{self.levels}f", *self.latent_steps)
        out += struct.pack("<II", self.theta_len, self.psi_len)
        out += struct.pack(f"<{self.levels}I", *self.level_lens)
        return bytes(out)

    @classmethod
    def unpack(cls, data: bytes):
        """Parse a header; returns (header, header_size)."""
        if len(data) < _FIXED.size:
            raise TruncatedStreamError("stream shorter than the fixed header")
        magic, version, desc_id, width, height, channels, levels, ctx = _FIXED.unpack(
            data[: _FIXED.size]
        )
        if magic != MAGIC:
            raise FormatError(f"unrecognized format (magic {magic!r})")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if desc_id not in (1, 2):
            raise FormatError(f"description id must be 1 or 2, got {desc_id}")
        if min(width, height, channels, levels, ctx) < 1:
            raise FormatError("all header counts must be positive")
        pos = _FIXED.size
        need = _PARAM_F32.size + 4 * levels + 8 + 4 * levels
        if len(data) < pos + need:
            raise TruncatedStreamError("stream shorter than the declared header")
        t_step, p_step, t_sigma, p_sigma = _PARAM_F32.unpack(
            data[pos : pos + _PARAM_F32.size]
        )
        pos += _PARAM_F32.size
        latent_steps = list(struct.unpack(f"<{levels}f", data[pos : pos + 4 * levels]))
        pos += 4 * levels
        theta_len, psi_len = struct.unpack("<II", data[pos : pos + 8])
        pos += 8
        level_lens = list(struct.unpack(f"<{levels}I", data[pos : pos + 4 * levels]))
        pos += 4 * levels
        if t_step <= 0 or p_step <= 0 or t_sigma <= 0 or p_sigma <= 0:
            raise FormatError("steps and sigmas must be positive")
        if any(s <= 0 for s in latent_steps):
            raise FormatError("latent steps must be positive")
        header = cls(
            description_id=desc_id,
            width=width,
            height=height,
            channels=channels,
            levels=levels,
            context_count=ctx,
            theta_step=float(t_step),
            psi_step=float(p_step),
            theta_sigma=float(t_sigma),
            psi_sigma=float(p_sigma),
            latent_steps=[float(s) for s in latent_steps],
            theta_len=theta_len,
            psi_len=psi_len,
            level_lens=level_lens,
        )
        return header, pos


@dataclass
class Description:
    """One transmissible unit: header plus coded parameters and latents."""

    header: Header
    theta_payload: bytes
    psi_payload: bytes
    latent_payloads: list  # indexed by level (finest first)

    def to_bytes(self) -> bytes:
        out = bytearray(self.header.pack())
        out += self.theta_payload
        out += self.psi_payload
        for k in reversed(range(self.header.levels)):  # coarsest first on the wire
            out += self.latent_payloads[k]
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Description":
        header, pos = Header.unpack(data)
        declared = header.theta_len + header.psi_len + sum(header.level_lens)
        if len(data) < pos + declared:
            raise TruncatedStreamError(
                f"stream has {len(data)} bytes but declares {pos + declared}"
            )
        if len(data) > pos + declared:
            raise LengthMismatchError(
                f"stream has {len(data)} bytes but declares {pos + declared}"
            )
        theta = data[pos : pos + header.theta_len]
        pos += header.theta_len
        psi = data[pos : pos + header.psi_len]
        pos += header.psi_len
        payloads = [b""] * header.levels
        for k in reversed(range(header.levels)):
            payloads[k] = data[pos : pos + header.level_lens[k]]
            pos += header.level_lens[k]
        return cls(
            header=header, theta_payload=theta, psi_payload=psi, latent_payloads=payloads
        )


def _param_cdf(step: float, sigma: float) -> range_coder.CdfTable:
    b = sigma / (step * np.sqrt(2.0))
    return range_coder.build_cdf(0.0, b, PARAM_SYMBOL_MIN, PARAM_SYMBOL_MAX)


def _encode_level(psi_hat: arm.ArmParams, level: np.ndarray, spec: ContextSpec) -> bytes:
    """Code one quantized grid; contexts are causal, so the encoder can
    predict every pixel from the full grid at once."""
    mu, b = arm.predict_level(psi_hat, level, spec)
    symbols = level.reshape(-1).astype(np.int64)
    enc = range_coder.RangeEncoder()
    for i, s in enumerate(symbols):
        table = range_coder.build_cdf(
            float(mu[i]), float(b[i]), LATENT_SYMBOL_MIN, LATENT_SYMBOL_MAX
        )
        if not table.contains(int(s)):
            raise ValueError(f"latent symbol {s} outside the coder alphabet")
        enc.encode_symbol(int(s), table)
    return enc.finish()


def _decode_level(psi_hat: arm.ArmParams, shape, payload: bytes, spec: ContextSpec) -> np.ndarray:
    h, w = shape
    grid = np.zeros((h, w), dtype=np.float64)
    idx = arm.context_indices((h, w), spec)
    flat = grid.reshape(-1)
    dec = range_coder.RangeDecoder(payload)
    for p in range(h * w):
        row_idx = idx[p]
        ctx = flat[np.maximum(row_idx, 0)].copy()
        ctx[row_idx < 0] = 0.0
        mu, b = arm.predict(psi_hat, ctx)
        table = range_coder.build_cdf(mu, b, LATENT_SYMBOL_MIN, LATENT_SYMBOL_MAX)
        flat[p] = dec.decode(table)
    return grid


def write_description(qparams: QuantizedParams, pyramid: latents.LatentPyramid, channels: int, spec: ContextSpec = DEFAULT_CONTEXT) -> Description:
    """Serialize one description from quantized parameters and latents.

    The pyramid must already be quantized and clamped to the coder
    alphabet; its description_id selects which context model travels.
    """
    j = pyramid.description_id
    psi_symbols = qparams.psi1_symbols if j == 1 else qparams.psi2_symbols
    psi_step = qparams.psi1_step if j == 1 else qparams.psi2_step
    psi_sigma = qparams.psi1_sigma if j == 1 else qparams.psi2_sigma

    for group, name in ((qparams.theta_symbols, "synthesis"), (psi_symbols, "context")):
        if group.min() < PARAM_SYMBOL_MIN or group.max() > PARAM_SYMBOL_MAX:
            raise ValueError(f"{name} symbols outside the parameter alphabet")
    for lv in pyramid.levels:
        if not np.array_equal(lv, np.round(lv)):
            raise ValueError("pyramid must be quantized before serialization")
        if lv.min() < LATENT_SYMBOL_MIN or lv.max() > LATENT_SYMBOL_MAX:
            raise ValueError("latent symbols outside the coder alphabet")

    h, w = pyramid.levels[0].shape
    n = pyramid.num_levels
    psi_hat = rebuild_arm(psi_symbols * psi_step, spec.size)

    theta_cdf = _param_cdf(qparams.theta_step, qparams.theta_sigma)
    theta_payload = range_coder.encode_symbols(
        [int(s) for s in qparams.theta_symbols], range_coder.static_provider(theta_cdf)
    )
    psi_cdf = _param_cdf(psi_step, psi_sigma)
    psi_payload = range_coder.encode_symbols(
        [int(s) for s in psi_symbols], range_coder.static_provider(psi_cdf)
    )
    latent_payloads = [
        _encode_level(psi_hat, np.asarray(lv, dtype=np.float64), spec)
        for lv in pyramid.levels
    ]

    expected = param_count(synthesis_dims(n, channels))
    if qparams.theta_symbols.size != expected:
        raise ValueError(
            f"synthesis group has {qparams.theta_symbols.size} symbols, "
            f"expected {expected} for {n} levels and {channels} channels"
        )
    header = Header(
        description_id=j,
        width=w,
        height=h,
        channels=channels,
        levels=n,
        context_count=spec.size,
        theta_step=qparams.theta_step,
        psi_step=psi_step,
        theta_sigma=qparams.theta_sigma,
        psi_sigma=psi_sigma,
        latent_steps=[float(np.float32(s)) for s in pyramid.steps],
        theta_len=len(theta_payload),
        psi_len=len(psi_payload),
        level_lens=[len(p) for p in latent_payloads],
    )
    return Description(
        header=header,
        theta_payload=theta_payload,
        psi_payload=psi_payload,
        latent_payloads=latent_payloads,
    )


def _decode_parts(desc: Description, spec: ContextSpec):
    """Recover (synthesis params, context params, pyramid) from a description."""
    h = desc.header
    if h.context_count != spec.size:
        raise FormatError(
            f"stream uses {h.context_count} context pixels, decoder supports {spec.size}"
        )
    theta_count = param_count(synthesis_dims(h.levels, h.channels))
    psi_count = param_count(arm_dims(h.context_count))

    theta_cdf = _param_cdf(h.theta_step, h.theta_sigma)
    theta_symbols = np.array(
        range_coder.decode_symbols(
            desc.theta_payload, theta_count, range_coder.static_provider(theta_cdf)
        ),
        dtype=np.int64,
    )
    psi_cdf = _param_cdf(h.psi_step, h.psi_sigma)
    psi_symbols = np.array(
        range_coder.decode_symbols(
            desc.psi_payload, psi_count, range_coder.static_provider(psi_cdf)
        ),
        dtype=np.int64,
    )
    theta_hat = rebuild_synthesis(theta_symbols * h.theta_step, h.levels, h.channels)
    psi_hat = rebuild_arm(psi_symbols * h.psi_step, h.context_count)

    shapes = latents.level_shapes(h.height, h.width, h.levels)
    levels = [None] * h.levels
    for k in reversed(range(h.levels)):  # decode order: coarsest first
        levels[k] = _decode_level(psi_hat, shapes[k], desc.latent_payloads[k], spec)
    pyramid = latents.LatentPyramid(
        levels=levels, steps=list(h.latent_steps), description_id=h.description_id
    )
    return theta_hat, psi_hat, theta_symbols, psi_symbols, pyramid


def read_description(data: bytes, spec: ContextSpec = DEFAULT_CONTEXT):
    """Parse and fully decode one description.

    Returns (QuantizedParams, LatentPyramid, Header); the context-model
    slot of the absent description is None.
    """
    desc = Description.from_bytes(data)
    h = desc.header
    _, _, theta_symbols, psi_symbols, pyramid = _decode_parts(desc, spec)
    first = h.description_id == 1
    qparams = QuantizedParams(
        theta_symbols=theta_symbols,
        psi1_symbols=psi_symbols if first else None,
        psi2_symbols=None if first else psi_symbols,
        theta_step=h.theta_step,
        psi1_step=h.psi_step if first else 0.0,
        psi2_step=0.0 if first else h.psi_step,
        theta_sigma=h.theta_sigma,
        psi1_sigma=h.psi_sigma if first else 0.0,
        psi2_sigma=0.0 if first else h.psi_sigma,
    )
    return qparams, pyramid, h


def decode_image(received, spec: ContextSpec = DEFAULT_CONTEXT):
    """Reconstruct from one or two descriptions.

    Returns (image, mode) with mode one of "side1", "side2", "central".
    """
    received = list(received)
    if not 1 <= len(received) <= 2:
        raise ValueError("decoding expects one or two descriptions")
    if len(received) == 1:
        theta_hat, _, _, _, pyramid = _decode_parts(received[0], spec)
        return synthesize_pyramid(theta_hat, pyramid), f"side{pyramid.description_id}"

    a, b = received
    for field in ("width", "height", "channels", "levels"):
        va, vb = getattr(a.header, field), getattr(b.header, field)
        if va != vb:
            raise InconsistentPairError(f"descriptions disagree on {field}: {va} vs {vb}")
    if a.theta_payload != b.theta_payload:
        raise InconsistentPairError("descriptions carry different synthesis parameters")
    if b.header.description_id < a.header.description_id:
        a, b = b, a
    theta_hat, _, _, _, pyr_a = _decode_parts(a, spec)
    _, _, _, _, pyr_b = _decode_parts(b, spec)
    central = latents.interleave(pyr_a, pyr_b)
    return synthesize_central(theta_hat, central), "central"
