"""8-bit image I/O: binary PPM/PGM (the fixture format) and PNG.

Images travel through the codec as float64 (H, W, C) arrays in [0, 1]
with C of 1 or 3; export clamps to [0, 1] and rounds to 8 bits.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_unit(raw: np.ndarray) -> np.ndarray:
    arr = np.asarray(raw, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def export_domain(image: np.ndarray) -> np.ndarray:
    """Project onto the 8-bit lattice, as written image files will be read."""
    return to_unit(to_uint8(image))


def _read_ppm_token(buf: io.BytesIO) -> bytes:
    token = b""
    while True:
        ch = buf.read(1)
        if not ch:
            raise ValueError("truncated PPM header")
        if ch == b"#":
            buf.readline()
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def load_ppm_bytes(data: bytes) -> np.ndarray:
    buf = io.BytesIO(data)
    magic = _read_ppm_token(buf)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"not a binary PPM/PGM stream (magic {magic!r})")
    width = int(_read_ppm_token(buf))
    height = int(_read_ppm_token(buf))
    maxval = int(_read_ppm_token(buf))
    if maxval != 255:
        raise ValueError(f"only 8-bit PPM supported, got maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    raw = buf.read(width * height * channels)
    if len(raw) != width * height * channels:
        raise ValueError("truncated PPM pixel data")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
    return to_unit(arr)


def save_ppm_bytes(image: np.ndarray) -> bytes:
    arr = to_uint8(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    if c == 1:
        return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()
    if c == 3:
        return b"P6\n%d %d\n255\n" % (w, h) + arr.tobytes()
    raise ValueError(f"cannot write {c}-channel image as PPM")


def load_image(path) -> np.ndarray:
    """Read a PPM/PGM or PNG file into a float (H, W, C) array in [0, 1]."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P5", b"P6"):
        return load_ppm_bytes(data)
    from PIL import Image

    with Image.open(io.BytesIO(data)) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB" if img.mode not in ("1", "I;16") else "L")
        arr = np.asarray(img, dtype=np.uint8)
    return to_unit(arr)


def save_image(path, image: np.ndarray) -> None:
    """Write as PPM/PGM or PNG depending on the file extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in (".ppm", ".pgm"):
        path.write_bytes(save_ppm_bytes(image))
        return
    if suffix == ".png":
        from PIL import Image

        arr = to_uint8(image)
        if arr.shape[2] == 1:
            arr = arr[:, :, 0]
        Image.fromarray(arr).save(path, format="PNG")
        return
    raise ValueError(f"unsupported image extension {suffix!r} (use .ppm, .pgm or .png)")
