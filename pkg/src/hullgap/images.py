"""Binary PGM/PPM export.

Values are clamped to [0, 255] and rounded half-to-even; RGB data is written
channel-interleaved with maxval 255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def to_bytes(values) -> np.ndarray:
    return np.rint(np.clip(np.asarray(values, dtype=np.float64), 0.0, 255.0)).astype(np.uint8)


def encode_pnm(image) -> bytes:
    """Encode an ``h x w`` or ``h x w x 1`` (P5) or ``h x w x 3`` (P6) image."""
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot encode image of shape {img.shape} as PGM/PPM")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + to_bytes(img).tobytes()


def write_pnm(path, image) -> Path:
    path = Path(path)
    path.write_bytes(encode_pnm(image))
    return path


def decode_pnm(buf: bytes) -> np.ndarray:
    """Read back what :func:`encode_pnm` writes (no comments in the header)."""
    parts = buf.split(b"\n", 3)
    magic, dims, maxval, payload = parts
    w, h = (int(v) for v in dims.split())
    if int(maxval) != 255:
        raise ValueError("only maxval 255 is supported")
    data = np.frombuffer(payload, dtype=np.uint8)
    if magic == b"P5":
        return data.reshape(h, w)
    if magic == b"P6":
        return data.reshape(h, w, 3)
    raise ValueError(f"unsupported magic {magic!r}")
