"""Image array helpers and PNG persistence.

In-process convention: color images are float32 (H, W, 3) in [0, 1] while
they flow through render/stylize stages, and uint8 (H, W, 3) once they are
dataset pixels. Masks are uint8 (H, W) with values {0, 1}. Depth images are
float32 (H, W) holding -z distance, 0 where empty.

On disk everything is PNG: 8-bit RGB color, 8-bit grayscale masks, 16-bit
grayscale depth quantized against a per-image max-depth scale that travels
in sidecar metadata.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError

DEPTH_QUANT = 65535


def to_float(img: np.ndarray) -> np.ndarray:
    """uint8 [0,255] -> float32 [0,1]; float input passes through as float32."""
    a = np.asarray(img)
    if a.dtype == np.uint8:
        return a.astype(np.float32) / 255.0
    return a.astype(np.float32, copy=False)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """float [0,1] -> uint8 with round-half-away quantization; uint8 passes through."""
    a = np.asarray(img)
    if a.dtype == np.uint8:
        return a
    return (np.clip(a, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatchError(f"{what} differ: {a.shape[:2]} vs {b.shape[:2]}")


def save_color_png(path: str | Path, img: np.ndarray) -> None:
    Image.fromarray(to_uint8(img), mode="RGB").save(str(path), format="PNG")


def load_color_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return np.asarray(im.convert("RGB"))


def save_mask_png(path: str | Path, mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255, mode="L").save(
        str(path), format="PNG"
    )


def load_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return (np.asarray(im.convert("L")) > 127).astype(np.uint8)


def save_depth_png(path: str | Path, depth: np.ndarray) -> float:
    """Write 16-bit depth PNG; returns the max-depth scale for the sidecar."""
    d = np.asarray(depth, dtype=np.float64)
    scale = float(d.max())
    if scale <= 0:
        q = np.zeros(d.shape, dtype=np.uint16)
        scale = 0.0
    else:
        q = np.round(np.clip(d / scale, 0.0, 1.0) * DEPTH_QUANT).astype(np.uint16)
    Image.fromarray(q).save(str(path), format="PNG")  # mode I;16
    return scale


def load_depth_png(path: str | Path, scale: float) -> np.ndarray:
    with Image.open(str(path)) as im:
        q = np.asarray(im, dtype=np.float32)
    if scale <= 0:
        return np.zeros(q.shape, dtype=np.float32)
    return q / DEPTH_QUANT * np.float32(scale)


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Downscale path (dataset image -> tile). Operates on uint8, returns uint8."""
    im = Image.fromarray(to_uint8(img), mode="RGB")
    return np.asarray(im.resize((width, height), Image.BILINEAR))


def resize_bicubic(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Upscale path (edited tile -> dataset resolution). uint8 in, uint8 out."""
    im = Image.fromarray(to_uint8(img), mode="RGB")
    return np.asarray(im.resize((width, height), Image.BICUBIC))


def encode_png_bytes(img: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    a = np.asarray(img)
    if a.dtype == np.uint16:
        Image.fromarray(a).save(buf, format="PNG")  # mode I;16
    elif a.ndim == 2:
        Image.fromarray(to_uint8(a), mode="L").save(buf, format="PNG")
    else:
        Image.fromarray(to_uint8(a), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_bytes(data: bytes) -> np.ndarray:
    import io

    with Image.open(io.BytesIO(data)) as im:
        im.load()
        if im.mode in ("I;16", "I"):
            return np.asarray(im, dtype=np.uint16)
        if im.mode == "L":
            return np.asarray(im)
        return np.asarray(im.convert("RGB"))
