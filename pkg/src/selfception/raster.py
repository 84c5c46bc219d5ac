"""Pixel buffers: file I/O, resampling, color conversion and fidelity metrics.

Images are plain numpy arrays of shape ``(height, width, 3)``. Files are
decoded to ``uint8``; resampling and arithmetic return ``float64`` arrays on
the 0-255 scale, and :func:`quantize` brings them back to 8 bits.
"""

from __future__ import annotations

import re
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import DimensionError, EmptyMaskError, FormatError, ImageIOError

__all__ = [
    "as_image",
    "quantize",
    "load_image",
    "save_image",
    "encode_ppm",
    "decode_ppm",
    "resize_bilinear",
    "rotate_image",
    "mean_color",
    "masked_mean_color",
    "mse",
    "rgb_to_lab",
]

# sRGB primaries -> CIE XYZ, D65 white, 2 degree observer
_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])

# whitespace and comments, then one header integer
_PPM_FIELD = re.compile(rb"(?:\s|#[^\n]*\n)+(\d+)")


def as_image(arr) -> np.ndarray:
    """Validate ``arr`` as an (H, W, 3) raster and return it as an array."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a non-empty (H, W, 3) image, got shape {arr.shape}")
    return arr


def quantize(arr) -> np.ndarray:
    """Round to nearest and clamp into ``uint8``."""
    return np.clip(np.rint(np.asarray(arr, dtype=np.float64)), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# file I/O


def encode_ppm(img) -> bytes:
    img = as_image(img)
    if img.dtype != np.uint8:
        img = quantize(img)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def decode_ppm(data: bytes) -> np.ndarray:
    if data[:2] != b"P6":
        raise FormatError("not a binary PPM (P6) stream")
    pos = 2
    values = []
    while len(values) < 3:
        m = _PPM_FIELD.match(data, pos)
        if m is None:
            raise FormatError("malformed PPM header")
        values.append(int(m.group(1)))
        pos = m.end()
    w, h, maxval = values
    # exactly one whitespace byte separates maxval from the raster
    if not data[pos : pos + 1].isspace():
        raise FormatError("malformed PPM header")
    pos += 1
    if w < 1 or h < 1:
        raise FormatError(f"invalid PPM size {w}x{h}")
    if maxval != 255:
        raise FormatError(f"unsupported PPM maxval {maxval}")
    need = w * h * 3
    if len(data) - pos < need:
        raise FormatError(f"truncated PPM raster: {len(data) - pos} of {need} bytes")
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(h, w, 3).copy()


def load_image(path) -> np.ndarray:
    """Read a PNG or binary PPM file as a ``uint8`` (H, W, 3) array.

    Grayscale inputs are replicated across the three channels and any alpha
    channel is dropped.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if data[:2] == b"P6":
        return decode_ppm(data)
    try:
        with PILImage.open(BytesIO(data)) as im:
            im.load()
            if im.mode not in ("RGB", "L", "LA", "RGBA", "P", "1"):
                raise FormatError(f"{path}: unsupported image mode {im.mode}")
            rgb = im.convert("RGB")
    except FormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: cannot decode image: {exc}") from exc
    return np.array(rgb, dtype=np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` losslessly; the file extension picks PNG or PPM."""
    img = as_image(img)
    if img.dtype != np.uint8:
        img = quantize(img)
    path = Path(path)
    ext = path.suffix.lower()
    if ext == ".ppm":
        payload = encode_ppm(img)
    elif ext == ".png":
        buf = BytesIO()
        PILImage.fromarray(np.ascontiguousarray(img), "RGB").save(buf, format="PNG")
        payload = buf.getvalue()
    else:
        raise FormatError(f"unsupported output extension {ext!r} (use .png or .ppm)")
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


# ---------------------------------------------------------------------------
# resampling


def _bilinear_sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample ``img`` at real coordinates, clamping to the edge pixels.

    Interpolation uses the ``v0 + t * (v1 - v0)`` form so that constant
    neighborhoods are reproduced exactly.
    """
    h, w, _ = img.shape
    sx = np.clip(sx, 0.0, w - 1)
    sy = np.clip(sy, 0.0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = (sx - x0)[..., None]
    ty = (sy - y0)[..., None]
    src = img.astype(np.float64, copy=False)
    p00 = src[y0, x0]
    p01 = src[y0, x1]
    p10 = src[y1, x0]
    p11 = src[y1, x1]
    top = p00 + tx * (p01 - p00)
    bottom = p10 + tx * (p11 - p10)
    return top + ty * (bottom - top)


def resize_bilinear(img, out_w: int, out_h: int) -> np.ndarray:
    """Resize with center-aligned bilinear sampling and edge clamping.

    Output pixel ``d`` reads source coordinate ``(d + 0.5) * in / out - 0.5``.
    Returns a float64 array.
    """
    img = as_image(img)
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"target size must be positive, got {out_w}x{out_h}")
    h, w, _ = img.shape
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    return _bilinear_sample(img, sx[None, :], sy[:, None])


def rotate_image(img, angle: float, out_w: int, out_h: int, fill) -> np.ndarray:
    """Rotate ``img`` by ``angle`` radians into an ``out_w`` x ``out_h`` frame.

    The source center is mapped onto the output center. With y pointing
    down, a positive angle turns the source +x axis toward +y. Output pixels
    whose preimage falls outside the source pixel area take ``fill``.
    """
    img = as_image(img)
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"target size must be positive, got {out_w}x{out_h}")
    if not np.isfinite(angle):
        raise DimensionError(f"rotation angle must be finite, got {angle}")
    h, w, _ = img.shape
    c, s = np.cos(angle), np.sin(angle)
    dx = np.arange(out_w, dtype=np.float64)[None, :] - (out_w - 1) / 2
    dy = np.arange(out_h, dtype=np.float64)[:, None] - (out_h - 1) / 2
    sx = dx * c + dy * s + (w - 1) / 2
    sy = -dx * s + dy * c + (h - 1) / 2
    out = _bilinear_sample(img, sx, sy)
    outside = (sx < -0.5) | (sx > w - 0.5) | (sy < -0.5) | (sy > h - 0.5)
    out[outside] = np.asarray(fill, dtype=np.float64)
    return out


# ---------------------------------------------------------------------------
# statistics


def mean_color(img) -> np.ndarray:
    """Per-channel mean over all pixels, as a float64 array of length 3."""
    img = as_image(img)
    return img.reshape(-1, 3).astype(np.float64).mean(axis=0)


def masked_mean_color(img, mask) -> np.ndarray:
    """Per-channel mean over the pixels where the boolean ``mask`` is set."""
    img = as_image(img)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != img.shape[:2]:
        raise DimensionError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise EmptyMaskError("mask selects no pixels")
    return img[mask].astype(np.float64).sum(axis=0) / n


def mse(a, b) -> float:
    """Mean squared error over every pixel and channel, 0-255 scale."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def rgb_to_lab(img) -> np.ndarray:
    """Convert 8-bit sRGB to CIELAB (D65). Returns an (H, W, 3) float64 array."""
    img = as_image(img)
    rgb = img.astype(np.float64) / 255.0
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = (linear @ _RGB_TO_XYZ.T) / _D65_WHITE
    eps = (6 / 29) ** 3
    f = np.where(xyz > eps, np.cbrt(xyz), xyz / (3 * (6 / 29) ** 2) + 4 / 29)
    lab = np.empty_like(f)
    lab[..., 0] = 116 * f[..., 1] - 16
    lab[..., 1] = 500 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200 * (f[..., 1] - f[..., 2])
    return lab
