"""Self-ception rendering: every region becomes a small, color-shifted copy of
the whole image, clipped to the region's equivalent ellipse.

Tiles can be prepared on a thread pool; canvas writes always happen in
ascending label order, so the result does not depend on ``workers``.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParamError
from .geometry import Ellipse, Rect, ellipse_bbox, ellipse_mask, fit_ellipse, region_stats
from .raster import (
    as_image,
    masked_mean_color,
    mean_color,
    mse,
    quantize,
    resize_bilinear,
    rgb_to_lab,
    rotate_image,
    save_image,
)
from .slic import LabelMap, SlicParams, run_slic

__all__ = [
    "Background",
    "RenderConfig",
    "SelfceptionReport",
    "base_layer",
    "shifted_tile",
    "paint_region",
    "ellipse_mean_color",
    "prepare_tile",
    "render_region",
    "self_ception",
]

# effectively unbounded, used to size a tile before it is clipped to the image
_UNBOUNDED = Rect(-(10**9), -(10**9), 10**9, 10**9)


class Background(str, enum.Enum):
    SEGMENT_MEAN = "segment_mean"
    ORIGINAL = "original"
    BLACK = "black"


@dataclass(frozen=True)
class RenderConfig:
    rotated_tiles: bool = False
    clip_output: bool = True
    background: Background = Background.SEGMENT_MEAN
    emit_frames: Path | None = None
    frame_stride: int = 1
    workers: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "background", Background(self.background))
        except ValueError:
            raise ParamError(f"unknown background mode {self.background!r}") from None
        if self.frame_stride < 1:
            raise ParamError(f"frame stride must be positive, got {self.frame_stride}")
        if self.workers < 1:
            raise ParamError(f"workers must be positive, got {self.workers}")


@dataclass
class SelfceptionReport:
    requested_k: int
    achieved_regions: int
    mse: float
    timings_ms: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    # intermediates for debug dumps, left out of to_dict()
    labels: LabelMap | None = field(default=None, repr=False, compare=False)
    ellipses: list[Ellipse] = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "requested_k": self.requested_k,
            "achieved_regions": self.achieved_regions,
            "mse": self.mse,
            "timings_ms": dict(self.timings_ms),
            "config": dict(self.config),
        }


def base_layer(img, labels, stats, mode) -> np.ndarray:
    """Canvas under the tiles, as float64 on the 0-255 scale."""
    img = as_image(img)
    if isinstance(labels, LabelMap):
        labels = labels.labels
    if labels.shape != img.shape[:2]:
        raise DimensionError(f"label shape {labels.shape} does not match image {img.shape[:2]}")
    mode = Background(mode)
    if mode is Background.ORIGINAL:
        return img.astype(np.float64)
    if mode is Background.BLACK:
        return np.zeros(img.shape, dtype=np.float64)
    table = np.zeros((int(labels.max()) + 1, 3))
    for st in stats:
        table[st.label] = st.mean_color
    return quantize(table)[labels].astype(np.float64)


def shifted_tile(resized, rang, total_mean, clip: bool) -> np.ndarray:
    """Add ``rang - total_mean`` to every pixel, optionally clamping to [0, 255]."""
    shift = np.asarray(rang, dtype=np.float64) - np.asarray(total_mean, dtype=np.float64)
    out = np.asarray(resized, dtype=np.float64) + shift
    if clip:
        np.clip(out, 0.0, 255.0, out=out)
    return out


def paint_region(e: Ellipse, width: int, height: int) -> tuple[Rect, np.ndarray]:
    """Pixels a region paints: its ellipse interior inside the image.

    Returns the clipped bounding box and a mask over it. When no pixel center
    falls inside the ellipse, the mask holds the single pixel nearest the
    center so that every region paints something.
    """
    rect = ellipse_bbox(e, Rect.of_image(width, height))
    mask = ellipse_mask(e, rect)
    if not mask.any():
        px = min(max(math.floor(e.cx + 0.5), rect.x0), rect.x1)
        py = min(max(math.floor(e.cy + 0.5), rect.y0), rect.y1)
        mask[py - rect.y0, px - rect.x0] = True
    return rect, mask


def ellipse_mean_color(img, e: Ellipse) -> np.ndarray:
    """Mean color of ``img`` over the pixels ``e`` paints."""
    img = as_image(img)
    rect, mask = paint_region(e, img.shape[1], img.shape[0])
    return masked_mean_color(img[rect.slices], mask)


def prepare_tile(original, e: Ellipse, rect: Rect, total_mean, rotated: bool) -> np.ndarray:
    """Resized (and optionally rotated) copy of ``original`` covering ``rect``.

    The copy is sized to the ellipse's full bounding box and then cropped to
    ``rect``, so ellipses cut by the image border show a clipped copy rather
    than a squashed one.
    """
    full = ellipse_bbox(e, _UNBOUNDED)
    if rotated:
        frame_w = max(1, math.ceil(2 * e.a))
        frame_h = max(1, math.ceil(2 * e.b))
        small = resize_bilinear(original, frame_w, frame_h)
        # pre-shift fill: after the color shift it lands exactly on rang
        tile = rotate_image(small, e.theta, full.width, full.height, fill=total_mean)
    else:
        tile = resize_bilinear(original, full.width, full.height)
    ys = np.clip(np.arange(rect.y0, rect.y1 + 1) - full.y0, 0, full.height - 1)
    xs = np.clip(np.arange(rect.x0, rect.x1 + 1) - full.x0, 0, full.width - 1)
    return tile[np.ix_(ys, xs)]


def _build(original, e, rang, total_mean, cfg):
    h, w = original.shape[:2]
    rect, mask = paint_region(e, w, h)
    tile = prepare_tile(original, e, rect, total_mean, cfg.rotated_tiles)
    return rect, mask, shifted_tile(tile, rang, total_mean, cfg.clip_output)


def _write(canvas, rect, mask, tile):
    canvas[rect.slices][mask] = tile[mask]


def render_region(canvas, original, e: Ellipse, rang, total_mean, cfg: RenderConfig):
    """Paint one color-shifted copy of ``original`` into ``canvas`` in place.

    Only pixels inside ``e`` are written. Returns ``(rect, mask)``
    describing them.
    """
    if canvas.shape != original.shape:
        raise DimensionError(f"canvas {canvas.shape} does not match original {original.shape}")
    rect, mask, tile = _build(original, e, rang, total_mean, cfg)
    _write(canvas, rect, mask, tile)
    return rect, mask


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


def self_ception(img, slic: SlicParams, cfg: RenderConfig | None = None):
    """Run the whole pipeline and return ``(uint8 image, SelfceptionReport)``."""
    cfg = cfg or RenderConfig()
    img = as_image(img)
    if img.dtype != np.uint8:
        img = quantize(img)
    timings = {}

    t0 = time.perf_counter()
    lab = rgb_to_lab(img)
    timings["lab"] = _ms(t0)

    t0 = time.perf_counter()
    labels = run_slic(lab, slic, workers=cfg.workers)
    timings["slic"] = _ms(t0)

    t0 = time.perf_counter()
    stats = region_stats(labels, img)
    ellipses = [fit_ellipse(st) for st in stats]
    timings["ellipses"] = _ms(t0)

    t0 = time.perf_counter()
    total_mean = mean_color(img)
    canvas = base_layer(img, labels, stats, cfg.background)
    frames = Path(cfg.emit_frames) if cfg.emit_frames is not None else None
    if frames is not None:
        frames.mkdir(parents=True, exist_ok=True)

    def build(e):
        return _build(img, e, ellipse_mean_color(img, e), total_mean, cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            pieces = pool.map(build, ellipses)
            painted = _paint_all(canvas, pieces, frames, cfg.frame_stride)
    else:
        painted = _paint_all(canvas, map(build, ellipses), frames, cfg.frame_stride)
    timings["render"] = _ms(t0)

    t0 = time.perf_counter()
    out = quantize(canvas)
    err = mse(out, img)
    timings["mse"] = _ms(t0)

    report = SelfceptionReport(
        requested_k=slic.k,
        achieved_regions=labels.region_count,
        mse=err,
        timings_ms=timings,
        config={
            "k": slic.k,
            "compactness": slic.compactness,
            "iterations": slic.iterations,
            "min_region_fraction": slic.min_region_fraction,
            "rotated_tiles": cfg.rotated_tiles,
            "clip_output": cfg.clip_output,
            "background": cfg.background.value,
            "painted_regions": painted,
        },
        labels=labels,
        ellipses=ellipses,
    )
    return out, report


def _paint_all(canvas, pieces, frames, stride) -> int:
    count = 0
    for rect, mask, tile in pieces:
        _write(canvas, rect, mask, tile)
        count += 1
        if frames is not None and count % stride == 0:
            save_image(quantize(canvas), frames / f"frame_{count // stride:06d}.png")
    return count
