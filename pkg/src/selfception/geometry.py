"""Region moments, equivalent ellipses and their bounding boxes.

Coordinates follow image convention: x is the column, y the row and grows
downward, and angles turn from +x toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError
from .raster import as_image

__all__ = [
    "RegionStats",
    "Ellipse",
    "Rect",
    "region_stats",
    "moment_eigenvalues",
    "fit_ellipse",
    "ellipse_bbox",
    "point_in_ellipse",
    "ellipse_mask",
    "draw_ellipses",
]

MIN_SEMI_AXIS = 0.5


@dataclass(frozen=True)
class RegionStats:
    label: int
    area: int
    cx: float
    cy: float
    mu20: float
    mu02: float
    mu11: float
    mean_color: np.ndarray

    @property
    def centroid(self) -> tuple[float, float]:
        return self.cx, self.cy


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    theta: float


class Rect(NamedTuple):
    """Inclusive integer pixel bounds."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1 + 1), slice(self.x0, self.x1 + 1)

    @classmethod
    def of_image(cls, width: int, height: int) -> "Rect":
        return cls(0, 0, width - 1, height - 1)


def region_stats(labels, img) -> list[RegionStats]:
    """Area, centroid, normalized second central moments and mean color for
    every label in ``[0, labels.max()]``.

    Moments are taken about the centroid in a second pass, which keeps them
    accurate on large images.
    """
    if hasattr(labels, "labels"):
        labels = labels.labels
    labels = np.asarray(labels)
    img = as_image(img)
    if labels.shape != img.shape[:2]:
        raise DimensionError(f"label shape {labels.shape} does not match image {img.shape[:2]}")
    lf = labels.ravel()
    n = int(lf.max()) + 1
    yy, xx = np.indices(labels.shape)
    x = xx.ravel().astype(np.float64)
    y = yy.ravel().astype(np.float64)

    area = np.bincount(lf, minlength=n)
    safe = np.maximum(area, 1)
    cx = np.bincount(lf, weights=x, minlength=n) / safe
    cy = np.bincount(lf, weights=y, minlength=n) / safe
    dx = x - cx[lf]
    dy = y - cy[lf]
    mu20 = np.bincount(lf, weights=dx * dx, minlength=n) / safe
    mu02 = np.bincount(lf, weights=dy * dy, minlength=n) / safe
    mu11 = np.bincount(lf, weights=dx * dy, minlength=n) / safe
    pix = img.reshape(-1, 3).astype(np.float64)
    colors = np.stack(
        [np.bincount(lf, weights=pix[:, c], minlength=n) for c in range(3)], axis=1
    ) / safe[:, None]

    return [
        RegionStats(
            label=i,
            area=int(area[i]),
            cx=float(cx[i]),
            cy=float(cy[i]),
            mu20=float(mu20[i]),
            mu02=float(mu02[i]),
            mu11=float(mu11[i]),
            mean_color=colors[i],
        )
        for i in range(n)
        if area[i] > 0
    ]


def moment_eigenvalues(stats: RegionStats) -> tuple[float, float]:
    """Eigenvalues ``(l1, l2)``, ``l1 >= l2``, of the region's moment matrix."""
    half_trace = (stats.mu20 + stats.mu02) / 2
    radius = math.hypot((stats.mu20 - stats.mu02) / 2, stats.mu11)
    return half_trace + radius, half_trace - radius


def fit_ellipse(stats: RegionStats) -> Ellipse:
    """Equivalent ellipse of a region.

    The semi-axes are twice the square roots of the eigenvalues of the
    moment matrix ``[[mu20, mu11], [mu11, mu02]]`` (clamped at half a pixel),
    and ``theta`` is the major-axis direction in ``(-pi/2, pi/2]``.
    """
    mu20, mu02, mu11 = stats.mu20, stats.mu02, stats.mu11
    lam1, lam2 = moment_eigenvalues(stats)
    a = max(2 * math.sqrt(max(lam1, 0.0)), MIN_SEMI_AXIS)
    b = max(2 * math.sqrt(max(lam2, 0.0)), MIN_SEMI_AXIS)
    if mu11 == 0 and mu20 == mu02:
        theta = 0.0
    else:
        theta = 0.5 * math.atan2(2 * mu11, mu20 - mu02)
        if theta <= -math.pi / 2:
            theta += math.pi
    return Ellipse(stats.cx, stats.cy, a, b, theta)


def ellipse_bbox(e: Ellipse, bounds: Rect) -> Rect:
    """Tight axis-aligned integer box around ``e``, clipped to ``bounds``.

    If the box misses ``bounds`` entirely, the center clamped into
    ``bounds`` is returned as a one-pixel box.
    """
    c, s = math.cos(e.theta), math.sin(e.theta)
    hw = math.sqrt((e.a * c) ** 2 + (e.b * s) ** 2)
    hh = math.sqrt((e.a * s) ** 2 + (e.b * c) ** 2)
    x0 = max(math.floor(e.cx - hw), bounds.x0)
    x1 = min(math.ceil(e.cx + hw), bounds.x1)
    y0 = max(math.floor(e.cy - hh), bounds.y0)
    y1 = min(math.ceil(e.cy + hh), bounds.y1)
    if x0 > x1 or y0 > y1:
        px = min(max(_round_half_up(e.cx), bounds.x0), bounds.x1)
        py = min(max(_round_half_up(e.cy), bounds.y0), bounds.y1)
        return Rect(px, py, px, py)
    return Rect(x0, y0, x1, y1)


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def point_in_ellipse(e: Ellipse, x, y):
    """Boundary-inclusive test at integer pixel coordinates; accepts arrays."""
    c, s = math.cos(e.theta), math.sin(e.theta)
    dx = np.asarray(x, dtype=np.float64) - e.cx
    dy = np.asarray(y, dtype=np.float64) - e.cy
    u = (dx * c + dy * s) / e.a
    v = (-dx * s + dy * c) / e.b
    return u * u + v * v <= 1.0


def ellipse_mask(e: Ellipse, rect: Rect) -> np.ndarray:
    """Boolean mask over ``rect`` of the pixels inside ``e``."""
    xs = np.arange(rect.x0, rect.x1 + 1)[None, :]
    ys = np.arange(rect.y0, rect.y1 + 1)[:, None]
    return point_in_ellipse(e, xs, ys)


def draw_ellipses(img, ellipses, color=(255, 0, 0), samples: int = 360) -> np.ndarray:
    """Copy of ``img`` with every ellipse outline plotted in ``color``."""
    out = as_image(img).astype(np.uint8, copy=True)
    h, w = out.shape[:2]
    t = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    ct, st = np.cos(t), np.sin(t)
    for e in ellipses:
        c, s = math.cos(e.theta), math.sin(e.theta)
        px = np.rint(e.cx + e.a * ct * c - e.b * st * s).astype(int)
        py = np.rint(e.cy + e.a * ct * s + e.b * st * c).astype(int)
        keep = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        out[py[keep], px[keep]] = color
    return out
