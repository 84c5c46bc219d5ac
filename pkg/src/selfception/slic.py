"""SLIC superpixels: localized k-means over (L, a, b, x, y).

The assignment step can be split over horizontal row bands and run on a
thread pool. Each pixel still sees the centers in ascending index order, so
labels are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FormatError, ImageIOError, ParamError

__all__ = [
    "SlicParams",
    "LabelMap",
    "grid_interval",
    "init_seeds",
    "run_slic",
    "enforce_connectivity",
    "search_k",
    "save_label_raster",
    "load_label_raster",
]

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(frozen=True)
class SlicParams:
    """Segmentation controls.

    ``k`` is the requested number of regions; the achieved count is
    reported on the resulting :class:`LabelMap`. Components smaller than
    ``min_region_fraction * S**2`` pixels are merged into a neighbor, where
    ``S`` is the seed grid spacing.
    """

    k: int
    compactness: float = 10.0
    iterations: int = 10
    min_region_fraction: float = 0.25

    def validate(self, n_pixels: int) -> None:
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ParamError(f"k must be a positive integer, got {self.k!r}")
        if self.k > n_pixels:
            raise ParamError(f"k={self.k} exceeds the pixel count {n_pixels}")
        if not self.compactness > 0 or not math.isfinite(self.compactness):
            raise ParamError(f"compactness must be positive, got {self.compactness!r}")
        if self.iterations < 1:
            raise ParamError(f"iterations must be positive, got {self.iterations!r}")
        if not 0 < self.min_region_fraction < 1:
            raise ParamError(
                f"min_region_fraction must lie in (0, 1), got {self.min_region_fraction!r}"
            )


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Dense region labels: every value in ``[0, region_count)`` occurs."""

    labels: np.ndarray
    region_count: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def grid_interval(width: int, height: int, k: int) -> float:
    return math.sqrt(width * height / k)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _gradient(lab: np.ndarray) -> np.ndarray:
    # squared Lab difference of the horizontal plus the vertical neighbors
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (gx * gx).sum(axis=2) + (gy * gy).sum(axis=2)


def init_seeds(lab: np.ndarray, k: int) -> np.ndarray:
    """Place about ``k`` seeds on a regular grid and nudge each one to the
    lowest-gradient pixel of its 3x3 neighborhood.

    Returns an ``(n, 5)`` float array of ``(L, a, b, x, y)`` rows in
    row-major grid order. On gradient ties the unperturbed grid position
    wins, then the first neighbor in raster order.
    """
    h, w = lab.shape[:2]
    if not 1 <= k <= w * h:
        raise ParamError(f"k must lie in [1, {w * h}], got {k}")
    s = grid_interval(w, h, k)
    nx = min(w, max(1, _round_half_up(w / s)))
    ny = min(h, max(1, _round_half_up(k / nx)))
    xs = np.floor((np.arange(nx) + 0.5) * w / nx).astype(np.intp)
    ys = np.floor((np.arange(ny) + 0.5) * h / ny).astype(np.intp)
    gx, gy = np.meshgrid(xs, ys)
    gx = gx.ravel()
    gy = gy.ravel()

    grad = np.pad(_gradient(lab), 1, constant_values=np.inf)
    offsets = [(0, 0)] + [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    cand = np.stack([grad[gy + 1 + dy, gx + 1 + dx] for dy, dx in offsets], axis=1)
    best = np.argmin(cand, axis=1)
    off = np.array(offsets)[best]
    sy = np.clip(gy + off[:, 0], 0, h - 1)
    sx = np.clip(gx + off[:, 1], 0, w - 1)

    centers = np.empty((sx.size, 5))
    centers[:, :3] = lab[sy, sx]
    centers[:, 3] = sx
    centers[:, 4] = sy
    return centers


def _assign_band(chans, centers, s, spatial_weight, r0, r1):
    L, A, B = chans
    w = L.shape[1]
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(r0, r1, dtype=np.float64)
    dist = np.full((r1 - r0, w), np.inf)
    labels = np.full((r1 - r0, w), -1, dtype=np.int32)
    for i, (cl, ca, cb, cx, cy) in enumerate(centers):
        y0 = max(r0, math.ceil(cy - s))
        y1 = min(r1, math.floor(cy + s) + 1)
        if y0 >= y1:
            continue
        x0 = max(0, math.ceil(cx - s))
        x1 = min(w, math.floor(cx + s) + 1)
        if x0 >= x1:
            continue
        dl = L[y0:y1, x0:x1] - cl
        da = A[y0:y1, x0:x1] - ca
        db = B[y0:y1, x0:x1] - cb
        ddx = xs[x0:x1] - cx
        ddy = ys[y0 - r0 : y1 - r0] - cy
        d = dl * dl + da * da + db * db + (ddy[:, None] ** 2 + ddx[None, :] ** 2) * spatial_weight
        sub = dist[y0 - r0 : y1 - r0, x0:x1]
        closer = d < sub
        sub[closer] = d[closer]
        labels[y0 - r0 : y1 - r0, x0:x1][closer] = i
    return labels


def _assign(chans, centers, s, spatial_weight, workers):
    h = chans[0].shape[0]
    n_bands = max(1, min(workers, h))
    bounds = np.linspace(0, h, n_bands + 1).astype(int)
    bands = list(zip(bounds[:-1], bounds[1:]))
    if n_bands == 1:
        return _assign_band(chans, centers, s, spatial_weight, 0, h)
    with ThreadPoolExecutor(max_workers=n_bands) as pool:
        parts = pool.map(lambda b: _assign_band(chans, centers, s, spatial_weight, *b), bands)
        return np.vstack(list(parts))


def _nearest_spatial(centers, ys, xs, chunk=4096):
    out = np.empty(ys.size, dtype=np.int32)
    cx = centers[:, 3]
    cy = centers[:, 4]
    for start in range(0, ys.size, chunk):
        py = ys[start : start + chunk, None]
        px = xs[start : start + chunk, None]
        d = (px - cx) ** 2 + (py - cy) ** 2
        out[start : start + chunk] = np.argmin(d, axis=1)
    return out


def run_slic(lab: np.ndarray, params: SlicParams, workers: int = 1) -> LabelMap:
    """Segment a Lab image into connected superpixels.

    Each of ``params.iterations`` rounds assigns every pixel to the closest
    center within a window of half-width ``S`` around it, using
    ``D**2 = d_lab**2 + (d_xy / S)**2 * m**2``, then moves every center to the
    mean of its members. The final assignment goes through
    :func:`enforce_connectivity`.
    """
    lab = np.asarray(lab, dtype=np.float64)
    h, w = lab.shape[:2]
    params.validate(w * h)
    s = grid_interval(w, h, params.k)
    spatial_weight = (params.compactness / s) ** 2
    chans = tuple(np.ascontiguousarray(lab[..., c]) for c in range(3))
    flat = [c.ravel() for c in chans]
    yy, xx = np.indices((h, w))
    flat_x = xx.ravel().astype(np.float64)
    flat_y = yy.ravel().astype(np.float64)

    centers = init_seeds(lab, params.k)
    n = centers.shape[0]
    labels = None
    for _ in range(params.iterations):
        labels = _assign(chans, centers, s, spatial_weight, workers)
        orphan = labels < 0
        if orphan.any():
            oy, ox = np.nonzero(orphan)
            labels[oy, ox] = _nearest_spatial(centers, oy.astype(float), ox.astype(float))
        lf = labels.ravel()
        counts = np.bincount(lf, minlength=n)
        live = counts > 0
        sums = np.stack(
            [np.bincount(lf, weights=v, minlength=n) for v in (*flat, flat_x, flat_y)], axis=1
        )
        centers = centers.copy()
        centers[live] = sums[live] / counts[live, None]

    min_size = max(1, int(params.min_region_fraction * s * s))
    return enforce_connectivity(labels, min_size)


def _dense_raster_order(ids: np.ndarray) -> tuple[np.ndarray, int]:
    uniq, first = np.unique(ids.ravel(), return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(int(uniq.max()) + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(uniq.size, dtype=np.int32)
    return remap[ids], int(uniq.size)


def _components(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Split every label into its 4-connected components (raster-order ids)."""
    comp = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    base = int(labels.min())
    shifted = labels - base + 1
    for value, sl in enumerate(ndimage.find_objects(shifted), start=1):
        if sl is None:
            continue
        cc, nc = ndimage.label(shifted[sl] == value, structure=_FOUR_CONNECTED)
        view = comp[sl]
        member = cc > 0
        view[member] = cc[member] + offset
        offset += nc
    return _dense_raster_order(comp)


def enforce_connectivity(labels, min_size: int) -> LabelMap:
    """Make every region 4-connected and at least ``min_size`` pixels.

    Components are visited in raster order of their first pixel. A component
    smaller than ``min_size`` is merged into its largest 4-adjacent
    neighbor (lowest id on ties); sizes include earlier merges. Survivors
    are renumbered densely in raster order.
    """
    if isinstance(labels, LabelMap):
        labels = labels.labels
    labels = np.asarray(labels)
    comp, n = _components(labels)
    size = np.bincount(comp.ravel(), minlength=n).tolist()

    pairs = np.concatenate(
        [
            np.stack([comp[:, :-1].ravel(), comp[:, 1:].ravel()], axis=1),
            np.stack([comp[:-1, :].ravel(), comp[1:, :].ravel()], axis=1),
        ]
    )
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.unique(np.concatenate([pairs, pairs[:, ::-1]]), axis=0)
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for a, b in pairs.tolist():
        neighbors[a].add(b)

    parent = list(range(n))

    def find(c: int) -> int:
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for c in range(n):
        if size[c] >= min_size:
            continue
        cands = {find(x) for x in neighbors[c]}
        cands.discard(c)
        if not cands:
            continue
        target = min(cands, key=lambda t: (-size[t], t))
        parent[c] = target
        size[target] += size[c]
        neighbors[target] |= neighbors[c]

    roots = np.array([find(c) for c in range(n)], dtype=np.int32)
    merged, count = _dense_raster_order(roots[comp])
    return LabelMap(merged.astype(np.int32), count)


def search_k(
    lab: np.ndarray,
    target: int,
    params: SlicParams | None = None,
    tolerance: float = 0.05,
    max_steps: int = 8,
    workers: int = 1,
) -> tuple[int, LabelMap]:
    """Adjust the requested k until the achieved region count is within
    ``tolerance`` of ``target``. Returns the best (k, LabelMap) seen."""
    params = params or SlicParams(k=target)
    n_pixels = lab.shape[0] * lab.shape[1]
    k = max(1, min(target, n_pixels))
    best = None
    tried = set()
    for _ in range(max_steps):
        tried.add(k)
        result = run_slic(lab, SlicParams(k, params.compactness, params.iterations,
                                          params.min_region_fraction), workers=workers)
        err = abs(result.region_count - target)
        if best is None or err < best[0]:
            best = (err, k, result)
        if err <= tolerance * target:
            break
        k_next = max(1, min(n_pixels, _round_half_up(k * target / max(result.region_count, 1))))
        if k_next in tried:
            k_next = k + (1 if result.region_count < target else -1)
            if k_next in tried or not 1 <= k_next <= n_pixels:
                break
        k = k_next
    return best[1], best[2]


def save_label_raster(labels, path) -> None:
    """Write ``uint32`` width and height, then one ``uint32`` label per
    pixel in row-major order, all little-endian."""
    if isinstance(labels, LabelMap):
        labels = labels.labels
    labels = np.asarray(labels)
    h, w = labels.shape
    payload = np.array([w, h], dtype="<u4").tobytes() + labels.astype("<u4").tobytes()
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def load_label_raster(path) -> LabelMap:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if len(data) < 8:
        raise FormatError(f"{path}: label raster header truncated")
    w, h = np.frombuffer(data[:8], dtype="<u4")
    if len(data) != 8 + 4 * int(w) * int(h):
        raise FormatError(f"{path}: expected {w}x{h} labels")
    labels = np.frombuffer(data[8:], dtype="<u4").reshape(int(h), int(w)).astype(np.int32)
    return LabelMap(labels, int(labels.max()) + 1 if labels.size else 0)
