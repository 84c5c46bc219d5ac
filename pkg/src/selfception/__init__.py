"""Render an image as a mosaic of resized copies of itself.

The image is split into SLIC superpixels and each region gets an
equivalent ellipse. A copy of the whole image is resized into each
ellipse's box and shifted toward the color of the pixels it covers.
"""

from .errors import (
    DimensionError,
    EmptyMaskError,
    FormatError,
    ImageIOError,
    ParamError,
    SelfceptionError,
)
from .geometry import Ellipse, Rect, RegionStats, ellipse_bbox, fit_ellipse, point_in_ellipse, region_stats
from .raster import (
    load_image,
    masked_mean_color,
    mean_color,
    mse,
    resize_bilinear,
    rgb_to_lab,
    rotate_image,
    save_image,
)
from .render import Background, RenderConfig, SelfceptionReport, self_ception
from .slic import LabelMap, SlicParams, enforce_connectivity, init_seeds, run_slic

__version__ = "0.1.0"
