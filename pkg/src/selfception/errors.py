"""Exception types raised across the pipeline."""


class SelfceptionError(Exception):
    """Base class for all errors raised by this package."""


class ImageIOError(SelfceptionError, OSError):
    """A file could not be read or written."""


class FormatError(SelfceptionError, ValueError):
    """File bytes could not be decoded as a supported image."""


class DimensionError(SelfceptionError, ValueError):
    """Image shapes are incompatible or a target size is invalid."""


class ParamError(SelfceptionError, ValueError):
    """An algorithm parameter is out of range."""


class EmptyMaskError(SelfceptionError, ValueError):
    """A masked reduction was requested over zero pixels."""
