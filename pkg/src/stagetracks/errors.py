"""Exception types shared across the toolkit."""


class StageTracksError(Exception):
    """Base class for every error raised by this package."""


class ParseError(StageTracksError, ValueError):
    """Malformed input syntax; message carries the byte offset."""


class SchemaError(StageTracksError, ValueError):
    """Structurally valid document violating the schema; names the path."""


class FormatError(StageTracksError, ValueError):
    """Semantically inconsistent data, e.g. RLE runs not summing to the image size."""


class InputError(StageTracksError, ValueError):
    """Operation called with unusable inputs (duplicate sample times, missing file)."""


class ConfigError(StageTracksError, ValueError):
    """Invalid configuration value, e.g. a degenerate ROI polygon."""


class GeometryError(StageTracksError, ValueError):
    """Degenerate geometry, e.g. a point cloud with no depth spread."""


class NumericalError(StageTracksError, ArithmeticError):
    """A linear solve failed or produced an untrustworthy solution."""


class DimensionError(StageTracksError, ValueError):
    """Mismatched array dimensions, e.g. mesh arrays of the wrong vertex count."""


class ScenarioError(StageTracksError, ValueError):
    """Infeasible synthetic scenario parameters."""
