"""Exception types shared across the laboratory modules."""


class WclabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(WclabError):
    """Matrix/vector dimensions are inconsistent with the operation."""


class ParameterError(WclabError):
    """A scalar parameter is out of its valid range or non-finite."""


class SingularMatrixError(WclabError):
    """Matrix is singular or too ill-conditioned to invert reliably."""


class GeometryError(WclabError):
    """Physical layout is invalid (e.g. elements in the reactive near field)."""


class DegenerateLinkError(WclabError):
    """A wireless link has zero through-gain; isolation is undefined."""


class ConfigError(WclabError):
    """Experiment configuration failed validation.

    The message names the offending field.
    """
