"""Exception types raised by the tonemap_iqa package.

Plain ``FileNotFoundError`` is used for missing image files; everything
else derives from :class:`TonemapIqaError` so callers can catch one base
class at the CLI boundary.
"""


class TonemapIqaError(Exception):
    """Base class for all package-specific errors."""


# --- image decoding and preprocessing ---

class UnsupportedFormatError(TonemapIqaError):
    """File is not one of the supported raster formats (PNG, JPEG, BMP)."""


class CorruptImageError(TonemapIqaError):
    """File was recognized but could not be decoded."""


class ImageTooSmallError(TonemapIqaError):
    """Image is below the minimum size required by the operation."""


class InvalidNormalizationError(TonemapIqaError):
    """Per-channel normalization constants are malformed (scale <= 0)."""


# --- model package loading and graph execution ---

class PackageNotFoundError(TonemapIqaError):
    """Model package directory, graph file, or manifest is missing."""


class ManifestMismatchError(TonemapIqaError):
    """Manifest declares layers or shapes the graph does not provide."""


class UnsupportedGraphVersionError(TonemapIqaError):
    """Graph file or manifest uses an unsupported format version."""


class InputTooSmallError(TonemapIqaError):
    """Input spatial dims are below a requested layer's output stride."""


class GraphExecutionFailureError(TonemapIqaError):
    """Graph evaluation failed (unsupported op, bad shapes, ...)."""


# --- feature pooling and aggregation ---

class EmptyFeatureMapError(TonemapIqaError):
    """Feature map has no spatial cells."""


class ScaleMismatchError(TonemapIqaError):
    """Scale-concatenation inputs are not an (original, half) pair."""


class LayerMismatchError(TonemapIqaError):
    """Scale-concatenation inputs come from different layers."""


class WrongSegmentCountError(TonemapIqaError):
    """Layer concatenation needs exactly three per-layer segments."""


# --- regression ---

class DegenerateTargetError(TonemapIqaError):
    """Target vector is constant (or has fewer than two samples)."""


class TooManyComponentsError(TonemapIqaError):
    """Requested component count exceeds min(n_samples - 1, n_features)."""


class NumericalBreakdownError(TonemapIqaError):
    """PLSR iteration hit a numerically degenerate quantity."""


class DimensionMismatchError(TonemapIqaError):
    """Prediction input width differs from the model's feature dim."""


class ModelFormatError(TonemapIqaError):
    """A .plsr file is malformed or has an unsupported version."""


# --- metrics ---

class LengthMismatchError(TonemapIqaError):
    """Paired vectors have different lengths."""


class DegenerateInputError(TonemapIqaError):
    """Correlation is undefined for a constant vector."""


class EmptyInputError(TonemapIqaError):
    """Operation requires at least one value."""


# --- dataset manifest and splitting ---

class MissingColumnError(TonemapIqaError):
    """Manifest CSV lacks a required header column."""


class MosOutOfRangeError(TonemapIqaError):
    """A MOS value is missing, unparsable, or outside [0, 100]."""


class DuplicatePathError(TonemapIqaError):
    """The same image path appears twice in a manifest."""


class InvalidCategoryError(TonemapIqaError):
    """Category is not one of TM, MEF, PP."""


class TooFewGroupsError(TonemapIqaError):
    """Splitting needs at least five scene groups."""


# --- feature cache ---

class CacheFormatError(TonemapIqaError):
    """Cache file is malformed or has an unsupported version."""


class IncompleteCacheError(TonemapIqaError):
    """Cache lacks layers or images required by the experiment."""
