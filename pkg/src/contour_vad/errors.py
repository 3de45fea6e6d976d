"""Exception types raised across the library.

Kept in one module so callers can catch by category: ValidationError
subclasses cover bad inputs/files, RuntimeError subclasses cover
violated call contracts.
"""


class ContourVadError(Exception):
    """Base class for all library errors."""


class ParseError(ContourVadError):
    """A manifest / ground-truth / config file is malformed."""


class ValidationError(ContourVadError):
    """An input violates a documented invariant.

    Carries enough coordinates (video/frame/object) to locate the offender.
    """


class LengthMismatch(ValidationError):
    """RLE run lengths do not sum to width*height."""


class EmptyMask(ValidationError):
    """A mask raster contains no set pixels."""


class DegeneratePerimeter(ValidationError):
    """A boundary has zero total arc length."""


class WrongPointCount(ValidationError):
    """A contour does not carry the point count an operation requires."""


class NegativeEntry(ValidationError):
    """A histogram vector contains a negative entry."""


class ShapeMismatch(ContourVadError):
    """Tensor shapes do not agree with a layer or loss contract."""


class NoCachedForward(ContourVadError):
    """backward() called before forward() cached intermediates."""


class EmptyTrainingSet(ContourVadError):
    """A training operation received no samples."""


class TrackTooShort(ContourVadError):
    """A track has too few contours for the requested operation."""


class PrefixTooShort(ContourVadError):
    """A cluster-label prefix is shorter than the minimum of 3."""


class TooFewSamples(ContourVadError):
    """Fewer samples than requested clusters."""


class DegenerateClustering(ContourVadError):
    """Hierarchical clustering produced an empty cluster."""


class AllClustersDiscarded(ContourVadError):
    """The discard threshold removed every cluster."""


class ClassUnderflow(ContourVadError):
    """A class has too few samples to train an SVM."""


class SingleClassLabels(ContourVadError):
    """ROC AUC is undefined when labels are all 0 or all 1."""


class NoGtRegions(ContourVadError):
    """RBDC requires at least one ground-truth region."""


class NoGtTracks(ContourVadError):
    """TBDC requires at least one ground-truth track."""


class DegenerateRange(ContourVadError):
    """Min-max normalization hit a constant (min == max) signal."""


class ConfigError(ContourVadError):
    """Pipeline configuration is invalid."""
