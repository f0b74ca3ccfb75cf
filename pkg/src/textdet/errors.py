"""Exception hierarchy shared across the package."""


class TextDetError(Exception):
    """Base class for all errors raised by this package."""


class NonConvexInput(TextDetError):
    """A quad with a reflex vertex was passed where convexity is required."""


class ZeroArea(TextDetError):
    """A degenerate (zero-area) polygon where positive area is required."""


class NegativeDistance(TextDetError):
    """A boundary distance of a rotated-box geometry is negative."""


class CollapsedQuad(TextDetError):
    """Shrinking collapsed the quad to zero or negative area."""


class OutOfBounds(TextDetError):
    """An annotation vertex lies outside the image."""


class ShapeMismatch(TextDetError):
    """Array arguments have incompatible shapes."""


class DegenerateGt(TextDetError):
    """Ground-truth geometry is degenerate (non-positive size)."""


class NonPositiveScore(TextDetError):
    """Detection score must be strictly positive for weighted merging."""


class BadShape(TextDetError):
    """Tensor shape violates a network contract."""


class MissingCache(TextDetError):
    """backward() called without a preceding forward() cache."""


class EmptyDataset(TextDetError):
    """Training requires at least one sample."""


class ConfigInfeasible(TextDetError):
    """Rejection sampling could not satisfy the scene configuration."""


class FileFormatError(TextDetError):
    """A quad text file or tensor file failed to parse."""
