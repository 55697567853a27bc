"""Exception hierarchy shared across the package.

The CLI maps each class to a distinct exit code, so keep the tree flat
and the categories coarse: bad arguments, bad index files, bad data files.
"""


class XfbqError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(XfbqError, ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatchError(InvalidInputError):
    """Two operands disagree on vector dimensionality."""


class IndexFormatError(XfbqError):
    """An index file cannot be parsed."""


class BadMagicError(IndexFormatError):
    """File does not start with the index magic bytes."""


class UnsupportedVersionError(IndexFormatError):
    """Index file version is not supported by this build."""


class TruncatedIndexError(IndexFormatError):
    """Index file ends before its declared payload."""


class DataFormatError(XfbqError):
    """A vector data file (fvecs/ivecs) is malformed."""
