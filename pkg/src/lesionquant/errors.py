"""Exception hierarchy shared by all lesionquant modules.

Two broad families matter for the CLI exit-code contract: format/IO
problems (exit code 2) and domain/invariant problems (exit code 1).
"""


class LesionQuantError(Exception):
    """Base class for all lesionquant errors."""


class FormatError(LesionQuantError):
    """A file could not be read or written (CLI exit code 2)."""


class DomainError(LesionQuantError):
    """Inputs violate a documented invariant or precondition (CLI exit code 1)."""


class UnsupportedFormat(FormatError):
    """File is outside the supported NIfTI-1/image subset."""


class CorruptHeader(FormatError):
    """Header fields are inconsistent or out of range."""


class TruncatedData(FormatError):
    """File ends before the declared voxel payload."""


class IoFailure(FormatError):
    """Underlying OS-level read/write failure."""


class UnreadableImage(FormatError):
    """A 2D slice image could not be decoded."""


class EmptyDirectory(FormatError):
    """A slice directory contains no readable images."""


class MissingPair(FormatError):
    """Prediction/ground-truth directories do not share identical filenames."""


class InvariantViolation(DomainError):
    """A value object fails its own invariants."""


class InconsistentDimensions(DomainError):
    """Slices or companion volumes disagree on grid dimensions."""


class ShapeMismatch(DomainError):
    """Two masks being compared have different shapes."""


class DegenerateInput(DomainError):
    """Constant-intensity volume; the correlation metric is undefined."""


class NoOverlap(DomainError):
    """Fixed and moving volumes share no voxels after initialization."""


class EmptyRange(DomainError):
    """A slice range selects no slices."""
