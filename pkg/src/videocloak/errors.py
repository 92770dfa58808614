"""Exception hierarchy shared by all videocloak modules."""


class VideocloakError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(VideocloakError):
    """An input value violates a documented invariant."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent with what an operation requires."""


class GapError(ValidationError):
    """A frame directory has a hole in its index sequence."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"missing frame index {index}")


class MismatchError(ValidationError):
    """Two embeddings come from different extractors and cannot be compared."""


class IoError(VideocloakError):
    """Underlying filesystem read/write failed."""


class FormatError(VideocloakError):
    """A serialized file does not match its declared binary layout."""


class ProtocolError(VideocloakError):
    """The external encoder subprocess violated the wire protocol."""


class NumericalError(VideocloakError):
    """Optimization produced non-finite values."""


class DegenerateError(VideocloakError):
    """The input admits no meaningful answer (e.g. all-identical frames)."""
