"""Exception types shared across the package."""


class InstrumentumError(Exception):
    """A domain-level failure.

    Raised when a mathematical precondition does not hold for otherwise
    well-formed data: a matrix that should be Hermitian is not, an
    instrument fails normalization, a witness does not annihilate the
    Kraus products, a model does not realize the claimed instrument.
    """


class FormatError(Exception):
    """A document could not be parsed, or violates its schema.

    Carries a human-readable message that includes the JSON path of the
    offending field when one can be named.
    """
