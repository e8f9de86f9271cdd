"""Exception types shared across the package."""


class ConcdiamError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ConcdiamError):
    """A document could not be read: bad JSON, missing keys, unknown type."""


class ValidationError(ConcdiamError):
    """An input violates a stated invariant; the message names it."""


class EnumerationCapError(ConcdiamError):
    """An exact computation would need to enumerate more outcomes than allowed."""


class CertificationError(ConcdiamError):
    """Certification refused: a precondition audit failed before any sampling."""
