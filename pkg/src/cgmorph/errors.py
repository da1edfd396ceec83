"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for errors raised by cgmorph."""


class DomainError(GeometryError, ValueError):
    """A point lies outside the coordinate box of its chart."""


class SingularityError(GeometryError, ArithmeticError):
    """A metric (or Gram matrix) that must be invertible is not."""


class DegeneracyError(GeometryError, ValueError):
    """A frame that must be linearly independent is rank deficient."""


class UsageError(GeometryError, ValueError):
    """Arguments are inconsistent (chart mismatch, bad case tag, ...)."""


class ParameterError(GeometryError, ValueError):
    """Cheeger-Gromoll parameters violate q >= 0, alpha > 0."""


class RankError(GeometryError, ValueError):
    """The differential of a map has the wrong rank for the requested operation."""


class InvalidUseError(GeometryError, ValueError):
    """An operation was called where its hypotheses (e.g. conformality) fail."""
