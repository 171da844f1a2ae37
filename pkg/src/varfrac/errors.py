"""Exception types shared across the toolkit."""


class VarfracError(Exception):
    """Base class for all toolkit errors."""


class RangeError(VarfracError, ValueError):
    """An exponent left its admissible range (e.g. dropped below 1)."""


class QuadratureError(VarfracError, ArithmeticError):
    """A grid quadrature could not be carried out."""


class NotInFamily(VarfracError, KeyError):
    """An interval is not a member of the dyadic family it was checked against."""


class ExponentMismatch(VarfracError, ValueError):
    """Exponents violate a required pointwise relation."""


class RootAboveThreshold(VarfracError, ValueError):
    """The root of a dyadic family already exceeds the stopping threshold."""


class PreconditionError(VarfracError, ValueError):
    """An operation was called outside its precondition."""


class ScenarioInvalid(VarfracError, ValueError):
    """A verification scenario is internally inconsistent."""


class ParseError(VarfracError, ValueError):
    """A JSON description could not be parsed."""
