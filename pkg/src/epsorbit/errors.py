"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the command line
front end can report failures without parsing messages.
"""


class EpsOrbitError(Exception):
    code = "error"


class DataError(EpsOrbitError):
    """Raised for problems with input data rather than with program usage."""

    code = "data_error"


# -- expressions -------------------------------------------------------------

class ParseError(DataError):
    code = "parse_error"

    def __init__(self, message, offset=None, line=None):
        self.offset = offset
        self.line = line
        where = ""
        if offset is not None:
            where = f" at byte {offset}"
        elif line is not None:
            where = f" on line {line}"
        super().__init__(f"{message}{where}")


class DomainError(DataError):
    code = "domain_error"


class NonFinite(DataError):
    code = "non_finite"


class NonPositive(DataError):
    code = "non_positive"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


# -- scales ------------------------------------------------------------------

class DegenerateScale(DataError):
    code = "degenerate_scale"


class OutOfRange(DataError):
    code = "out_of_range"


class NotMonotone(DataError):
    code = "not_monotone"


class EvaluationError(DataError):
    code = "evaluation_error"


# -- orbits and neighborhoods --------------------------------------------------

class NotContracting(DataError):
    code = "not_contracting"

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class NotDecreasing(DataError):
    code = "not_decreasing"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class OrbitTooShort(DataError):
    """The orbit does not reach the resolution needed for some epsilon.

    ``exact`` holds the plain interval-union length of the stored points,
    which is still well defined.
    """

    code = "orbit_too_short"

    def __init__(self, message, eps=None, exact=None):
        self.eps = eps
        self.exact = exact
        super().__init__(message)


class InsufficientData(DataError):
    code = "insufficient_data"


# -- integration ---------------------------------------------------------------

class NoCrossing(DataError):
    code = "no_crossing"


class LeftDomain(DataError):
    code = "left_domain"


class StiffnessAbort(DataError):
    code = "stiffness_abort"


class NotTransversal(DataError):
    code = "not_transversal"
