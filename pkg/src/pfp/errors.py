"""Exception types. Every error carries a stable ``code`` string used by the CLI."""


class PfpError(Exception):
    code = "PFP_ERROR"


class NegativeLocation(PfpError, ValueError):
    code = "NEGATIVE_LOCATION"


class NonPositiveMass(PfpError, ValueError):
    code = "NON_POSITIVE_MASS"


class MassNotNormalized(PfpError, ValueError):
    code = "MASS_NOT_NORMALIZED"


class ZeroMean(PfpError, ValueError):
    code = "ZERO_MEAN"


class InvalidMoments(PfpError, ValueError):
    code = "INVALID_MOMENTS"


class InvalidCountLaw(PfpError, ValueError):
    code = "INVALID_COUNT_LAW"


class InfiniteSupportCount(PfpError, ValueError):
    code = "INFINITE_SUPPORT_COUNT"


class NegativeS(PfpError, ValueError):
    code = "NEGATIVE_S"


class ZeroS(PfpError, ValueError):
    code = "ZERO_S"


class ZOutOfRange(PfpError, ValueError):
    code = "Z_OUT_OF_RANGE"


class AlphaOutOfRange(PfpError, ValueError):
    code = "ALPHA_OUT_OF_RANGE"


class SpecInvalid(PfpError, ValueError):
    code = "SPEC_INVALID"


class ConditionsNotSatisfied(PfpError):
    code = "CONDITIONS_NOT_SATISFIED"

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("conditions not satisfied: " + ", ".join(self.failures))


class BackendUnsupported(PfpError):
    code = "BACKEND_UNSUPPORTED"


class MonotonicityViolated(PfpError, ArithmeticError):
    code = "MONOTONICITY_VIOLATED"


class MaxIterExceeded(PfpError):
    code = "MAX_ITER_EXCEEDED"

    def __init__(self, result):
        self.result = result
        super().__init__(f"no convergence after {result.iterations} iterations")


class ParseError(PfpError, ValueError):
    code = "PARSE_ERROR"


class UnknownEquationKind(ParseError):
    code = "UNKNOWN_EQUATION_KIND"


class MissingField(ParseError):
    code = "MISSING_FIELD"

    def __init__(self, field, line=None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"missing field {field!r}{where}")


class InvalidLaw(ParseError):
    code = "INVALID_LAW"
