"""Exception hierarchy shared by all stages."""


class LsgmError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(LsgmError, ValueError):
    """Invalid argument or configuration value."""


class ParseError(LsgmError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class NumericalError(LsgmError, ArithmeticError):
    """A numerical routine failed (non-convergence, NaN input, ...)."""


class EmbeddingRankError(NumericalError):
    """The requested embedding dimension exceeds the positive spectrum."""


class SeedlessAlignmentError(NumericalError):
    """Procrustes alignment was requested without any seed pairs."""


class DegenerateInputError(NumericalError):
    """Input geometry makes the requested operation undefined."""
