"""Exception hierarchy shared by every omnisal module."""


class OmnisalError(Exception):
    """Base class for all errors raised by omnisal."""


class DomainError(OmnisalError, ValueError):
    """A coordinate or parameter lies outside its admissible range."""


class ShapeError(OmnisalError, ValueError):
    """Arrays that must agree in shape do not."""


class DegenerateInputError(OmnisalError, ValueError):
    """Input is valid in form but makes the quantity undefined (zero variance, all-zero mass...)."""


class FormatError(OmnisalError, ValueError):
    """A serialized raster, checkpoint or CSV file is malformed."""


class ParseError(FormatError):
    """A CSV row could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
