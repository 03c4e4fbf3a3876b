"""Exception hierarchy shared by every stlu module."""


class STLUError(Exception):
    """Base class for all errors raised by stlu."""


class ParameterError(STLUError, ValueError):
    """An argument is outside its allowed range."""


class ShapeError(STLUError, ValueError):
    """Variables or time domains of two signals do not line up."""


class ParseError(STLUError, ValueError):
    """Formula text could not be parsed.

    ``position`` is the character offset where parsing failed.
    """

    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class SingleVariableError(ParseError):
    """An atomic predicate does not reference exactly one variable."""


class ConfidenceRangeError(ParseError):
    """A confidence annotation lies outside the open unit interval."""


class EvalError(STLUError, ArithmeticError):
    """Expression evaluation left the function's domain.

    Carries the offending input ``x`` and, when raised from the monitor,
    the time ``t`` and the ``atom`` text where it happened.
    """

    def __init__(self, message, x=None, t=None, atom=None):
        self.x = x
        self.t = t
        self.atom = atom
        super().__init__(message)

    def at(self, t, atom):
        parts = [str(self.args[0]), f"at t={t}", f"in atom {atom}"]
        return EvalError("; ".join(parts), x=self.x, t=t, atom=atom)


class HorizonError(STLUError, ValueError):
    """The signal is too short for the formula evaluated at ``t``."""

    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)


class ConfidenceRequiredError(STLUError, ValueError):
    """A monitored atom carries no confidence level and none was supplied."""
