"""
Exception hierarchy shared by every lsq module.

Every error carries the CLI exit code of its category so that the command
line front end can map failures to the stable exit-code contract:
0 ok, 1 syntax, 2 type, 3 reduction, 4 data shape.
"""

from typing import Any, Optional


class LSQError(ValueError):
    """Base class for all lsq errors"""
    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# Syntax (exit 1)

class ParseError(LSQError):
    """Syntax error with a 1-based line/column position"""
    exit_code = 1

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.reason = message
        self.line = line
        self.column = column


class ExtensionDisabled(ParseError):
    """Additive connectives used without enabling the extension"""


# Typing (exit 2)

class TypingError(LSQError):
    exit_code = 2

    def __init__(self, message: str, term: Optional[Any] = None):
        super().__init__(message)
        self.term = term


class TypeMismatch(TypingError):
    pass


class UnboundVariable(TypingError):
    pass


class AnnotationRequired(TypingError):
    pass


class NonLinearUseOfSpanVariable(TypingError):
    pass


# Reduction (exit 3)

class ReductionError(LSQError):
    exit_code = 3


class StuckTerm(ReductionError):
    pass


class ZeroNorm(ReductionError):
    pass


class FuelExhausted(ReductionError):
    """Raised by normalizers; `partial` holds whatever was computed so far"""

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class NonPositive(ReductionError):
    pass


class ScalarOverflow(ReductionError):
    """Scalar arithmetic left the finite doubles"""


class NotCanonical(ReductionError):
    pass


# Data shape (exit 4)

class ShapeError(LSQError):
    exit_code = 4


class BadShape(ShapeError):
    pass


class BadLength(ShapeError):
    pass


class ShapeMismatch(ShapeError):
    pass


class UnknownName(ShapeError):
    pass
