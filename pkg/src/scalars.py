"""
Complex scalars for the sup-calculus.

The scalar set of the calculus is fixed to the complex numbers, stored as
double-precision pairs. Comparisons are approximate with a configurable
epsilon (DEFAULT_EPS). Scalar literals are read by `ls_parser.parse_scalar`.
"""

import math
from dataclasses import dataclass

from .errors import NonPositive, ScalarOverflow

DEFAULT_EPS = 1e-9

# Nearest double to 2^(-1/2); the literal `1/sqrt2` denotes exactly this value
INV_SQRT2 = math.sqrt(0.5)


@dataclass(frozen=True)
class Scalar:
    """A complex number re + im·i with finite components"""
    re: float = 0.0
    im: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ScalarOverflow(f"Scalar components must be finite, got ({self.re}, {self.im})")

    @classmethod
    def from_complex(cls, z: complex) -> "Scalar":
        z = complex(z)
        return cls(float(z.real), float(z.imag))

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    def __add__(self, other: "Scalar") -> "Scalar":
        return add(self, other)

    def __mul__(self, other: "Scalar") -> "Scalar":
        return mul(self, other)

    def __neg__(self) -> "Scalar":
        return Scalar(-self.re, -self.im)

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    def sq_modulus(self) -> float:
        return sq_modulus(self)

    def __str__(self) -> str:
        return format_scalar(self)


ZERO = Scalar(0.0, 0.0)
ONE = Scalar(1.0, 0.0)


def _result(re: float, im: float, a: Scalar, op: str, b: Scalar) -> Scalar:
    if not (math.isfinite(re) and math.isfinite(im)):
        raise ScalarOverflow(f"Scalar overflow computing ({format_scalar(a)}) {op} ({format_scalar(b)})")
    return Scalar(re, im)


def add(a: Scalar, b: Scalar) -> Scalar:
    return _result(a.re + b.re, a.im + b.im, a, "+", b)


def mul(a: Scalar, b: Scalar) -> Scalar:
    return _result(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re, a, "*", b)


def sq_modulus(a: Scalar) -> float:
    """
    |a|², the Born weight of an amplitude

    Raises:
        ScalarOverflow: if the weight is too large for a double
    """
    weight = a.re * a.re + a.im * a.im
    if math.isinf(weight):
        raise ScalarOverflow(f"Squared modulus of {format_scalar(a)} overflows")
    return weight


def approx_eq(a: Scalar, b: Scalar, eps: float = DEFAULT_EPS) -> bool:
    """True iff |a - b| <= eps"""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    d_re = a.re - b.re
    d_im = a.im - b.im
    return d_re * d_re + d_im * d_im <= eps * eps


def inv_sqrt_real(x: float, eps: float = DEFAULT_EPS) -> Scalar:
    """
    Renormalization factor 1/√x for a squared norm x

    Raises:
        NonPositive: if x <= eps
    """
    if not x > eps:
        raise NonPositive(f"Cannot renormalize by a squared norm of {x} (must exceed {eps})")
    return Scalar(1.0 / math.sqrt(x), 0.0)


# Textual form

def real_literal(text: str) -> float:
    """Value of an unsigned real literal (decimal or `1/sqrt2`); too large a decimal gives inf"""
    if text == "1/sqrt2":
        return INV_SQRT2
    return float(text)


def format_real(x: float) -> str:
    """Shortest text that reads back to exactly x"""
    if x == INV_SQRT2:
        return "1/sqrt2"
    if x == -INV_SQRT2:
        return "-1/sqrt2"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_scalar(a: Scalar) -> str:
    if a.im == 0:
        return format_real(a.re)
    if a.re == 0:
        return f"{format_real(a.im)}i"
    sign = "-" if a.im < 0 else "+"
    return f"{format_real(a.re)}{sign}{format_real(abs(a.im))}i"
