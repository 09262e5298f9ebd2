"""Exact ordered arithmetic in Q and real quadratic fields Q(sqrt(d)).

A :class:`Scalar` is ``a + b*sqrt(d)`` with ``a, b`` arbitrary-precision
rationals and ``d`` a squarefree integer ``>= 2`` (or 0 for plain rationals).
Values are canonical: ``b == 0`` forces ``d == 0``, fractions stay reduced.
Comparison is the exact order of the real embedding, decided by sign
bookkeeping and integer squaring, never by floating point.

Two scalars combine when their fields agree; a rational (d = 0) embeds in
every Q(sqrt(d)).  Distinct nonzero ``d`` raise ``FieldMismatch``.

>>> mul(parse_scalar("1+1*rt(2)"), parse_scalar("-1+1*rt(2)"))
Scalar(1)
>>> format_scalar(div(Scalar.integer(1), parse_scalar("1+1*rt(5)")))
'-1/4+1/4*rt(5)'

An :class:`ExtMeasure` is a measure value in [0, +oo]; ``Infinite`` is
absorbing for addition and maximal for the order.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import lru_cache

from .errors import DivisionByZero, FieldMismatch, OutOfRange, ParseError

__all__ = [
    "Scalar",
    "ExtMeasure",
    "INFINITE",
    "parse_scalar",
    "format_scalar",
    "scalar_arith",
    "scalar_cmp",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
]


@lru_cache(maxsize=None)
def _is_squarefree(n: int) -> bool:
    if n % 4 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % (f * f) == 0:
            return False
        f += 2
    return True


def _check_d(d: int) -> int:
    if d == 0:
        return 0
    if d < 2 or math.isqrt(d) ** 2 == d or not _is_squarefree(d):
        raise OutOfRange(f"d must be 0 or a squarefree integer >= 2, got {d}")
    return d


class Scalar:
    """Immutable element of Q(sqrt(d)); value is ``a + b*sqrt(d)``."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b=0, d: int = 0):
        if type(a) is not Fraction:
            a = Fraction(a)
        if type(b) is not Fraction:
            b = Fraction(b)
        if b == 0:
            d = 0
        else:
            d = _check_d(d)
            if d == 0:
                b = Fraction(0)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):  # immutability
        raise AttributeError("Scalar is immutable")

    @staticmethod
    def _raw(a: Fraction, b: Fraction, d: int) -> "Scalar":
        """Fast path for arithmetic on already-validated fields."""
        s = object.__new__(Scalar)
        if not b:
            d = 0
        object.__setattr__(s, "a", a)
        object.__setattr__(s, "b", b)
        object.__setattr__(s, "d", d)
        return s

    @staticmethod
    def integer(n: int) -> "Scalar":
        return Scalar(Fraction(n))

    @staticmethod
    def rational(p, q=1) -> "Scalar":
        return Scalar(Fraction(p, q))

    @staticmethod
    def root(d: int, coeff=1) -> "Scalar":
        return Scalar(0, Fraction(coeff), d)

    # -- field bookkeeping -------------------------------------------------

    def _join_field(self, other: "Scalar") -> int:
        if self.d == 0:
            return other.d
        if other.d == 0 or other.d == self.d:
            return self.d
        raise FieldMismatch(f"cannot combine rt({self.d}) with rt({other.d})")

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        d = self._join_field(other)
        return Scalar._raw(self.a + other.a, self.b + other.b, d)

    __radd__ = __add__

    def __neg__(self):
        return Scalar._raw(-self.a, -self.b, self.d)

    def __sub__(self, other):
        other = _coerce(other)
        d = self._join_field(other)
        return Scalar._raw(self.a - other.a, self.b - other.b, d)

    def __rsub__(self, other):
        return _coerce(other) + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        d = self._join_field(other)
        if not self.b and not other.b:
            return Scalar._raw(self.a * other.a, self.b, 0)
        a = self.a * other.a + self.b * other.b * d
        b = self.a * other.b + self.b * other.a
        return Scalar._raw(a, b, d)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        if self.is_zero():
            raise DivisionByZero("scalar inverse of 0")
        if self.b == 0:
            return Scalar(1 / self.a)
        # (a + b rt d)^-1 = (a - b rt d) / (a^2 - b^2 d); denominator is
        # nonzero because rt(d) is irrational.
        n = self.a * self.a - self.b * self.b * self.d
        return Scalar(self.a / n, -self.b / n, self.d)

    def __truediv__(self, other):
        other = _coerce(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return _coerce(other) * self.inverse()

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # -- exact order -------------------------------------------------------

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def sign(self) -> int:
        """Exact sign of the real embedding (-1, 0, or 1)."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 with b^2 d, sign carried by a
        lhs = a * a
        rhs = b * b * self.d
        if lhs == rhs:  # impossible for squarefree d >= 2
            return 0
        big_rational = lhs > rhs
        return (1 if big_rational else -1) * (1 if a > 0 else -1)

    def _cmp(self, other) -> int:
        other = _coerce(other)
        if self.b == other.b and self.d == other.d:
            a, c = self.a, other.a
            return -1 if a < c else (1 if a > c else 0)
        return (self - other).sign()

    def __eq__(self, other):
        if not isinstance(other, (Scalar, int, Fraction)):
            return NotImplemented
        try:
            return self._cmp(other) == 0
        except FieldMismatch:
            return False

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    # -- integer rounding (exact) -------------------------------------------

    def floor(self) -> int:
        if self.b == 0:
            return math.floor(self.a)
        # Squeeze b*rt(d) between rationals with denominator 2^k until the
        # integer part is pinned; b != 0 means the value is irrational, so
        # the bracket never straddles an integer forever.
        k = 16
        while True:
            s = math.isqrt(self.d << (2 * k))  # s/2^k <= rt(d) < (s+1)/2^k
            lo_r = Fraction(s, 1 << k)
            hi_r = Fraction(s + 1, 1 << k)
            if self.b > 0:
                lo = self.a + self.b * lo_r
                hi = self.a + self.b * hi_r
            else:
                lo = self.a + self.b * hi_r
                hi = self.a + self.b * lo_r
            fl, fh = math.floor(lo), math.floor(hi)
            if fl == fh:
                return fl
            k *= 2

    def ceil(self) -> int:
        return -((-self).floor())

    def mod(self, p: "Scalar") -> "Scalar":
        """``self - floor(self/p)*p``, in [0, p) for p > 0."""
        q = (self / p).floor()
        return self - p * q

    # -- rendering -----------------------------------------------------------

    def approx(self) -> float:
        """Decimal approximation for report rendering only; never used in decisions."""
        v = float(self.a)
        if self.b != 0:
            v += float(self.b) * math.sqrt(self.d)
        return v

    def __repr__(self):
        return f"Scalar({format_scalar(self)})"

    def __str__(self):
        return format_scalar(self)


def _coerce(x) -> Scalar:
    if isinstance(x, Scalar):
        return x
    if isinstance(x, (int, Fraction)):
        return Scalar(Fraction(x))
    raise TypeError(f"cannot coerce {type(x).__name__} to Scalar")


ZERO = Scalar.integer(0)
ONE = Scalar.integer(1)


# -- spec-facing operation wrappers ---------------------------------------


def add(x: Scalar, y: Scalar) -> Scalar:
    return _coerce(x) + _coerce(y)


def sub(x: Scalar, y: Scalar) -> Scalar:
    return _coerce(x) - _coerce(y)


def mul(x: Scalar, y: Scalar) -> Scalar:
    return _coerce(x) * _coerce(y)


def div(x: Scalar, y: Scalar) -> Scalar:
    return _coerce(x) / _coerce(y)


def neg(x: Scalar) -> Scalar:
    return -_coerce(x)


_OPS = {"add": add, "sub": sub, "mul": mul, "div": div}


def scalar_arith(x: Scalar, y: Scalar, op: str) -> Scalar:
    if op == "neg":
        return neg(x)
    try:
        f = _OPS[op]
    except KeyError:
        raise ParseError(f"unknown scalar op {op!r}") from None
    return f(x, y)


def scalar_cmp(x: Scalar, y: Scalar) -> str:
    c = _coerce(x)._cmp(y)
    return "LT" if c < 0 else ("GT" if c > 0 else "EQ")


# -- text syntax -----------------------------------------------------------
#
#   p | p/q | p/q+r/s*rt(d) | p/q-r/s*rt(d)      (whitespace-free)

_RAT = r"-?\d+(?:/\d+)?"
_SCALAR_RE = re.compile(
    rf"^(?P<a>{_RAT})(?:(?P<sign>[+-])(?P<b>\d+(?:/\d+)?)\*rt\((?P<d>\d+)\))?$"
)
_PURE_ROOT_RE = re.compile(rf"^(?P<b>{_RAT})\*rt\((?P<d>\d+)\)$")


def parse_scalar(text: str, field_d: int | None = None) -> Scalar:
    """Parse the canonical text syntax; ``field_d`` restricts the session field."""
    if not isinstance(text, str):
        raise ParseError(f"scalar must be a string, got {type(text).__name__}")
    m = _SCALAR_RE.match(text)
    if m:
        a = Fraction(m.group("a"))
        if m.group("b") is None:
            res = Scalar(a)
        else:
            b = Fraction(m.group("b"))
            if m.group("sign") == "-":
                b = -b
            res = Scalar(a, b, int(m.group("d")))
    else:
        m = _PURE_ROOT_RE.match(text)
        if not m:
            raise ParseError(f"bad scalar syntax: {text!r}")
        res = Scalar(0, Fraction(m.group("b")), int(m.group("d")))
    if field_d is not None and res.d != 0 and res.d != field_d:
        raise FieldMismatch(f"scalar {text!r} uses rt({res.d}) outside session field rt({field_d})")
    return res


def _fmt_frac(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def format_scalar(x: Scalar) -> str:
    if x.b == 0:
        return _fmt_frac(x.a)
    sign = "+" if x.b > 0 else "-"
    return f"{_fmt_frac(x.a)}{sign}{_fmt_frac(abs(x.b))}*rt({x.d})"


# -- extended measures ------------------------------------------------------


class ExtMeasure:
    """A measure value: ``Finite(scalar >= 0)`` or ``Infinite``."""

    __slots__ = ("value",)

    def __init__(self, value: Scalar | None):
        if value is not None:
            value = _coerce(value)
            if value.sign() < 0:
                raise OutOfRange(f"negative measure {value}")
        object.__setattr__(self, "value", value)

    def __setattr__(self, name, v):
        raise AttributeError("ExtMeasure is immutable")

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    @property
    def is_zero(self) -> bool:
        return self.value is not None and self.value.is_zero()

    def __add__(self, other: "ExtMeasure") -> "ExtMeasure":
        if self.is_infinite or other.is_infinite:
            return INFINITE
        return ExtMeasure(self.value + other.value)

    def __eq__(self, other):
        if not isinstance(other, ExtMeasure):
            if self.is_infinite:
                return False
            return self.value == other
        if self.is_infinite or other.is_infinite:
            return self.is_infinite and other.is_infinite
        return self.value == other.value

    def __lt__(self, other):
        if not isinstance(other, ExtMeasure):
            other = ExtMeasure(other)
        if self.is_infinite:
            return False
        if other.is_infinite:
            return True
        return self.value < other.value

    def __le__(self, other):
        return self < other or self == other

    def __gt__(self, other):
        if not isinstance(other, ExtMeasure):
            other = ExtMeasure(other)
        return other < self

    def __ge__(self, other):
        return self > other or self == other

    def __hash__(self):
        return hash(None) if self.is_infinite else hash(self.value)

    def __repr__(self):
        return "ExtMeasure(inf)" if self.is_infinite else f"ExtMeasure({self.value})"

    def __str__(self):
        return "inf" if self.is_infinite else format_scalar(self.value)


INFINITE = ExtMeasure(None)
