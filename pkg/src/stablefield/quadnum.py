"""Exact arithmetic in real quadratic fields Q(sqrt m)."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import total_ordering
from numbers import Rational


def _is_square_free(m: int) -> bool:
    if m < 1:
        return False
    k = 2
    while k * k <= m:
        if m % (k * k) == 0:
            return False
        k += 1
    return True


def _sign_of(a: Fraction, b: Fraction, m: int) -> int:
    """Sign of a + b*sqrt(m), decided exactly."""
    sa = (a > 0) - (a < 0)
    sb = (b > 0) - (b < 0)
    if sb == 0 or m == 1:
        return (a + b > 0) - (a + b < 0) if m == 1 else sa
    if sa == 0:
        return sb
    if sa == sb:
        return sa
    # opposite signs: compare a^2 with b^2 m
    lhs, rhs = a * a, b * b * m
    if lhs == rhs:
        return 0
    return sa if lhs > rhs else sb


@total_ordering
class QuadNum:
    """The number ``a + b*sqrt(m)`` with rational ``a``, ``b`` and square-free ``m``.

    Values with ``b == 0`` are rational and combine freely with any field;
    mixing two genuinely irrational values from different fields raises
    ``ValueError``.
    """

    __slots__ = ("a", "b", "m")

    def __init__(self, a=0, b=0, m: int = 1):
        a, b = Fraction(a), Fraction(b)
        m = int(m)
        if not _is_square_free(m):
            raise ValueError(f"m must be a square-free positive integer, got {m}")
        if m == 1:
            a, b = a + b, Fraction(0)
        if b == 0:
            m = 1
        self.a, self.b, self.m = a, b, m

    @classmethod
    def coerce(cls, x) -> "QuadNum":
        if isinstance(x, QuadNum):
            return x
        if isinstance(x, (int, Rational)):
            return cls(x)
        if isinstance(x, str):
            return cls.parse(x)
        raise TypeError(f"cannot convert {type(x).__name__} to QuadNum")

    def _common(self, other: "QuadNum") -> int:
        if self.m == 1:
            return other.m
        if other.m == 1 or other.m == self.m:
            return self.m
        raise ValueError(f"cannot mix sqrt({self.m}) and sqrt({other.m})")

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def __add__(self, other):
        try:
            other = QuadNum.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadNum(self.a + other.a, self.b + other.b, self._common(other))

    __radd__ = __add__

    def __neg__(self):
        return QuadNum(-self.a, -self.b, self.m)

    def __sub__(self, other):
        try:
            other = QuadNum.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return QuadNum.coerce(other) - self

    def __mul__(self, other):
        try:
            other = QuadNum.coerce(other)
        except TypeError:
            return NotImplemented
        m = self._common(other)
        return QuadNum(
            self.a * other.a + self.b * other.b * m,
            self.a * other.b + self.b * other.a,
            m,
        )

    __rmul__ = __mul__

    def conjugate(self) -> "QuadNum":
        return QuadNum(self.a, -self.b, self.m)

    def __truediv__(self, other):
        other = QuadNum.coerce(other)
        norm = other.a * other.a - other.b * other.b * other.m
        if norm == 0:
            raise ZeroDivisionError("division by zero QuadNum")
        num = self * other.conjugate()
        return QuadNum(num.a / norm, num.b / norm, num.m)

    def __rtruediv__(self, other):
        return QuadNum.coerce(other) / self

    def sign(self) -> int:
        return _sign_of(self.a, self.b, self.m)

    def __eq__(self, other):
        try:
            other = QuadNum.coerce(other)
        except TypeError:
            return NotImplemented
        return self.a == other.a and self.b == other.b and (self.b == 0 or self.m == other.m)

    def __lt__(self, other):
        other = QuadNum.coerce(other)
        return (self - other).sign() < 0

    def __hash__(self):
        return hash((self.a, self.b, self.m if self.b else 1))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.m)

    def __repr__(self):
        return f"QuadNum({self})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a} + {self.b} sqrt {self.m}"

    def to_text(self) -> str:
        """Lossless text form ``"a/b + c/d sqrt m"``."""
        a, b = self.a, self.b
        op = "-" if b < 0 else "+"
        return f"{a.numerator}/{a.denominator} {op} {abs(b.numerator)}/{b.denominator} sqrt {self.m}"

    _PATTERN = re.compile(
        r"^\s*(?P<a>[-+]?\d+(?:/\d+)?)?\s*"
        r"(?:(?P<op>[-+])\s*(?P<b>\d+(?:/\d+)?)?\s*\*?\s*sqrt\s*\(?\s*(?P<m>\d+)\s*\)?)?\s*$"
    )

    @classmethod
    def parse(cls, text: str) -> "QuadNum":
        """Parse ``"a/b + c/d sqrt m"``; also accepts ``"3"``, ``"1 - sqrt 2"``, ``"-2/3"``."""
        text = text.strip()
        lead = re.match(r"^\s*([-+]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*sqrt\s*\(?\s*(\d+)\s*\)?\s*$", text)
        if lead:  # pure irrational, e.g. "sqrt 2" or "-1/2 sqrt 3"
            coef = Fraction(lead.group(2) or 1)
            return cls(0, -coef if lead.group(1) == "-" else coef, int(lead.group(3)))
        match = cls._PATTERN.match(text)
        if not match or (match.group("a") is None and match.group("op") is None):
            raise ValueError(f"cannot parse QuadNum from {text!r}")
        a = Fraction(match.group("a") or 0)
        if match.group("op") is None:
            return cls(a)
        b = Fraction(match.group("b") or 1)
        if match.group("op") == "-":
            b = -b
        return cls(a, b, int(match.group("m")))


SQRT2 = QuadNum(0, 1, 2)
