"""Exact rational, extended-rational and infinitesimal-augmented arithmetic.

All numeric state in the analysis is kept exact: plain rationals are
`fractions.Fraction` (arbitrary precision, always in lowest terms with a
positive denominator), bounds live in Q extended with -oo/+oo, and the
simplex encodes strict inequalities with a symbolic positive infinitesimal
``eps`` rather than any concrete small constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rat = Fraction

RatLike = Union[Rat, int, str]


def rat(value: RatLike, den: int | None = None) -> Rat:
    """Coerce ints / `n/d` strings / Fractions to an exact rational."""
    if den is not None:
        return Fraction(value, den)
    return Fraction(value)


def rat_arith(a: Rat, b: Rat, op: str) -> Rat:
    """Apply one of ``+ - * /`` exactly; division by zero raises ZeroDivisionError."""
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise ZeroDivisionError("rational division by zero")
        return a / b
    raise ValueError(f"unknown rational operator {op!r}")


def parse_rat(text: str) -> Rat:
    """Parse the literal syntax ``[-]digits[/digits]`` (also accepts -inf/+inf callers' job)."""
    return Fraction(text.strip())


def format_rat(q: Rat) -> str:
    return str(q)


_NEG, _FIN, _POS = -1, 0, 1


@dataclass(frozen=True, order=False)
class Ext:
    """Extended rational: -oo < finite values < +oo.

    ``tag`` is -1 / 0 / +1 for -oo / finite / +oo; ``value`` is meaningful
    only for finite elements.
    """

    tag: int
    value: Rat = Fraction(0)

    @staticmethod
    def finite(q: RatLike) -> "Ext":
        return Ext(_FIN, rat(q))

    @property
    def is_finite(self) -> bool:
        return self.tag == _FIN

    @property
    def is_neg_inf(self) -> bool:
        return self.tag == _NEG

    @property
    def is_pos_inf(self) -> bool:
        return self.tag == _POS

    def _key(self):
        return (self.tag, self.value if self.tag == _FIN else Fraction(0))

    def __lt__(self, other: "Ext") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "Ext") -> bool:
        return self._key() <= other._key()

    def __gt__(self, other: "Ext") -> bool:
        return self._key() > other._key()

    def __ge__(self, other: "Ext") -> bool:
        return self._key() >= other._key()

    def __str__(self) -> str:
        if self.tag == _NEG:
            return "-inf"
        if self.tag == _POS:
            return "+inf"
        return str(self.value)


NEG_INF = Ext(_NEG)
POS_INF = Ext(_POS)


def ext_add(a: Ext, b: Ext) -> Ext:
    """Extended-real addition; +oo + -oo is a hard error, never a value."""
    if a.is_finite and b.is_finite:
        return Ext.finite(a.value + b.value)
    if a.is_finite:
        return b
    if b.is_finite:
        return a
    if a.tag != b.tag:
        raise ArithmeticError("+inf + -inf is undefined")
    return a


def parse_ext(text: str) -> Ext:
    t = text.strip()
    if t == "-inf":
        return NEG_INF
    if t == "+inf" or t == "inf":
        return POS_INF
    return Ext.finite(parse_rat(t))


@dataclass(frozen=True)
class Eps:
    """Rational plus a multiple of a positive infinitesimal, ordered lexicographically.

    A strict bound ``< c`` is represented as ``<= c - eps``; keeping eps
    symbolic makes strict-inequality feasibility exact.
    """

    real: Rat
    inf: Rat = Fraction(0)

    @staticmethod
    def of(q: RatLike) -> "Eps":
        return Eps(rat(q), Fraction(0))

    @staticmethod
    def strict_below(q: RatLike) -> "Eps":
        return Eps(rat(q), Fraction(-1))

    def __add__(self, other: "Eps") -> "Eps":
        return Eps(self.real + other.real, self.inf + other.inf)

    def __sub__(self, other: "Eps") -> "Eps":
        return Eps(self.real - other.real, self.inf - other.inf)

    def __neg__(self) -> "Eps":
        return Eps(-self.real, -self.inf)

    def scale(self, k: Rat) -> "Eps":
        return Eps(self.real * k, self.inf * k)

    def div(self, k: Rat) -> "Eps":
        if k == 0:
            raise ZeroDivisionError("eps-rational division by zero")
        return Eps(self.real / k, self.inf / k)

    def _key(self):
        return (self.real, self.inf)

    def __lt__(self, other: "Eps") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "Eps") -> bool:
        return self._key() <= other._key()

    def __gt__(self, other: "Eps") -> bool:
        return self._key() > other._key()

    def __ge__(self, other: "Eps") -> bool:
        return self._key() >= other._key()

    def is_rational(self) -> bool:
        return self.inf == 0

    def __str__(self) -> str:
        if self.inf == 0:
            return str(self.real)
        sign = "+" if self.inf > 0 else "-"
        return f"{self.real} {sign} {abs(self.inf)}*eps"


ZERO_EPS = Eps(Fraction(0), Fraction(0))
