"""Exact arithmetic in Q and Q(sqrt(D)) for rotation-orbit bookkeeping.

The cut-and-project window enumeration partitions the circle at points of the
form {b - a*j} with a the rotation number.  Deciding which side of a partition
point an orbit element falls on must be exact, otherwise the enumerator and
the pointwise potential evaluation can disagree on boundary ties.  Elements
a + b*sqrt(D) with rational a, b cover every model shipped here: rational
rotation numbers (D = 0) and quadratic irrationals such as the golden ratio.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Rat = Union[int, Fraction]


def _is_square(d: int) -> bool:
    r = math.isqrt(d)
    return r * r == d


class QuadExact:
    """a + b*sqrt(D) with a, b in Q and D a fixed nonnegative integer.

    Normalized so that square D folds into the rational part; all comparison
    operators are exact.  Mixed-D arithmetic is rejected except when one side
    is rational.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Rat = 0, b: Rat = 0, d: int = 0):
        a, b = Fraction(a), Fraction(b)
        if d < 0:
            raise ValueError("D must be nonnegative")
        if b == 0:
            d = 0
        elif d == 0:
            b = Fraction(0)
        elif _is_square(d):
            a, b, d = a + b * math.isqrt(d), Fraction(0), 0
        self.a, self.b, self.d = a, b, d

    # ---- construction helpers -------------------------------------------------
    @staticmethod
    def of(x) -> "QuadExact":
        if isinstance(x, QuadExact):
            return x
        if isinstance(x, (int, Fraction)):
            return QuadExact(x)
        if isinstance(x, float):
            return QuadExact(Fraction(x))
        raise TypeError(f"cannot represent {type(x).__name__} exactly")

    def _coerce(self, other) -> "QuadExact":
        o = QuadExact.of(other)
        if self.d != 0 and o.d != 0 and self.d != o.d:
            raise ValueError("mixed quadratic fields")
        return o

    # ---- ring operations ------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        return QuadExact(self.a + o.a, self.b + o.b, self.d or o.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadExact(-self.a, -self.b, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        d = self.d or o.d
        return QuadExact(self.a * o.a + self.b * o.b * d, self.a * o.b + self.b * o.a, d)

    __rmul__ = __mul__

    def inverse(self) -> "QuadExact":
        den = self.a * self.a - self.b * self.b * self.d
        if den == 0:
            raise ZeroDivisionError("zero element")
        return QuadExact(self.a / den, -self.b / den, self.d)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    # ---- order ------------------------------------------------------------------
    def sign(self) -> int:
        """Exact sign of a + b*sqrt(D)."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against b^2 * D
        lhs, rhs = a * a, b * b * self.d
        if a > 0:  # b < 0
            return 1 if lhs > rhs else (-1 if lhs < rhs else 0)
        return -1 if lhs > rhs else (1 if lhs < rhs else 0)

    def __eq__(self, other):
        try:
            return (self - other).sign() == 0
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    # ---- floor / fractional part --------------------------------------------------
    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def floor(self) -> int:
        n = math.floor(float(self))
        # float seed, exact correction (at most a couple of steps)
        while (self - n).sign() < 0:
            n -= 1
        while (self - (n + 1)).sign() >= 0:
            n += 1
        return n

    def frac(self) -> "QuadExact":
        return self - self.floor()

    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def __repr__(self):
        if self.b == 0:
            return f"QuadExact({self.a})"
        return f"QuadExact({self.a} + {self.b}*sqrt({self.d}))"


def golden_ratio() -> QuadExact:
    """(1 + sqrt(5)) / 2."""
    return QuadExact(Fraction(1, 2), Fraction(1, 2), 5)


def parse_exact(value) -> QuadExact:
    """Parse a rotation number from model-file syntax.

    Accepted forms: int/float (floats become their exact binary rational),
    [p, q] for p/q, {"quad": [a, b, d, c]} for (a + b*sqrt(d)) / c, or the
    string "golden".
    """
    if isinstance(value, str):
        if value.strip().lower() == "golden":
            return golden_ratio()
        return QuadExact(Fraction(value))
    if isinstance(value, (int, float, Fraction)):
        return QuadExact.of(value)
    if isinstance(value, (list, tuple)):
        if len(value) == 2:
            return QuadExact(Fraction(int(value[0]), int(value[1])))
        raise ValueError("rational form must be [p, q]")
    if isinstance(value, dict) and "quad" in value:
        a, b, d, c = value["quad"]
        c = int(c)
        return QuadExact(Fraction(int(a), c), Fraction(int(b), c), int(d))
    raise ValueError(f"cannot parse exact number from {value!r}")


def exact_to_json(x: QuadExact):
    """Inverse of parse_exact, for round-tripping model files."""
    if x.is_rational:
        return [x.a.numerator, x.a.denominator]
    c = math.lcm(x.a.denominator, x.b.denominator)
    return {"quad": [int(x.a * c), int(x.b * c), x.d, c]}
