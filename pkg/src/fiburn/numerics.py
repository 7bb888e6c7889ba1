"""Exact numerics: rationals, the quadratic field Q[sqrt 5], Fibonacci numbers.

Rationals are plain :class:`fractions.Fraction` objects, which are kept in
canonical form (positive denominator, gcd 1, zero as 0/1) by the standard
library.  :class:`QuadraticValue` adds exact arithmetic on ``p + q*sqrt(5)``.
"""

from __future__ import annotations

import math
import threading
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import total_ordering
from typing import Union

BigRational = Fraction
RationalLike = Union[int, Fraction]

__all__ = [
    "BigRational",
    "QuadraticValue",
    "FibCache",
    "PHI",
    "PHI_INV",
    "rat_arith",
    "quad_arith",
    "quad_approx",
    "fib",
    "fib_binet",
    "format_decimal",
    "DEFAULT_CACHE",
]


def rat_arith(op: str, x: RationalLike, y: RationalLike) -> Fraction:
    """Apply ``op`` in {add, sub, mul, div} to two rationals exactly.

    Division by zero raises :class:`ZeroDivisionError`.
    """
    x, y = Fraction(x), Fraction(y)
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        if y == 0:
            raise ZeroDivisionError(f"rational division of {x} by zero")
        return x / y
    raise ValueError(f"unknown rational operation {op!r}")


def _sign_of(r: Fraction, s: Fraction) -> int:
    """Exact sign of r + s*sqrt(5)."""
    if s == 0:
        return (r > 0) - (r < 0)
    if r == 0:
        return (s > 0) - (s < 0)
    if (r > 0) == (s > 0):
        return 1 if r > 0 else -1
    # opposite signs: compare r^2 with 5 s^2
    diff = r * r - 5 * s * s
    if diff == 0:  # impossible for rational r, s != 0
        return 0
    dominant = r if diff > 0 else s
    return 1 if dominant > 0 else -1


@total_ordering
class QuadraticValue:
    """Exact element ``p + q*sqrt(5)`` of Q[sqrt 5].

    Instances are immutable and hashable.  Since sqrt(5) is irrational the
    pair (p, q) is a unique representation, so equality is componentwise.
    """

    __slots__ = ("_p", "_q")

    def __init__(self, p: RationalLike = 0, q: RationalLike = 0):
        object.__setattr__(self, "_p", Fraction(p))
        object.__setattr__(self, "_q", Fraction(q))

    def __setattr__(self, name, value):
        raise AttributeError("QuadraticValue is immutable")

    def __reduce__(self):
        return QuadraticValue, (self._p, self._q)

    @property
    def p(self) -> Fraction:
        return self._p

    @property
    def q(self) -> Fraction:
        return self._q

    @classmethod
    def coerce(cls, value) -> "QuadraticValue":
        if isinstance(value, QuadraticValue):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(value, 0)
        raise TypeError(f"cannot coerce {type(value).__name__} to QuadraticValue")

    def is_rational(self) -> bool:
        return self._q == 0

    def conjugate(self) -> "QuadraticValue":
        return QuadraticValue(self._p, -self._q)

    def norm(self) -> Fraction:
        """Field norm p^2 - 5 q^2 (zero only for the zero element)."""
        return self._p * self._p - 5 * self._q * self._q

    def sign(self) -> int:
        return _sign_of(self._p, self._q)

    def inverse(self) -> "QuadraticValue":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero in Q[sqrt 5]")
        return QuadraticValue(self._p / n, -self._q / n)

    def __add__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadraticValue(self._p + o._p, self._q + o._q)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticValue(-self._p, -self._q)

    def __sub__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        return QuadraticValue(self._p - o._p, self._q - o._q)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        p, q, pp, qq = self._p, self._q, o._p, o._q
        return QuadraticValue(p * pp + 5 * q * qq, p * qq + pp * q)

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return QuadraticValue.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        base = self if n >= 0 else self.inverse()
        n = abs(n)
        result = QuadraticValue(1)
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        return self._p == o._p and self._q == o._q

    def __lt__(self, other):
        try:
            o = QuadraticValue.coerce(other)
        except TypeError:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self):
        if self._q == 0:
            return hash(self._p)
        return hash((self._p, self._q))

    def __bool__(self):
        return bool(self._p) or bool(self._q)

    def __float__(self):
        return float(self._p) + float(self._q) * math.sqrt(5)

    def __repr__(self):
        return f"QuadraticValue({self._p!s}, {self._q!s})"

    def __str__(self):
        if self._q == 0:
            return str(self._p)
        q = self._q
        q_abs = abs(q)
        coef = "" if q_abs == 1 else f"({q_abs})*"
        if self._p == 0:
            return f"{'-' if q < 0 else ''}{coef}sqrt(5)"
        return f"{self._p} {'-' if q < 0 else '+'} {coef}sqrt(5)"


PHI = QuadraticValue(Fraction(1, 2), Fraction(1, 2))
PHI_INV = QuadraticValue(Fraction(-1, 2), Fraction(1, 2))
PSI = QuadraticValue(Fraction(1, 2), Fraction(-1, 2))
SQRT5 = QuadraticValue(0, 1)


def quad_arith(op: str, x, y=None) -> QuadraticValue:
    """Apply ``op`` in {add, sub, mul, inv} in Q[sqrt 5]; ``inv`` ignores ``y``."""
    x = QuadraticValue.coerce(x)
    if op == "inv":
        return x.inverse()
    y = QuadraticValue.coerce(y)
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "div":
        return x / y
    raise ValueError(f"unknown quadratic operation {op!r}")


def sqrt5_scaled(k: int) -> int:
    """floor(sqrt(5) * 2**k)."""
    return math.isqrt(5 << (2 * k))


def quad_interval(x: QuadraticValue, k: int) -> tuple[Fraction, Fraction]:
    """Rational interval [lo, hi] containing x, of width at most |q| * 2**-k."""
    s = sqrt5_scaled(k)
    scale = 1 << k
    a = x.q * Fraction(s, scale)
    b = x.q * Fraction(s + 1, scale)
    lo, hi = (a, b) if x.q >= 0 else (b, a)
    return x.p + lo, x.p + hi


def _decimal_of(value: Fraction, places: int) -> Decimal:
    """Round a rational to ``places`` digits after the point (half-even)."""
    scaled = value * (10 ** places)
    n = round(scaled)
    with localcontext() as ctx:
        ctx.prec = max(len(str(abs(n))) + 2, 28)
        return Decimal(n).scaleb(-places)


def quad_approx(x: QuadraticValue, bits: int = 64) -> tuple[Decimal, Fraction]:
    """Return ``(value, err)`` with ``|x - value| <= err`` and ``2*err <= 2**-bits``.

    sqrt(5) is bracketed by integer square roots at a working scale chosen from
    the size of the irrational coefficient.
    """
    if bits < 8:
        raise ValueError("bits must be at least 8")
    x = QuadraticValue.coerce(x)
    # digits d with 10**-d <= 2**-(bits+3)
    places = math.ceil((bits + 3) * math.log10(2)) + 1
    if x.q == 0:
        dec = _decimal_of(x.p, places)
        return dec, abs(Fraction(dec) - x.p)
    k = bits + 3 + max(1, math.ceil(abs(x.q)).bit_length())
    lo, hi = quad_interval(x, k)
    mid = (lo + hi) / 2
    dec = _decimal_of(mid, places)
    err = (hi - lo) / 2 + abs(Fraction(dec) - mid)
    return dec, err


def format_decimal(x, digits: int = 12) -> str:
    """Render a rational or Q[sqrt 5] value with ``digits`` significant digits."""
    if isinstance(x, Fraction) or isinstance(x, int):
        x = QuadraticValue(x)
    if not x:
        return "0"
    bits = 64
    value, _ = quad_approx(x, bits)
    # very small magnitudes need more working bits to keep the leading digits
    while value != 0 and value.adjusted() < -(bits // 4):
        bits *= 2
        value, _ = quad_approx(x, bits)
    if value == 0:
        bits = 4096
        value, _ = quad_approx(x, bits)
    mantissa, _, exponent = f"{value:.{digits}g}".lower().partition("e")
    if "." in mantissa:
        mantissa = mantissa.rstrip("0").rstrip(".")
    return f"{mantissa}e{exponent}" if exponent else mantissa


class FibCache:
    """Memoized Fibonacci numbers with F(0) = 0, F(1) = F(2) = 1.

    Small indices are filled iteratively into a contiguous table; far
    indices are computed by fast doubling and memoized sparsely.  Growth is
    guarded by a lock so one cache can be shared between threads.
    """

    ITERATIVE_REACH = 4096

    def __init__(self):
        self._table = [0, 1, 1]
        self._sparse: dict[int, int] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._table)

    def __getitem__(self, n: int) -> int:
        return self.get(n)

    def get(self, n: int) -> int:
        if n < 0:
            raise ValueError(f"Fibonacci index must be non-negative, got {n}")
        table = self._table
        if n < len(table):
            return table[n]
        if n in self._sparse:
            return self._sparse[n]
        with self._lock:
            table = self._table
            if n < len(table) + self.ITERATIVE_REACH:
                a, b = table[-2], table[-1]
                extra = []
                for _ in range(len(table), n + 1):
                    a, b = b, a + b
                    extra.append(b)
                # publish in one step so readers never see a partial table
                self._table = table + extra
                return self._table[n]
            value = _fib_pair(n)[0]
            self._sparse[n] = value
            return value


def _fib_pair(n: int) -> tuple[int, int]:
    """(F(n), F(n+1)) by fast doubling."""
    if n == 0:
        return 0, 1
    a, b = _fib_pair(n >> 1)
    c = a * (2 * b - a)
    d = a * a + b * b
    if n & 1:
        return d, c + d
    return c, d


DEFAULT_CACHE = FibCache()


def fib(n: int, cache: FibCache | None = None) -> int:
    """F(n) for n >= 0."""
    return (cache or DEFAULT_CACHE).get(n)


def fib_binet(n: int) -> QuadraticValue:
    """(phi**n - psi**n) / sqrt(5) evaluated exactly in Q[sqrt 5]."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return (PHI ** n - PSI ** n) / SQRT5
