import math
import pickle
import random
import threading
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiburn.numerics import (
    PHI,
    PHI_INV,
    FibCache,
    QuadraticValue,
    fib,
    fib_binet,
    quad_approx,
    quad_arith,
    rat_arith,
)

small_fractions = st.fractions(min_value=-50, max_value=50, max_denominator=50)


def canonical(x: Fraction) -> bool:
    return x.denominator > 0 and math.gcd(abs(x.numerator), x.denominator) == 1


class TestRational:
    def test_add_leading_terms(self):
        assert rat_arith("add", Fraction(1, 2), Fraction(1, 3)) == Fraction(5, 6)

    def test_mul_identity(self):
        x = Fraction(-7, 12)
        assert rat_arith("mul", x, Fraction(1)) == x

    def test_div_self(self):
        assert rat_arith("div", Fraction(1, 3), Fraction(1, 3)) == 1

    def test_div_by_zero_is_reported(self):
        with pytest.raises(ZeroDivisionError):
            rat_arith("div", Fraction(1), Fraction(0))

    def test_zero_is_zero_over_one(self):
        z = rat_arith("sub", Fraction(2, 3), Fraction(4, 6))
        assert (z.numerator, z.denominator) == (0, 1)

    @given(st.sampled_from(["add", "sub", "mul", "div"]), small_fractions, small_fractions)
    def test_results_canonical(self, op, x, y):
        if op == "div" and y == 0:
            return
        assert canonical(rat_arith(op, x, y))


class TestQuadratic:
    def test_inverse_of_phi(self):
        inv = quad_arith("inv", PHI)
        assert inv == QuadraticValue(Fraction(-1, 2), Fraction(1, 2))
        assert inv * PHI == QuadraticValue(1)

    def test_mul_by_one(self):
        x = QuadraticValue(Fraction(3, 7), Fraction(-2, 5))
        assert quad_arith("mul", x, QuadraticValue(1)) == x

    def test_two_minus_phi(self):
        assert quad_arith("sub", QuadraticValue(2), PHI) == QuadraticValue(Fraction(3, 2), Fraction(-1, 2))

    def test_inverse_of_zero(self):
        with pytest.raises(ZeroDivisionError):
            quad_arith("inv", QuadraticValue(0))

    def test_mul_formula(self):
        a, b = QuadraticValue(2, 3), QuadraticValue(5, 7)
        assert a * b == QuadraticValue(2 * 5 + 5 * 3 * 7, 2 * 7 + 5 * 3)

    def test_phi_squared(self):
        assert PHI * PHI == PHI + 1

    def test_inverse_property_randomized(self):
        rng = random.Random(20240601)
        checked = 0
        while checked < 100:
            x = QuadraticValue(Fraction(rng.randint(-9, 9), rng.randint(1, 9)),
                               Fraction(rng.randint(-9, 9), rng.randint(1, 9)))
            if not x:
                continue
            assert quad_arith("inv", x) * x == QuadraticValue(1)
            checked += 1

    @given(small_fractions, small_fractions, small_fractions, small_fractions)
    def test_ordering_matches_floats(self, a, b, c, d):
        x, y = QuadraticValue(a, b), QuadraticValue(c, d)
        fx, fy = float(x), float(y)
        if abs(fx - fy) > 1e-9:
            assert (x < y) == (fx < fy)

    def test_unique_representation(self):
        assert QuadraticValue(Fraction(2, 4), Fraction(1, 2)) == PHI
        assert hash(QuadraticValue(Fraction(1, 2))) == hash(Fraction(1, 2))
        assert QuadraticValue(1, 1) != QuadraticValue(1, 0)

    def test_immutable(self):
        with pytest.raises(AttributeError):
            PHI.q = 0


def sqrt5_decimal_digits(places: int) -> Fraction:
    """floor(sqrt(5) * 10**places) / 10**places, by integer square root."""
    return Fraction(math.isqrt(5 * 10 ** (2 * places)), 10 ** places)


class TestApprox:
    def test_zero_exact(self):
        assert quad_approx(QuadraticValue(0), 16) == (Decimal(0), 0)

    @pytest.mark.parametrize("x,coeff,shift,digits", [
        (PHI, Fraction(1, 2), Fraction(1, 2), "1.6180339887"),
        (2 - PHI, Fraction(-1, 2), Fraction(3, 2), "0.3819660112"),
    ])
    def test_forty_bits_against_long_division(self, x, coeff, shift, digits):
        value, err = quad_approx(x, 40)
        assert 2 * err <= Fraction(1, 2 ** 40)
        places = 40
        oracle = shift + coeff * sqrt5_decimal_digits(places)
        # oracle is within |coeff| * 10**-40 of x
        assert abs(Fraction(value) - oracle) <= err + Fraction(1, 10 ** places)
        assert str(value).startswith(digits)

    @given(small_fractions, small_fractions, st.integers(8, 200))
    @settings(max_examples=60)
    def test_interval_contains_value(self, p, q, bits):
        x = QuadraticValue(p, q)
        value, err = quad_approx(x, bits)
        assert 2 * err <= Fraction(1, 2 ** bits)
        lo, hi = Fraction(value) - err, Fraction(value) + err
        assert (x - lo).sign() >= 0 and (QuadraticValue(hi) - x).sign() >= 0

    def test_bits_precondition(self):
        with pytest.raises(ValueError):
            quad_approx(PHI, 4)


def iterate_fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


class TestFibonacci:
    def test_examples(self):
        assert fib(0) == 0
        assert fib(4) == 3
        assert fib(30) == iterate_fib(30) == 832040

    def test_fast_doubling_far_index(self):
        cache = FibCache()
        n = FibCache.ITERATIVE_REACH * 3
        assert cache.get(n) == iterate_fib(n)
        assert len(cache) < n  # came from fast doubling, not the table

    def test_cassini(self):
        for n in range(1, 501):
            assert fib(n + 1) * fib(n - 1) - fib(n) ** 2 == (-1) ** n

    def test_binet_examples(self):
        assert fib_binet(0) == QuadraticValue(0)
        assert fib_binet(4) == QuadraticValue(3)
        assert fib_binet(50) == QuadraticValue(fib(50))

    def test_binet_agrees(self):
        for n in range(301):
            b = fib_binet(n)
            assert b.q == 0 and b.p == fib(n)

    def test_negative_index(self):
        with pytest.raises(ValueError):
            fib(-1)

    def test_concurrent_calls_agree(self):
        cache = FibCache()
        results = {}

        def work(tid):
            results[tid] = [cache.get(n) for n in range(0, 3000, 7)] + [cache.get(20000 + tid)]

        threads = [threading.Thread(target=work, args=(t,)) for t in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        expected = [iterate_fib(n) for n in range(0, 3000, 7)]
        for tid, values in results.items():
            assert values[:-1] == expected
            assert values[-1] == iterate_fib(20000 + tid)

    def test_phi_inverse_is_phi_minus_one(self):
        assert PHI_INV == PHI - 1


def test_quadratic_pickles():
    assert pickle.loads(pickle.dumps(PHI)) == PHI
