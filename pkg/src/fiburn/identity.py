"""Exact complement identity for products and sums of a ratio sequence.

For any sequence a_1, a_2, ... the finite identity

    1 - a_1 a_2 ... a_n  =  sum_{i<=n} a_1 ... a_{i-1} (1 - a_i)

holds for every n, and when the product converges the infinite series sums
to ``1 - lim P_n``.  In urn terms a_i is the chance of a blue draw at step
i and the series counts "first red ball at draw i"; nothing here requires
0 <= a_i <= 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .dsl import (
    Monomial,
    SequenceExpr,
    evaluate_monomial,
    monomial,
)
from .numerics import FibCache, QuadraticValue, format_decimal, sqrt5_scaled

DEFAULT_N_MAX = 200
DEFAULT_TOL = Fraction(1, 10 ** 10)
DEFAULT_K = 12
DEFAULT_BOUNDS = (64, 16)
# ratio margin: the slowest known family has term ratio phi^2/3 ~ 0.873
RATIO_MARGIN = Fraction(1, 16)
# enclosures narrower than this are recognized without further doubling
RESOLVE_WIDTH = Fraction(1, 2 ** 64)
FIRST_CHECKPOINT = 16


class VerificationFailed(AssertionError):
    pass


class RecognitionError(ValueError):
    """The enclosure is too wide for unambiguous recognition at these bounds."""


class AmbiguousConstant(RecognitionError):
    def __init__(self, candidates):
        self.candidates = candidates
        super().__init__(f"{len(candidates)} constants fit the enclosure: "
                         + ", ".join(str(c) for c in candidates[:4]))


class Divergence(ArithmeticError):
    """Raised by a trajectory whose magnitudes pass a divergence cutoff."""

    def __init__(self, n: int, reason: str):
        self.n = n
        super().__init__(f"{reason} at n={n}")


class BudgetExceeded(ArithmeticError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class PartialState:
    n: int = 0
    prefix_product: Fraction = Fraction(1)
    partial_sum: Fraction = Fraction(0)
    last_term: Fraction = Fraction(0)

    @property
    def balanced(self) -> bool:
        return self.partial_sum + self.prefix_product == 1


def advance(state: PartialState, a_next) -> PartialState:
    a_next = Fraction(a_next)
    term = state.prefix_product * (1 - a_next)
    return PartialState(
        n=state.n + 1,
        prefix_product=state.prefix_product * a_next,
        partial_sum=state.partial_sum + term,
        last_term=term,
    )


class Trajectory:
    """Exact a_i, P_i, t_i and S_i, extended on demand.

    Lists are indexed by step: ``products[0] == 1``, ``sums[0] == 0`` and
    ``terms[0]``/``values[0]`` are placeholders.
    """

    def __init__(self, expr: SequenceExpr | Monomial, cache: FibCache | None = None):
        self.monomial = expr if isinstance(expr, Monomial) else monomial(expr)
        self.cache = cache
        self.values: list[Fraction] = [Fraction(0)]
        self.products: list[Fraction] = [Fraction(1)]
        self.terms: list[Fraction] = [Fraction(0)]
        self.sums: list[Fraction] = [Fraction(0)]
        self.first_failure: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def state(self, n: int) -> PartialState:
        self.extend(n)
        return PartialState(n, self.products[n], self.sums[n], self.terms[n] if n else Fraction(0))

    def extend(self, n: int, *, cutoff=None, min_n: int = 16, bit_cap: int | None = None):
        prod, total = self.products[-1], self.sums[-1]
        for i in range(self.n + 1, n + 1):
            a = evaluate_monomial(self.monomial, i, self.cache)
            term = prod * (1 - a)
            prod = prod * a
            total = total + term
            self.values.append(a)
            self.terms.append(term)
            self.products.append(prod)
            self.sums.append(total)
            if self.first_failure is None and total + prod != 1:
                self.first_failure = i
            if cutoff is not None and i >= min_n:
                if abs(prod) > cutoff:
                    raise Divergence(i, "|P_n| above cutoff")
                if abs(term) > cutoff:
                    raise Divergence(i, "|t_n| above cutoff")
            if bit_cap is not None and prod.denominator.bit_length() > bit_cap:
                raise BudgetExceeded(f"denominator of P_{i} exceeds {bit_cap} bits")
        return self


@dataclass(frozen=True)
class Verification:
    n_checked: int
    exact_ok: bool
    first_failure: Optional[int] = None
    tail_bound: Optional[Fraction] = None


def verify_complement_identity(expr, n: int, cache: FibCache | None = None,
                               *, trajectory: Trajectory | None = None) -> Verification:
    """Check ``S_k + P_k == 1`` exactly for every k <= n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = trajectory or Trajectory(expr, cache)
    traj.extend(n)
    failure = traj.first_failure
    if failure is not None and failure > n:
        failure = None
    return Verification(n, failure is None, failure)


@dataclass(frozen=True)
class ProbabilityCheck:
    valid: bool
    first_violation: Optional[int] = None
    value: Optional[Fraction] = None

    def __bool__(self):
        return self.valid


def probability_check(expr, n: int, cache: FibCache | None = None,
                      *, trajectory: Trajectory | None = None) -> ProbabilityCheck:
    """Whether 0 <= a_i <= 1 for every i <= n, with the first offending index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = trajectory or Trajectory(expr, cache)
    traj.extend(n)
    for i in range(1, n + 1):
        a = traj.values[i]
        if a < 0 or a > 1:
            return ProbabilityCheck(False, i, a)
    return ProbabilityCheck(True)


class LimitKind(str, enum.Enum):
    ZERO = "zero"
    RATIONAL = "rational"
    QUADRATIC = "quadratic"
    DIVERGES = "diverges"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class LimitEstimate:
    kind: LimitKind
    value: Optional[QuadraticValue] = None
    enclosure: Optional[tuple[Fraction, Fraction]] = None
    steps_used: int = 0
    tail_bound: Optional[Fraction] = None

    @property
    def resolved(self) -> bool:
        return self.kind in (LimitKind.ZERO, LimitKind.RATIONAL, LimitKind.QUADRATIC)

    def describe(self) -> str:
        if self.kind is LimitKind.ZERO:
            return "0"
        if self.resolved:
            return f"{self.value} ~ {format_decimal(self.value)}"
        if self.enclosure is not None:
            lo, hi = self.enclosure
            return f"{self.kind.value} in [{format_decimal(lo)}, {format_decimal(hi)}]"
        return self.kind.value


def _ratio_upper(num: Fraction, den: Fraction, bits: int = 40) -> Fraction:
    """Dyadic upper bound of |num/den| without big-number gcds."""
    top = abs(num.numerator) * den.denominator
    bottom = abs(den.numerator) * num.denominator
    return Fraction(-((-top << bits) // bottom), 1 << bits)


def tail_bound(terms: list[Fraction], n: int, margin: Fraction = RATIO_MARGIN) -> Optional[Fraction]:
    """Bound |sum_{i>n} t_i| by |t_{n+1}| / (1 - rho).

    rho is the largest ratio |t_{i+1}/t_i| over the window [n/2, n+1]; no
    bound is returned unless rho < 1 - margin.  ``terms`` must reach n+1.
    """
    window = terms[max(1, n // 2): n + 2]
    if all(t == 0 for t in window):
        return Fraction(0)
    rho = Fraction(0)
    for prev, nxt in zip(window, window[1:]):
        if prev == 0:
            if nxt != 0:
                return None
            continue
        if nxt == 0:
            continue
        rho = max(rho, _ratio_upper(nxt, prev))
    if rho >= 1 - margin:
        return None
    return abs(terms[n + 1]) / (1 - rho)


def _gate(bounds) -> Fraction:
    max_num, max_den = bounds
    return Fraction(1, 2 * max_den * max_den * (1 + max_num))


def _contains(lo: Fraction, hi: Fraction, p: Fraction, q: Fraction) -> bool:
    x = QuadraticValue(p, q)
    return (x - lo).sign() >= 0 and (QuadraticValue(hi) - x).sign() >= 0


def recognize_constant(enclosure, bounds=DEFAULT_BOUNDS) -> Optional[QuadraticValue]:
    """Find the unique p + q*sqrt(5) inside ``enclosure`` of bounded height.

    p and q range over rationals with |numerator| <= max_num and
    1 <= denominator <= max_den.  Returns None when nothing fits; raises
    :class:`RecognitionError` when the enclosure is wider than
    ``1/(2 max_den^2 (1 + max_num))`` and :class:`AmbiguousConstant` when more
    than one candidate fits.
    """
    lo, hi = (as_fraction(e) for e in enclosure)
    if lo > hi:
        raise ValueError("enclosure endpoints out of order")
    max_num, max_den = bounds
    if hi - lo >= _gate(bounds):
        raise RecognitionError(
            f"enclosure width {float(hi - lo):.3g} is not below the gate "
            f"{float(_gate(bounds)):.3g} for bounds {tuple(bounds)}")
    k = 96
    scale = 1 << k
    low = math.floor(lo * scale)
    high = math.ceil(hi * scale)
    s5 = sqrt5_scaled(k)  # s5 <= sqrt5 * 2^k < s5 + 1
    found = []
    for d in range(1, max_den + 1):
        for c in range(-max_num, max_num + 1):
            if math.gcd(c, d) != 1:
                continue
            # scaled bracket [ql, qh] of (c/d) sqrt5 * 2^k
            if c >= 0:
                ql, qh = (c * s5) // d, -((-c * (s5 + 1)) // d)
            else:
                ql, qh = (c * (s5 + 1)) // d, -((-c * s5) // d)
            for b in range(1, max_den + 1):
                a_lo = -((-(low - qh) * b) // scale)
                a_hi = ((high - ql) * b) // scale
                for a in range(max(a_lo, -max_num), min(a_hi, max_num) + 1):
                    if math.gcd(a, b) != 1:
                        continue
                    p, q = Fraction(a, b), Fraction(c, d)
                    if _contains(lo, hi, p, q):
                        found.append(QuadraticValue(p, q))
    if not found:
        return None
    if len(found) > 1:
        raise AmbiguousConstant(sorted(found))
    return found[0]


def _estimate_at(traj: Trajectory, n: int, tol: Fraction, bounds, final: bool) -> Optional[LimitEstimate]:
    """Classify at checkpoint n; None means "double n and retry"."""
    p_n = traj.products[n]
    if p_n == 0:
        return LimitEstimate(LimitKind.ZERO, QuadraticValue(0), (Fraction(0), Fraction(0)), n, Fraction(0))
    if abs(p_n) > 1 / tol:
        return LimitEstimate(LimitKind.DIVERGES, steps_used=n)
    bound = tail_bound(traj.terms, n)
    if bound is None:
        return LimitEstimate(LimitKind.UNRESOLVED, steps_used=n) if final else None
    lo, hi = p_n - bound, p_n + bound
    if -tol < lo and hi < tol:
        return LimitEstimate(LimitKind.ZERO, QuadraticValue(0), (min(lo, 0), max(hi, 0)), n, bound)
    if not final and hi - lo > RESOLVE_WIDTH:
        return None
    value = None
    if lo == hi:
        value = QuadraticValue(lo)
    else:
        try:
            value = recognize_constant((lo, hi), bounds)
        except RecognitionError:
            value = None
    if value is None:
        if final:
            return LimitEstimate(LimitKind.UNRESOLVED, None, (lo, hi), n, bound)
        return None
    if not value:
        kind = LimitKind.ZERO
    else:
        kind = LimitKind.RATIONAL if value.is_rational() else LimitKind.QUADRATIC
    return LimitEstimate(kind, value, (lo, hi), n, bound)


def estimate_limit(expr, n_max: int = DEFAULT_N_MAX, tol=DEFAULT_TOL, bounds=DEFAULT_BOUNDS,
                   cache: FibCache | None = None, *, trajectory: Trajectory | None = None) -> LimitEstimate:
    """Estimate lim P_n by exact prefix products and a stabilized-ratio tail bound.

    Checkpoints start at n = 16 and double up to ``n_max``.
    """
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    tol = as_fraction(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    traj = trajectory or Trajectory(expr, cache)
    n = min(FIRST_CHECKPOINT, n_max)
    while True:
        traj.extend(n + 1)
        est = _estimate_at(traj, n, tol, bounds, final=(n == n_max))
        if est is not None:
            return est
        n = min(2 * n, n_max)


def pattern_start(mono: Monomial, terms: list[Fraction]) -> int:
    """First index of the general summand pattern.

    The prefix product a_1...a_{i-1} reaches its stable telescoped form once
    i-1 covers the widest gap between paired numerator and denominator
    shifts; structural zero terms after that are also skipped.
    """
    num = sorted(s for s, e in mono.exps if e > 0 for _ in range(e))
    den = sorted(s for s, e in mono.exps if e < 0 for _ in range(-e))
    span = max((abs(s - t) for s, t in zip(num, den)), default=0)
    start = span + 1
    while start < len(terms) and terms[start] == 0:
        start += 1
    return start


@dataclass
class IdentityReport:
    sequence: SequenceExpr
    start_index: int
    summand_values: list[Fraction]
    limit: LimitEstimate
    sum_value: Optional[QuadraticValue]
    probability_valid: bool
    verification: Verification
    first_violation: Optional[int] = None
    final_state: Optional[PartialState] = field(default=None, repr=False)

    @property
    def leading_terms(self) -> list[Fraction]:
        return self.summand_values[: self.start_index - 1]

    @property
    def leading_sum(self) -> Fraction:
        return sum(self.leading_terms, Fraction(0))

    def split_value(self, start: Optional[int] = None) -> Optional[QuadraticValue]:
        """Series value from ``start`` on (default: the detected pattern start)."""
        if self.sum_value is None:
            return None
        start = self.start_index if start is None else start
        if start - 1 > len(self.summand_values):
            raise ValueError("start beyond the recorded summands")
        return self.sum_value - sum(self.summand_values[: start - 1], Fraction(0))


def derive_identity(expr, n_max: int = DEFAULT_N_MAX, tol=DEFAULT_TOL, k: int = DEFAULT_K,
                    bounds=DEFAULT_BOUNDS, cache: FibCache | None = None,
                    *, trajectory: Trajectory | None = None) -> IdentityReport:
    """Verify the finite identity up to n_max and report the infinite series."""
    traj = trajectory or Trajectory(expr, cache)
    verification = verify_complement_identity(expr, n_max, trajectory=traj)
    if not verification.exact_ok:
        raise VerificationFailed(f"S_n + P_n != 1 at n={verification.first_failure}")
    limit = estimate_limit(expr, n_max, tol, bounds, trajectory=traj)
    traj.extend(max(n_max + 1, k))
    verification = Verification(n_max, True, None, tail_bound(traj.terms, n_max))
    prob = probability_check(expr, n_max, trajectory=traj)
    sum_value = 1 - limit.value if limit.resolved else None
    return IdentityReport(
        sequence=expr,
        start_index=pattern_start(traj.monomial, traj.terms),
        summand_values=traj.terms[1: k + 1],
        limit=limit,
        sum_value=sum_value,
        probability_valid=prob.valid,
        verification=verification,
        first_violation=prob.first_violation,
        final_state=traj.state(n_max),
    )
