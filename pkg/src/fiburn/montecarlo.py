"""Draw-until-red simulation as an independent check of 1 - a_1...a_n.

Generator: SplitMix64 with the standard constants below.  Each
replication r gets its own stream whose initial state is
``mix64((mix64(seed) + r) mod 2**64)``, so results do not depend on the
order in which replications run.  Changing any of this is a breaking
change to reproducibility.

Bernoulli(p/q) events use an exact uniform integer u in [0, q) assembled
from 64-bit words with rejection (no modulo bias, no floats); the draw is
blue iff u < p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .dsl import SequenceExpr, evaluate
from .numerics import FibCache
from .urn import InvalidProbability

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
DEFAULT_SEED = 42
DEFAULT_REPLICATIONS = 100_000
DEFAULT_MAX_DRAWS = 64
Z_LIMIT = 3


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, state: int):
        self.state = state & MASK64

    @classmethod
    def for_replication(cls, seed: int, rep: int) -> "SplitMix64":
        return cls(mix64((mix64(seed & MASK64) + rep) & MASK64))

    def next64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def below(self, q: int) -> int:
        """Uniform integer in [0, q)."""
        if q < 1:
            raise ValueError("q must be positive")
        if q == 1:
            return 0
        bits = (q - 1).bit_length()
        words = -(-bits // 64)
        drop = 64 * words - bits
        while True:
            x = 0
            for _ in range(words):
                x = (x << 64) | self.next64()
            x >>= drop
            if x < q:
                return x


@dataclass(frozen=True)
class SimConfig:
    seed: int = DEFAULT_SEED
    replications: int = DEFAULT_REPLICATIONS
    max_draws: int = DEFAULT_MAX_DRAWS

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.max_draws < 1:
            raise ValueError("max_draws must be >= 1")


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    hit_count: int
    stopping_histogram: dict[int, int] = field(hash=False)
    analytic_p: Fraction
    z_score: float

    def survival(self, n: int) -> Fraction:
        """Empirical P(T > n)."""
        stopped = sum(c for k, c in self.stopping_histogram.items() if k <= n)
        return Fraction(self.config.replications - stopped, self.config.replications)


def z_score(hits: int, replications: int, p: Fraction) -> float:
    """(hits - R p) / sqrt(R p (1 - p)); 0 for degenerate p with exact agreement."""
    p = Fraction(p)
    excess = hits - replications * p
    var = replications * p * (1 - p)
    if var == 0:
        return 0.0 if excess == 0 else math.copysign(math.inf, excess)
    return float(excess) / math.sqrt(float(var))


def _probabilities(expr: SequenceExpr, n: int, cache: FibCache | None):
    out = []
    for i in range(1, n + 1):
        a = evaluate(expr, i, cache)
        if a < 0 or a > 1:
            raise InvalidProbability(i, a)
        out.append((a.numerator, a.denominator))
    return out


def simulate(expr: SequenceExpr, config: SimConfig = SimConfig(), cache: FibCache | None = None) -> SimResult:
    probs = _probabilities(expr, config.max_draws, cache)
    histogram: dict[int, int] = {}
    for rep in range(config.replications):
        rng = SplitMix64.for_replication(config.seed, rep)
        for draw, (p, q) in enumerate(probs, start=1):
            if p == q:
                continue  # blue is certain
            if p == 0 or rng.below(q) >= p:
                histogram[draw] = histogram.get(draw, 0) + 1
                break
    hits = sum(histogram.values())
    analytic = 1 - math.prod((Fraction(p, q) for p, q in probs), start=Fraction(1))
    return SimResult(
        config=config,
        hit_count=hits,
        stopping_histogram=dict(sorted(histogram.items())),
        analytic_p=analytic,
        z_score=z_score(hits, config.replications, analytic),
    )


def compare_analytic(result: SimResult) -> tuple[bool, float]:
    """Pass iff |z| <= 3 (exact agreement required when p is 0 or 1)."""
    z = z_score(result.hit_count, result.config.replications, result.analytic_p)
    return abs(z) <= Z_LIMIT, z
