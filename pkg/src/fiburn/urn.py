"""Integer urn compositions that realize a probability sequence by additions only.

State pairs are (blue, red); a_i is the chance of drawing blue at step i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .dsl import SequenceExpr, evaluate
from .numerics import FibCache


class InvalidProbability(ValueError):
    def __init__(self, step: int, value: Fraction):
        self.step = step
        self.value = value
        super().__init__(f"a_{step} = {value} is not a probability")


class NotRealizable(ValueError):
    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}")


@dataclass(frozen=True)
class UrnState:
    blue: int
    red: int

    @property
    def total(self) -> int:
        return self.blue + self.red

    def blue_fraction(self) -> Fraction:
        return Fraction(self.blue, self.total)


@dataclass
class UrnTrace:
    states: list[UrnState] = field(default_factory=list)

    @property
    def additions(self) -> list[tuple[int, int]]:
        return additions(self)

    def rows(self) -> list[dict]:
        """One row per step; d_blue/d_red are the balls added to reach it."""
        out = []
        prev = None
        for step, st in enumerate(self.states, start=1):
            row = {"step": step, "blue": st.blue, "red": st.red, "d_blue": None, "d_red": None}
            if prev is not None:
                row["d_blue"], row["d_red"] = st.blue - prev.blue, st.red - prev.red
            out.append(row)
            prev = st
        return out


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def next_state(prev: UrnState | None, a: Fraction, step: int) -> UrnState:
    """Smallest multiple of (p, q-p) dominating ``prev`` componentwise."""
    if a < 0 or a > 1:
        raise InvalidProbability(step, a)
    p, q = a.numerator, a.denominator
    blue_unit, red_unit = p, q - p
    if prev is None:
        return UrnState(blue_unit, red_unit)
    if blue_unit == 0 and prev.blue > 0:
        raise NotRealizable(step, f"a_{step} = 0 needs the {prev.blue} blue ball(s) removed")
    if red_unit == 0 and prev.red > 0:
        raise NotRealizable(step, f"a_{step} = 1 needs the {prev.red} red ball(s) removed")
    m = 1
    if blue_unit:
        m = max(m, _ceil_div(prev.blue, blue_unit))
    if red_unit:
        m = max(m, _ceil_div(prev.red, red_unit))
    return UrnState(m * blue_unit, m * red_unit)


def realize_values(values) -> UrnTrace:
    trace = UrnTrace()
    prev = None
    for step, a in enumerate(values, start=1):
        prev = next_state(prev, Fraction(a), step)
        trace.states.append(prev)
    return trace


def realize(expr: SequenceExpr, n: int, cache: FibCache | None = None) -> UrnTrace:
    """Urn contents for steps 1..n under the minimal-multiplier rule."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return realize_values(evaluate(expr, i, cache) for i in range(1, n + 1))


def additions(trace: UrnTrace) -> list[tuple[int, int]]:
    """Balls added between consecutive states, as (d_blue, d_red)."""
    if not trace.states:
        raise ValueError("empty trace")
    return [(b.blue - a.blue, b.red - a.red) for a, b in zip(trace.states, trace.states[1:])]
