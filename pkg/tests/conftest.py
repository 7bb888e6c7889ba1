from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import pytest

from fiburn.dsl import FamilyParams
from fiburn.numerics import PHI, PHI_INV, QuadraticValue, fib
from fiburn.search import GridBounds, SearchConfig, search


@dataclass(frozen=True)
class KnownIdentity:
    name: str
    expr: str
    params: FamilyParams
    start: int
    summand: Callable[[int], Fraction]
    split_target: QuadraticValue
    total: QuadraticValue
    limit: QuadraticValue


F = fib

KNOWN = [
    KnownIdentity("E1", "F(i)/F(i+1)", FamilyParams(s1=0, e1=1, t1=1, f1=1), 2,
                  lambda i: Fraction(F(i - 1), F(i) * F(i + 1)),
                  QuadraticValue(1), QuadraticValue(1), QuadraticValue(0)),
    KnownIdentity("E2", "F(i+1)/(2*F(i))", FamilyParams(s1=1, e1=1, t1=0, f1=1, c=2), 3,
                  lambda i: Fraction(F(i - 2), 2 ** i),
                  QuadraticValue(Fraction(1, 2)), QuadraticValue(1), QuadraticValue(0)),
    KnownIdentity("E3", "F(i+2)/(3*F(i))", FamilyParams(s1=2, e1=1, t1=0, f1=1, c=3), 3,
                  lambda i: Fraction(F(i + 1) * F(i - 2), 3 ** i),
                  QuadraticValue(Fraction(2, 3)), QuadraticValue(1), QuadraticValue(0)),
    KnownIdentity("E4", "F(i)/F(i+2)", FamilyParams(s1=0, e1=1, t1=2, f1=1), 3,
                  lambda i: Fraction(1, F(i) * F(i + 2)),
                  QuadraticValue(Fraction(1, 6)), QuadraticValue(1), QuadraticValue(0)),
    KnownIdentity("E5", "F(i)/F(i+3)", FamilyParams(s1=0, e1=1, t1=3, f1=1), 4,
                  lambda i: Fraction(4, F(i) * F(i + 2) * F(i + 3)),
                  QuadraticValue(Fraction(1, 60)), QuadraticValue(1), QuadraticValue(0)),
    KnownIdentity("E6", "F(i+1)^2/(F(i)*F(i+2))", FamilyParams(s1=1, e1=2, t1=0, f1=1, t2=2, f2=1), 2,
                  lambda i: Fraction((-1) ** (i + 1), F(i + 1) * F(i + 2)),
                  Fraction(1, 2) - PHI_INV, 1 - PHI_INV, PHI_INV),
    KnownIdentity("E7", "F(i)*F(i+2)/F(i+1)^2", FamilyParams(s1=0, e1=1, s2=2, e2=1, t1=1, f1=2), 2,
                  lambda i: Fraction((-1) ** i, F(i) * F(i + 1)),
                  2 - PHI, 1 - PHI, PHI),
]
KNOWN_BY_NAME = {p.name: p for p in KNOWN}

ACCEPTANCE_GRID = GridBounds(3, 2, 3)
ACCEPTANCE_CONFIG = SearchConfig(n_max=200)


@pytest.fixture(scope="session")
def acceptance_search():
    return search(ACCEPTANCE_GRID, ACCEPTANCE_CONFIG)


CRITERIA: list[str] = []


@contextmanager
def criterion(number: int, title: str):
    """Record one PASS/FAIL line for an acceptance criterion."""
    try:
        yield
    except BaseException as exc:
        line = f"FAIL criterion {number}: {title} ({type(exc).__name__})"
        CRITERIA.append(line)
        print(line)
        raise
    line = f"PASS criterion {number}: {title}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
