"""A tiny language for ratio sequences a_i over shifted Fibonacci factors.

Grammar (whitespace is ignored)::

    expr   := term { ("*" | "/") term } ;
    term   := factor [ "^" INT ] ;
    factor := "F" "(" index ")" | INT | "(" expr ")" ;
    index  := "i" [ ("+" | "-") INT ] ;
    INT    := nonzero decimal integer ;

``/`` is left-associative and ``^`` binds tighter than ``*`` and ``/``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .numerics import DEFAULT_CACHE, FibCache

MIN_SHIFT = -1


class DSLError(ValueError):
    """Base class for expression errors; ``offset`` is a byte offset or None."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")
        self.message = message


class DSLSyntaxError(DSLError):
    pass


class ShiftValidationError(DSLError):
    pass


class EvaluationError(ArithmeticError):
    """Raised when a_i cannot be evaluated (a zero denominator)."""


@dataclass(frozen=True)
class FibFactor:
    shift: int


@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class Power:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Mul:
    factors: tuple["Node", ...]


@dataclass(frozen=True)
class Div:
    numerator: "Node"
    denominator: "Node"


Node = Union[FibFactor, IntConst, Power, Mul, Div]
SequenceExpr = Node


_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<sym>[F()i+\-*/^]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    encoded_upto = 0
    byte_pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            byte_pos += len(text[encoded_upto:start].encode())
            encoded_upto = start
            raise DSLSyntaxError(f"unexpected character {text[start]!r}", byte_pos)
        kind = "int" if m.group("int") is not None else m.group("sym")
        start = m.start(kind if kind == "int" else "sym")
        byte_pos += len(text[encoded_upto:start].encode())
        encoded_upto = start
        tokens.append((kind, m.group(0).strip(), byte_pos))
        pos = m.end()
    end = byte_pos + len(text[encoded_upto:].encode())
    tokens.append(("end", "", end))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind: str, what: str):
        tok = self.peek()
        if tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise DSLSyntaxError(f"expected {what}, found {found}", tok[2])
        self.pos += 1
        return tok

    def integer(self, what: str) -> int:
        tok = self.take("int", what)
        value = int(tok[1])
        if value == 0 or tok[1].startswith("0"):
            raise DSLSyntaxError(f"{what} must be a nonzero decimal integer", tok[2])
        return value

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise DSLSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        run: list[Node] | None = None
        while self.peek()[0] in ("*", "/"):
            op = self.take(self.peek()[0], "operator")[0]
            rhs = self.term()
            if op == "*":
                if run is None:
                    run = [node]
                run.append(rhs)
                node = Mul(tuple(run))
            else:
                run = None
                node = Div(node, rhs)
        return node

    def term(self) -> Node:
        base = self.factor()
        if self.peek()[0] == "^":
            self.pos += 1
            return Power(base, self.integer("exponent"))
        return base

    def factor(self) -> Node:
        kind, _, offset = self.peek()
        if kind == "F":
            self.pos += 1
            self.take("(", "'('")
            shift_offset = self.peek()[2]
            self.take("i", "index variable 'i'")
            shift = 0
            if self.peek()[0] in ("+", "-"):
                sign = 1 if self.take(self.peek()[0], "sign")[0] == "+" else -1
                shift = sign * self.integer("index offset")
            self.take(")", "')'")
            if shift < MIN_SHIFT:
                raise ShiftValidationError(
                    f"F(i{shift:+d}) needs F at a negative index for i=1; "
                    f"shifts must be >= {MIN_SHIFT}",
                    shift_offset,
                )
            return FibFactor(shift)
        if kind == "int":
            return IntConst(self.integer("integer constant"))
        if kind == "(":
            self.pos += 1
            node = self.expr()
            self.take(")", "')'")
            return node
        self.take("factor", "F(...), an integer or '('")
        raise AssertionError("unreachable")


def parse(text: str) -> SequenceExpr:
    """Parse and validate a sequence definition."""
    return _Parser(text).parse()


def validate(expr: SequenceExpr) -> SequenceExpr:
    """Check the AST invariants of a programmatically built expression."""
    for node in walk(expr):
        if isinstance(node, FibFactor) and node.shift < MIN_SHIFT:
            raise ShiftValidationError(f"shift {node.shift} below {MIN_SHIFT}")
        if isinstance(node, IntConst) and node.value < 1:
            raise DSLError(f"integer constants must be >= 1, got {node.value}")
        if isinstance(node, Power) and node.exponent < 1:
            raise DSLError(f"exponents must be >= 1, got {node.exponent}")
    return expr


def walk(expr: SequenceExpr):
    yield expr
    if isinstance(expr, Power):
        yield from walk(expr.base)
    elif isinstance(expr, Mul):
        for f in expr.factors:
            yield from walk(f)
    elif isinstance(expr, Div):
        yield from walk(expr.numerator)
        yield from walk(expr.denominator)


def to_text(expr: SequenceExpr) -> str:
    """Print an AST so that ``parse(to_text(e)) == e``."""
    if isinstance(expr, FibFactor):
        if expr.shift == 0:
            return "F(i)"
        return f"F(i{expr.shift:+d})"
    if isinstance(expr, IntConst):
        return str(expr.value)
    if isinstance(expr, Power):
        base = to_text(expr.base)
        if not isinstance(expr.base, (FibFactor, IntConst)):
            base = f"({base})"
        return f"{base}^{expr.exponent}"
    if isinstance(expr, Mul):
        parts = []
        for f in expr.factors:
            s = to_text(f)
            parts.append(f"({s})" if isinstance(f, (Mul, Div)) else s)
        return "*".join(parts)
    if isinstance(expr, Div):
        num = to_text(expr.numerator)
        den = to_text(expr.denominator)
        if isinstance(expr.denominator, (Mul, Div)):
            den = f"({den})"
        return f"{num}/{den}"
    raise TypeError(f"not a sequence expression: {expr!r}")


@dataclass(frozen=True)
class Monomial:
    """Normal form ``const * prod F(i+s)**exps[s]`` with signed exponents."""

    const: Fraction
    exps: tuple[tuple[int, int], ...]

    def reciprocal(self) -> "Monomial":
        return Monomial(1 / self.const, tuple((s, -e) for s, e in self.exps))


def monomial(expr: SequenceExpr) -> Monomial:
    """Collapse an AST into its monomial normal form."""
    const, exps = _collect(expr)
    return Monomial(const, tuple(sorted((s, e) for s, e in exps.items() if e)))


def _collect(expr) -> tuple[Fraction, Counter]:
    if isinstance(expr, FibFactor):
        return Fraction(1), Counter({expr.shift: 1})
    if isinstance(expr, IntConst):
        return Fraction(expr.value), Counter()
    if isinstance(expr, Power):
        c, e = _collect(expr.base)
        return c ** expr.exponent, Counter({s: k * expr.exponent for s, k in e.items()})
    if isinstance(expr, Mul):
        c, e = Fraction(1), Counter()
        for f in expr.factors:
            fc, fe = _collect(f)
            c *= fc
            e.update(fe)
        return c, e
    if isinstance(expr, Div):
        nc, ne = _collect(expr.numerator)
        dc, de = _collect(expr.denominator)
        ne.subtract(de)
        return nc / dc, ne
    raise TypeError(f"not a sequence expression: {expr!r}")


def evaluate_monomial(mono: Monomial, i: int, cache: FibCache | None = None) -> Fraction:
    cache = cache or DEFAULT_CACHE
    num, den = mono.const.numerator, mono.const.denominator
    for s, e in mono.exps:
        f = cache.get(i + s)
        if e > 0:
            num *= f ** e
        else:
            den *= f ** -e
    if den == 0:
        raise EvaluationError(f"zero denominator evaluating a_{i}")
    return Fraction(num, den)


def evaluate(expr: SequenceExpr, i: int, cache: FibCache | None = None) -> Fraction:
    """Exact value of a_i for i >= 1."""
    if i < 1:
        raise ValueError(f"evaluation index must be >= 1, got {i}")
    return _eval(expr, i, cache or DEFAULT_CACHE)


def _eval(expr, i, cache) -> Fraction:
    if isinstance(expr, FibFactor):
        return Fraction(cache.get(i + expr.shift))
    if isinstance(expr, IntConst):
        return Fraction(expr.value)
    if isinstance(expr, Power):
        return _eval(expr.base, i, cache) ** expr.exponent
    if isinstance(expr, Mul):
        out = Fraction(1)
        for f in expr.factors:
            out *= _eval(f, i, cache)
        return out
    if isinstance(expr, Div):
        den = _eval(expr.denominator, i, cache)
        if den == 0:
            raise EvaluationError(f"zero denominator evaluating a_{i}")
        return _eval(expr.numerator, i, cache) / den
    raise TypeError(f"not a sequence expression: {expr!r}")


@dataclass(frozen=True, order=True)
class FamilyParams:
    """a_i = F(i+s1)^e1 F(i+s2)^e2 / (c F(i+t1)^f1 F(i+t2)^f2).

    An exponent of 0 drops its factor; the shift of a dropped factor is
    ignored.  Field order is the lexicographic enumeration order.
    """

    s1: int = 0
    e1: int = 0
    s2: int = 0
    e2: int = 0
    t1: int = 0
    f1: int = 0
    t2: int = 0
    f2: int = 0
    c: int = 1

    def as_tuple(self) -> tuple[int, ...]:
        return (self.s1, self.e1, self.s2, self.e2, self.t1, self.f1, self.t2, self.f2, self.c)

    def numerator_factors(self) -> list[tuple[int, int]]:
        return [(s, e) for s, e in ((self.s1, self.e1), (self.s2, self.e2)) if e]

    def denominator_factors(self) -> list[tuple[int, int]]:
        return [(t, f) for t, f in ((self.t1, self.f1), (self.t2, self.f2)) if f]

    def swapped(self) -> "FamilyParams":
        """Numerator/denominator swap (only meaningful when c == 1)."""
        return FamilyParams(self.t1, self.f1, self.t2, self.f2, self.s1, self.e1, self.s2, self.e2, self.c)


def _fib_power(shift: int, exponent: int) -> Node:
    return FibFactor(shift) if exponent == 1 else Power(FibFactor(shift), exponent)


def family_instantiate(params: FamilyParams) -> SequenceExpr:
    """Build the AST for one member of the two-factor ratio family."""
    for s, _ in params.numerator_factors() + params.denominator_factors():
        if s < MIN_SHIFT:
            raise ShiftValidationError(f"shift {s} below {MIN_SHIFT}")
    if params.c < 1:
        raise DSLError(f"constant must be >= 1, got {params.c}")
    num_parts = [_fib_power(s, e) for s, e in params.numerator_factors()]
    den_parts: list[Node] = [IntConst(params.c)] if params.c > 1 else []
    den_parts += [_fib_power(t, f) for t, f in params.denominator_factors()]
    if not num_parts:
        num: Node = IntConst(1)
    elif len(num_parts) == 1:
        num = num_parts[0]
    else:
        num = Mul(tuple(num_parts))
    if not den_parts:
        return num
    den = den_parts[0] if len(den_parts) == 1 else Mul(tuple(den_parts))
    return Div(num, den)
