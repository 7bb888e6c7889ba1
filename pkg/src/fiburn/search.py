"""Grid search over two-factor Fibonacci ratio families.

Every candidate a_i is run through the exact identity engine; candidates
whose product limit is recognized become discoveries ``sum t_i = 1 - L``.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from .dsl import (
    MIN_SHIFT,
    EvaluationError,
    FamilyParams,
    family_instantiate,
    monomial,
    to_text,
)
from .identity import (
    DEFAULT_BOUNDS,
    DEFAULT_K,
    DEFAULT_N_MAX,
    DEFAULT_TOL,
    BudgetExceeded,
    Divergence,
    IdentityReport,
    LimitKind,
    Trajectory,
    VerificationFailed,
    derive_identity,
)
from .numerics import FibCache

log = logging.getLogger(__name__)

STREAM_LENGTH = 8


@dataclass(frozen=True)
class GridBounds:
    s_max: int
    e_max: int
    c_max: int

    @classmethod
    def parse(cls, text: str) -> "GridBounds":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"grid must be 'S,E,C', got {text!r}")
        s, e, c = (int(p) for p in parts)
        if s < MIN_SHIFT or e < 0 or c < 0:
            raise ValueError(f"grid bounds out of range: {text!r}")
        return cls(s, e, c)


@dataclass(frozen=True)
class SearchConfig:
    n_max: int = DEFAULT_N_MAX
    tol: Fraction = DEFAULT_TOL
    k: int = DEFAULT_K
    bounds: tuple[int, int] = DEFAULT_BOUNDS
    cutoff: int = 10 ** 9
    bit_cap: int = 2 ** 20


@dataclass
class Discovery:
    params: FamilyParams
    report: IdentityReport
    novelty_key: str
    reciprocal: Optional[FamilyParams] = None
    merged: list[FamilyParams] = field(default_factory=list)

    @property
    def expression(self) -> str:
        return to_text(self.report.sequence)

    def stream_key(self) -> tuple:
        terms = list(self.report.summand_values)
        while terms and terms[0] == 0:
            terms.pop(0)
        return (self.report.sum_value, tuple(terms[:STREAM_LENGTH]))


@dataclass
class SearchResult:
    discoveries: list[Discovery]
    log: list[str]
    candidates: int
    discarded: dict[str, int]


def _side_ok(pairs) -> bool:
    (s1, e1), (s2, e2) = pairs
    if e1 == 0:
        return s1 == 0 and e2 == 0 and s2 == 0
    if e2 == 0:
        return s2 == 0
    return s1 < s2


def is_canonical(p: FamilyParams) -> bool:
    """One tuple per distinct ratio: unused slots zeroed, used shifts increasing,
    no shift on both sides, and at least one denominator factor or c > 1."""
    if not _side_ok(((p.s1, p.e1), (p.s2, p.e2))):
        return False
    if not _side_ok(((p.t1, p.f1), (p.t2, p.f2))):
        return False
    num = {s for s, _ in p.numerator_factors()}
    den = {t for t, _ in p.denominator_factors()}
    if num & den:
        return False
    return bool(den) or p.c > 1


def enumerate_candidates(grid: GridBounds) -> Iterator[FamilyParams]:
    """Canonical parameter tuples in lexicographic order."""
    shifts = range(MIN_SHIFT, grid.s_max + 1)
    exps = range(0, grid.e_max + 1)
    consts = range(1, grid.c_max + 1)
    for t in itertools.product(shifts, exps, shifts, exps, shifts, exps, shifts, exps, consts):
        params = FamilyParams(*t)
        if is_canonical(params):
            yield params


def novelty_key(params: FamilyParams, report: IdentityReport) -> str:
    mono = monomial(report.sequence)
    factors = ";".join(f"F{s:+d}^{e}" for s, e in mono.exps)
    value = report.limit.value
    return f"{mono.const}|{factors}|{value.p},{value.q}"


def evaluate_candidate(params: FamilyParams, config: SearchConfig = SearchConfig(),
                       cache: FibCache | None = None, problems: list | None = None) -> Optional[Discovery]:
    """Discovery for one parameter tuple, or None when it is discarded."""
    reason = _discard_reason(params, config, cache)
    if isinstance(reason, Discovery):
        return reason
    kind, detail = reason
    if kind == "error":
        msg = f"{params.as_tuple()}: {detail}"
        log.debug("discarded %s", msg)
        if problems is not None:
            problems.append(msg)
    return None


def _discard_reason(params, config, cache):
    expr = family_instantiate(params)
    traj = Trajectory(expr, cache)
    try:
        traj.extend(config.n_max + 1, cutoff=config.cutoff, bit_cap=config.bit_cap)
        report = derive_identity(expr, config.n_max, config.tol, config.k, config.bounds, trajectory=traj)
    except EvaluationError as exc:
        return "error", str(exc)
    except BudgetExceeded as exc:
        return "error", str(exc)
    except Divergence:
        return "diverges", None
    except VerificationFailed as exc:
        return "error", f"verification failed: {exc}"
    if report.limit.kind is LimitKind.DIVERGES:
        return "diverges", None
    if not report.limit.resolved:
        return "unresolved", None
    n = config.n_max
    if report.sum_value == 0 or all(t == 0 for t in traj.terms[n // 2: n + 2]):
        return "degenerate", None
    disc = Discovery(params, report, "")
    disc.novelty_key = novelty_key(params, report)
    return disc


def _shift_size(p: FamilyParams) -> tuple:
    used = [s for s, _ in p.numerator_factors()] + [t for t, _ in p.denominator_factors()]
    return (sum(abs(s) for s in used), p.as_tuple())


def dedupe(discoveries: list[Discovery]) -> list[Discovery]:
    """Merge duplicates and cross-link reciprocal pairs.

    Discoveries sharing a novelty key, or whose summand streams agree once
    leading zero terms are dropped (index-shifted copies), collapse onto the
    member with the smallest shifts.  Reciprocal ratios stay separate and
    point at each other.
    """
    by_key: dict[str, Discovery] = {}
    for d in sorted(discoveries, key=lambda d: _shift_size(d.params)):
        kept = by_key.get(d.novelty_key)
        if kept is None:
            by_key[d.novelty_key] = d
        else:
            kept.merged.append(d.params)
    by_stream: dict[tuple, Discovery] = {}
    for d in sorted(by_key.values(), key=lambda d: _shift_size(d.params)):
        sk = d.stream_key()
        kept = by_stream.get(sk)
        if kept is None:
            by_stream[sk] = d
        else:
            kept.merged.append(d.params)
            kept.merged.extend(d.merged)
    kept = sorted(by_stream.values(), key=lambda d: d.params.as_tuple())
    by_mono = {}
    for d in kept:
        by_mono[monomial(d.report.sequence)] = d
    for d in kept:
        mono = monomial(d.report.sequence)
        other = by_mono.get(mono.reciprocal())
        if other is not None and other is not d:
            d.reciprocal = other.params
    for d in kept:
        d.merged.sort(key=FamilyParams.as_tuple)
    return kept


def _evaluate_chunk(args):
    params_list, config = args
    problems: list[str] = []
    out = []
    for params in params_list:
        reason = _discard_reason(params, config, None)
        if isinstance(reason, Discovery):
            out.append(("ok", reason))
        else:
            kind, detail = reason
            if kind == "error":
                problems.append(f"{params.as_tuple()}: {detail}")
            out.append((kind, None))
    return out, problems


def search(grid: GridBounds, config: SearchConfig = SearchConfig(), workers: int = 1) -> SearchResult:
    """Enumerate, evaluate and dedupe; output is ordered by parameters."""
    candidates = list(enumerate_candidates(grid))
    if workers > 1 and len(candidates) > 1:
        size = max(1, len(candidates) // (4 * workers))
        chunks = [(candidates[i:i + size], config) for i in range(0, len(candidates), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, chunks))
    else:
        parts = [_evaluate_chunk((candidates, config))]
    found, problems, discarded = [], [], {}
    for outcomes, errs in parts:
        problems.extend(errs)
        for kind, disc in outcomes:
            if disc is not None:
                found.append(disc)
            else:
                discarded[kind] = discarded.get(kind, 0) + 1
    return SearchResult(dedupe(found), problems, len(candidates), dict(sorted(discarded.items())))
