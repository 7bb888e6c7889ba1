import json
from fractions import Fraction

import pytest

from fiburn import report as rpt
from fiburn.dsl import FamilyParams, family_instantiate, monomial, to_text
from fiburn.numerics import PHI, QuadraticValue
from fiburn.search import (
    GridBounds,
    SearchConfig,
    dedupe,
    enumerate_candidates,
    evaluate_candidate,
    is_canonical,
    search,
)

from conftest import ACCEPTANCE_GRID, KNOWN, KNOWN_BY_NAME


class TestEnumerate:
    def test_contains_known_ratios(self):
        found = set(enumerate_candidates(ACCEPTANCE_GRID))
        for ident in KNOWN:
            assert ident.params in found

    def test_empty_bounds(self):
        assert list(enumerate_candidates(GridBounds(-1, 0, 0))) == []

    def test_lexicographic(self):
        params = [p.as_tuple() for p in enumerate_candidates(GridBounds(2, 2, 2))]
        assert params == sorted(params)

    def test_distinct_ratios(self):
        monos = [monomial(family_instantiate(p)) for p in enumerate_candidates(GridBounds(2, 2, 2))]
        assert len(monos) == len(set(monos))

    @pytest.mark.parametrize("params", [
        FamilyParams(s1=0, e1=1, t1=0, f1=1),           # shift on both sides
        FamilyParams(s1=1, e1=1, s2=0, e2=1, t1=2, f1=1),  # decreasing shifts
        FamilyParams(s1=0, e1=0, s2=1, e2=1, t1=2, f1=1),  # unused slot first
        FamilyParams(s1=1, e1=1),                       # no denominator
    ])
    def test_non_canonical(self, params):
        assert not is_canonical(params)

    def test_grid_parse(self):
        assert GridBounds.parse("3, 2,3") == ACCEPTANCE_GRID
        with pytest.raises(ValueError):
            GridBounds.parse("3,2")
        with pytest.raises(ValueError):
            GridBounds.parse("-2,1,1")


class TestEvaluate:
    def test_skipped_leading_terms(self):
        d = evaluate_candidate(KNOWN_BY_NAME["E4"].params)
        assert d.report.sum_value == 1
        assert d.report.split_value() == Fraction(1, 6)

    def test_alternating_reciprocal(self):
        d = evaluate_candidate(KNOWN_BY_NAME["E7"].params)
        assert d.report.sum_value == 1 - PHI
        assert d.report.split_value() == 2 - PHI

    def test_terminating_series_is_degenerate(self):
        # a_1 = F_0 / F_1 = 0, so every term after the first vanishes
        problems = []
        assert evaluate_candidate(FamilyParams(s1=-1, e1=1, t1=0, f1=1), problems=problems) is None
        assert problems == []

    def test_zero_denominator_logged(self):
        problems = []
        assert evaluate_candidate(FamilyParams(s1=0, e1=1, t1=-1, f1=1), problems=problems) is None
        assert len(problems) == 1 and "(0, 1, 0, 0, -1, 1, 0, 0, 1)" in problems[0]

    def test_divergent(self):
        problems = []
        assert evaluate_candidate(FamilyParams(s1=1, e1=1, t1=0, f1=1), problems=problems) is None
        assert problems == []

    def test_single_identity(self):
        d = evaluate_candidate(KNOWN_BY_NAME["E2"].params)
        [kept] = dedupe([d])
        assert kept.report.split_value() == Fraction(1, 2)
        assert kept.merged == [] and kept.reciprocal is None


class TestDedupe:
    def test_reciprocals_linked(self):
        e6 = evaluate_candidate(KNOWN_BY_NAME["E6"].params)
        e7 = evaluate_candidate(KNOWN_BY_NAME["E7"].params)
        a, b = dedupe([e7, e6])
        assert a.reciprocal == b.params and b.reciprocal == a.params

    def test_shifted_copy_merged(self):
        e1 = evaluate_candidate(KNOWN_BY_NAME["E1"].params)
        shifted = evaluate_candidate(FamilyParams(s1=1, e1=1, t1=2, f1=1))
        assert to_text(shifted.report.sequence) == "F(i+1)/F(i+2)"
        [kept] = dedupe([shifted, e1])
        assert kept.params == KNOWN_BY_NAME["E1"].params
        assert kept.merged == [shifted.params]

    def test_acceptance_grid_merges(self, acceptance_search):
        kept = {d.params: d for d in acceptance_search.discoveries}
        e1 = kept[KNOWN_BY_NAME["E1"].params]
        assert FamilyParams(s1=1, e1=1, t1=2, f1=1) in e1.merged
        assert kept[KNOWN_BY_NAME["E6"].params].reciprocal == KNOWN_BY_NAME["E7"].params


def test_deterministic_output():
    config = SearchConfig(n_max=64)
    first = rpt.dumps(rpt.search_json(search(GridBounds(2, 1, 2), config)))
    second = rpt.dumps(rpt.search_json(search(GridBounds(2, 1, 2), config)))
    assert first == second
    assert json.loads(first)["candidates"] == 115


def test_parallel_matches_serial():
    config = SearchConfig(n_max=64)
    serial = rpt.search_json(search(GridBounds(1, 1, 2), config))
    parallel = rpt.search_json(search(GridBounds(1, 1, 2), config, workers=2))
    assert serial == parallel


def test_soundness(acceptance_search):
    for d in acceptance_search.discoveries:
        r = d.report
        bound = r.verification.tail_bound
        assert bound is not None
        gap = QuadraticValue(r.final_state.partial_sum) - r.sum_value
        assert (QuadraticValue(bound) - gap).sign() >= 0
        assert (QuadraticValue(bound) + gap).sign() >= 0


def test_grid_exactness(acceptance_search):
    assert not any("verification failed" in msg for msg in acceptance_search.log)
    for d in acceptance_search.discoveries:
        v = d.report.verification
        assert v.exact_ok and v.n_checked == 200
