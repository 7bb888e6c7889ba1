"""JSON / CSV / human renderings of engine results.

Exact numbers are emitted as strings: rationals as ``{"num", "den"}`` and
Q[sqrt 5] values as ``{"p", "q", "decimal"}``.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from fractions import Fraction

from . import __version__
from .dsl import family_instantiate, to_text
from .identity import IdentityReport, LimitEstimate, PartialState
from .montecarlo import SimResult
from .numerics import QuadraticValue, format_decimal
from .search import Discovery, SearchResult
from .urn import UrnTrace


def _digits(n: int) -> str:
    """str(n), lifting the interpreter's digit limit for exact output of huge values."""
    try:
        return str(n)
    except ValueError:
        old = sys.get_int_max_str_digits()
        sys.set_int_max_str_digits(0)
        try:
            return str(n)
        finally:
            sys.set_int_max_str_digits(old)


def rat(x) -> dict:
    x = Fraction(x)
    return {"num": _digits(x.numerator), "den": _digits(x.denominator)}


def rat_with_decimal(x) -> dict:
    return {**rat(x), "decimal": format_decimal(Fraction(x))}


def quad(x) -> dict | None:
    if x is None:
        return None
    x = QuadraticValue.coerce(x)
    return {"p": rat(x.p), "q": rat(x.q), "decimal": format_decimal(x)}


def envelope(command: str, inputs: dict, results, log: list | None = None) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "inputs": inputs,
        "results": results,
        "log": list(log or []),
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def limit_json(limit: LimitEstimate) -> dict:
    enc = None
    if limit.enclosure is not None:
        enc = [rat_with_decimal(limit.enclosure[0]), rat_with_decimal(limit.enclosure[1])]
    return {
        "classification": limit.kind.value,
        "value": quad(limit.value),
        "enclosure": enc,
        "steps_used": limit.steps_used,
        "tail_bound": rat(limit.tail_bound) if limit.tail_bound is not None else None,
    }


def identity_json(report: IdentityReport) -> dict:
    v = report.verification
    return {
        "expression": to_text(report.sequence),
        "start_index": report.start_index,
        "summands": [{"i": i, **rat_with_decimal(t)} for i, t in enumerate(report.summand_values, 1)],
        "leading_sum": rat(report.leading_sum),
        "limit": limit_json(report.limit),
        "sum_value": quad(report.sum_value),
        "split_value": quad(report.split_value()),
        "probability_valid": report.probability_valid,
        "first_violation": report.first_violation,
        "verification": {
            "n_checked": v.n_checked,
            "exact_ok": v.exact_ok,
            "first_failure": v.first_failure,
            "tail_bound": rat(v.tail_bound) if v.tail_bound is not None else None,
        },
    }


def state_row(expr_value, state: PartialState) -> dict:
    return {
        "n": state.n,
        "a_n": rat(expr_value),
        "prefix_product": rat(state.prefix_product),
        "last_term": rat(state.last_term),
        "partial_sum": rat(state.partial_sum),
        "balanced": state.balanced,
    }


def sim_json(result: SimResult, passed: bool) -> dict:
    cfg = result.config
    return {
        "generator": "splitmix64",
        "seed": cfg.seed,
        "replications": cfg.replications,
        "max_draws": cfg.max_draws,
        "hit_count": result.hit_count,
        "stopping_histogram": [[k, c] for k, c in result.stopping_histogram.items()],
        "analytic_p": rat_with_decimal(result.analytic_p),
        "z_score": repr(result.z_score),
        "pass": passed,
    }


def discovery_json(d: Discovery) -> dict:
    return {
        "params": dict(zip(("s1", "e1", "s2", "e2", "t1", "f1", "t2", "f2", "c"), d.params.as_tuple())),
        "novelty_key": d.novelty_key,
        "reciprocal": list(d.reciprocal.as_tuple()) if d.reciprocal else None,
        "merged": [list(p.as_tuple()) for p in d.merged],
        "identity": identity_json(d.report),
    }


def search_json(result: SearchResult) -> dict:
    return {
        "candidates": result.candidates,
        "discarded": result.discarded,
        "discoveries": [discovery_json(d) for d in result.discoveries],
    }


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


URN_COLUMNS = ["step", "d_blue", "d_red", "blue", "red"]


def urn_csv(trace: UrnTrace) -> str:
    return to_csv(URN_COLUMNS, [[r[c] for c in URN_COLUMNS] for r in trace.rows()])


def _fmt_q(x) -> str:
    if x is None:
        return "unresolved"
    x = QuadraticValue.coerce(x)
    if x.is_rational():
        approx = format_decimal(x)
        return str(x.p) if approx == str(x.p) else f"{x.p} ~ {approx}"
    return f"{x} ~ {format_decimal(x)}"


def identity_human(report: IdentityReport) -> str:
    v = report.verification
    lines = [f"a_i = {to_text(report.sequence)}"]
    lines.append(
        f"complement identity S_n + P_n = 1: "
        f"{'exact for n = 1..' + str(v.n_checked) if v.exact_ok else 'FAILS at n = ' + str(v.first_failure)}"
    )
    lim = report.limit
    bound = f"; tail bound {format_decimal(v.tail_bound, 3)} at n={v.n_checked}" if v.tail_bound is not None else ""
    lines.append(f"lim a_1...a_n: {lim.kind.value}, {lim.describe()}{bound}")
    if report.probability_valid:
        lines.append("a_i are probabilities (0 <= a_i <= 1) for all checked i")
    else:
        lines.append(f"a_i are not probabilities: first violation at i={report.first_violation}")
    if report.sum_value is None:
        lines.append("series value: limit not recognized")
        return "\n".join(lines) + "\n"
    lines.append(f"sum_(i>=1) t_i = 1 - lim P_n = {_fmt_q(report.sum_value)}")
    start = report.start_index
    split = report.split_value()
    if report.leading_terms:
        lead = " + ".join(f"t_{i}" for i in range(1, start))
        vals = ", ".join(str(t) for t in report.leading_terms)
        lines.append(f"leading terms {lead} = {report.leading_sum}  ({vals})")
        lines.append(f"{_fmt_q(report.sum_value)} = {report.leading_sum} + sum_(i>={start}) t_i")
    lines.append(f"sum_(i>={start}) t_i = {_fmt_q(split)}")
    shown = ", ".join(str(t) for t in report.summand_values[start - 1: start + 5])
    lines.append(f"t_{start}, t_{start + 1}, ... = {shown}, ...")
    return "\n".join(lines) + "\n"


def search_human(result: SearchResult) -> str:
    lines = [
        f"{result.candidates} candidates; {len(result.discoveries)} identities after dedupe; "
        f"discarded: " + ", ".join(f"{k}={v}" for k, v in result.discarded.items())
    ]
    for d in result.discoveries:
        r = d.report
        extra = f"  [reciprocal of {to_text_params(d.reciprocal)}]" if d.reciprocal else ""
        lines.append(
            f"{d.expression}: sum_(i>={r.start_index}) t_i = {_fmt_q(r.split_value())}"
            f"  (total {_fmt_q(r.sum_value)}){extra}"
        )
    return "\n".join(lines) + "\n"


def to_text_params(params) -> str:
    return to_text(family_instantiate(params))
