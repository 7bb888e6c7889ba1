"""Command line entry point: ``fiburn <subcommand> [options]``.

Exit status: 0 on success, 1 on usage or parse errors, 2 when a
verification, realization or simulation check fails.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from .dsl import DSLError, EvaluationError, parse, to_text
from .identity import (
    DEFAULT_N_MAX,
    DEFAULT_TOL,
    Trajectory,
    VerificationFailed,
    derive_identity,
    estimate_limit,
    verify_complement_identity,
)
from .montecarlo import DEFAULT_MAX_DRAWS, DEFAULT_REPLICATIONS, DEFAULT_SEED, SimConfig, compare_analytic, simulate
from .numerics import format_decimal
from . import report as rpt
from .search import GridBounds, SearchConfig, search
from .urn import InvalidProbability, NotRealizable, additions, realize

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2
COMMANDS = ("verify", "table", "urn", "simulate", "search", "recognize")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _decimal(text):
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "json", "csv"), default="human")
    common.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")

    parser = _Parser(prog="fiburn", description="Exact Fibonacci series identities from an urn model.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def expr_opt(p):
        p.add_argument("--expr", required=True, help='ratio a_i, e.g. "F(i)/F(i+1)"')

    p = sub.add_parser("verify", parents=[common], help="verify the identity and report the series")
    expr_opt(p)
    p.add_argument("--n", type=_positive, default=DEFAULT_N_MAX)
    p.add_argument("--n-max", type=_positive)
    p.add_argument("--tol", type=_decimal, default=DEFAULT_TOL)

    p = sub.add_parser("table", parents=[common], help="per-step a_n, P_n, t_n, S_n")
    expr_opt(p)
    p.add_argument("--n", type=_positive, default=20)

    p = sub.add_parser("urn", parents=[common], help="urn contents realizing a_i")
    expr_opt(p)
    p.add_argument("--n", type=_positive, default=6)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo draw-until-red check")
    expr_opt(p)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--reps", type=_positive, default=DEFAULT_REPLICATIONS)
    p.add_argument("--max-draws", type=_positive, default=DEFAULT_MAX_DRAWS)

    p = sub.add_parser("search", parents=[common], help="grid search over ratio families")
    p.add_argument("--grid", default="3,2,3", metavar="S,E,C")
    p.add_argument("--n-max", type=_positive, default=DEFAULT_N_MAX)
    p.add_argument("--tol", type=_decimal, default=DEFAULT_TOL)

    p = sub.add_parser("recognize", parents=[common], help="recognize lim a_1...a_n in Q[sqrt 5]")
    expr_opt(p)
    p.add_argument("--n-max", type=_positive, default=DEFAULT_N_MAX)
    p.add_argument("--tol", type=_decimal, default=DEFAULT_TOL)
    return parser


def _inputs(args) -> dict:
    skip = {"command", "format", "out"}
    out = {}
    for k, v in vars(args).items():
        if k in skip or v is None:
            continue
        out[k] = str(v) if isinstance(v, Fraction) else v
    return out


def _cmd_verify(args, expr):
    n_max = args.n_max or args.n
    ver = verify_complement_identity(expr, args.n)
    if not ver.exact_ok:
        return EXIT_FAILED, {"verification": {"n_checked": args.n, "exact_ok": False,
                                              "first_failure": ver.first_failure}}, \
            f"complement identity fails at n={ver.first_failure}\n", None
    if n_max < 8:
        raise UsageError("--n-max (or --n) must be at least 8 for limit estimation")
    report = derive_identity(expr, n_max, args.tol)
    csv_text = rpt.to_csv(
        ["expression", "n_checked", "exact_ok", "limit", "sum_value", "start_index", "split_value"],
        [[to_text(expr), ver.n_checked, ver.exact_ok, report.limit.kind.value,
          rpt._fmt_q(report.sum_value), report.start_index, rpt._fmt_q(report.split_value())]],
    )
    return EXIT_OK, rpt.identity_json(report), rpt.identity_human(report), csv_text


def _cmd_table(args, expr):
    traj = Trajectory(expr).extend(args.n)
    rows = [rpt.state_row(traj.values[k], traj.state(k)) for k in range(1, args.n + 1)]
    ok = all(r["balanced"] for r in rows)
    header = ["n", "a_n", "prefix_product", "last_term", "partial_sum", "balanced"]
    fmt = lambda r: f"{r['num']}/{r['den']}" if r["den"] != "1" else r["num"]  # noqa: E731
    body = [[r["n"], fmt(r["a_n"]), fmt(r["prefix_product"]), fmt(r["last_term"]),
             fmt(r["partial_sum"]), r["balanced"]] for r in rows]
    human = "\n".join(["\t".join(header)] + ["\t".join(str(v) for v in row) for row in body]) + "\n"
    return (EXIT_OK if ok else EXIT_FAILED), {"rows": rows}, human, rpt.to_csv(header, body)


def _cmd_urn(args, expr):
    trace = realize(expr, args.n)
    rows = trace.rows()
    results = {"rows": rows, "additions": [list(a) for a in additions(trace)]}
    human = "\n".join(
        f"urn {r['step']}: (blue, red) = ({r['blue']}, {r['red']})"
        + ("" if r["d_blue"] is None else f"  added ({r['d_blue']}, {r['d_red']})")
        for r in rows
    ) + "\n"
    return EXIT_OK, results, human, rpt.urn_csv(trace)


def _cmd_simulate(args, expr):
    config = SimConfig(args.seed, args.reps, args.max_draws)
    result = simulate(expr, config)
    passed, z = compare_analytic(result)
    human = (
        f"seed {config.seed}, {config.replications} replications, max {config.max_draws} draws\n"
        f"red within {config.max_draws} draws: {result.hit_count} "
        f"(empirical {result.hit_count / config.replications:.6f})\n"
        f"analytic 1 - P_{config.max_draws} = {format_decimal(result.analytic_p)}\n"
        f"z = {z:.4f}: {'pass' if passed else 'FAIL'} (|z| <= 3)\n"
    )
    rows = []
    for k in range(1, config.max_draws + 1):
        count = result.stopping_histogram.get(k, 0)
        if count:
            rows.append([k, count, str(result.survival(k))])
    csv_text = rpt.to_csv(["draw", "count", "empirical_survival"], rows)
    return (EXIT_OK if passed else EXIT_FAILED), rpt.sim_json(result, passed), human, csv_text


def _cmd_search(args):
    try:
        grid = GridBounds.parse(args.grid)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.n_max < 8:
        raise UsageError("--n-max must be at least 8")
    result = search(grid, SearchConfig(n_max=args.n_max, tol=args.tol))
    rows = []
    for d in result.discoveries:
        r = d.report
        rows.append([*d.params.as_tuple(), d.expression, rpt._fmt_q(r.sum_value), r.start_index,
                     rpt._fmt_q(r.split_value()),
                     rpt.to_text_params(d.reciprocal) if d.reciprocal else ""])
    header = ["s1", "e1", "s2", "e2", "t1", "f1", "t2", "f2", "c",
              "expression", "sum_value", "start_index", "split_value", "reciprocal"]
    return EXIT_OK, rpt.search_json(result), rpt.search_human(result), rpt.to_csv(header, rows), result.log


def _cmd_recognize(args, expr):
    if args.n_max < 8:
        raise UsageError("--n-max must be at least 8")
    est = estimate_limit(expr, args.n_max, args.tol)
    results = rpt.limit_json(est)
    human = f"lim a_1...a_n for {to_text(expr)}: {est.kind.value}, {est.describe()}\n"
    value = est.value
    csv_text = rpt.to_csv(
        ["expression", "classification", "p", "q", "decimal"],
        [[to_text(expr), est.kind.value, str(value.p) if value is not None else "",
          str(value.q) if value is not None else "", format_decimal(value) if value is not None else ""]],
    )
    return EXIT_OK, results, human, csv_text


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    log: list[str] = []
    try:
        if args.command == "search":
            status, results, human, csv_text, log = _cmd_search(args)
        else:
            expr = parse(args.expr)
            handler = {
                "verify": _cmd_verify,
                "table": _cmd_table,
                "urn": _cmd_urn,
                "simulate": _cmd_simulate,
                "recognize": _cmd_recognize,
            }[args.command]
            status, results, human, csv_text = handler(args, expr)
    except DSLError as exc:
        offset = f" (byte offset {exc.offset})" if exc.offset is not None else ""
        print(f"fiburn: parse error{offset}: {exc.message}", file=sys.stderr)
        if exc.offset is not None:
            print(f"  {args.expr}\n  {' ' * _char_col(args.expr, exc.offset)}^", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"fiburn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotRealizable, InvalidProbability, EvaluationError, VerificationFailed) as exc:
        print(f"fiburn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED

    if args.format == "json":
        text = rpt.dumps(rpt.envelope(args.command, _inputs(args), results, log))
    elif args.format == "csv":
        text = csv_text
    else:
        text = human
        if log:
            text += f"{len(log)} candidates discarded with errors (see --format json)\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


def _char_col(text: str, byte_offset: int) -> int:
    return len(text.encode()[:byte_offset].decode(errors="ignore"))


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
