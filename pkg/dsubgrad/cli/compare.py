from rich.console import Console

from dsubgrad.errors import ComparisonFailed
from dsubgrad.harness import compare_runs, render_compare


def create_compare_subcommand(subparser):
    subparser = subparser.add_parser("compare", help="compare two trace CSVs")
    subparser.add_argument("trace_a", help="first trace CSV")
    subparser.add_argument("trace_b", help="second trace CSV")
    subparser.add_argument(
        "--metric", help="compare a single column (default: every column but nu)"
    )
    subparser.add_argument(
        "--tol",
        type=float,
        help="pass/fail tolerance on the max deviation; omit for a report only",
    )
    subparser.set_defaults(func=handle_compare)


def handle_compare(args):
    report = compare_runs(args.trace_a, args.trace_b, args.metric, args.tol)
    render_compare(report, Console())
    if report.passed is False:
        failing = [k for k, v in report.deviations.items() if not v <= report.tolerance]
        raise ComparisonFailed(f"metrics {failing} deviate by more than tol={args.tol}")
    return 0
