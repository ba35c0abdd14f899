import argparse
import logging
import sys

from pydantic.error_wrappers import ValidationError

from dsubgrad.cli.baseline import create_baseline_subcommand
from dsubgrad.cli.compare import create_compare_subcommand
from dsubgrad.cli.initialize import create_init_subcommand
from dsubgrad.cli.run import create_run_subcommand
from dsubgrad.cli.validate import create_validate_subcommand
from dsubgrad.errors import ConfigError, DsubgradError
from dsubgrad.version import __version__


def cli(args):
    parser = argparse.ArgumentParser(
        description="distributed stochastic subgradient simulator"
    )
    parser.add_argument(
        "-v",
        "--version",
        action="version",
        version=__version__,
        help="dsubgrad version number",
    )
    parser.set_defaults(func=None)

    subparser = parser.add_subparsers(help=f"dsubgrad - {__version__}")
    create_run_subcommand(subparser)
    create_baseline_subcommand(subparser)
    create_compare_subcommand(subparser)
    create_validate_subcommand(subparser)
    create_init_subcommand(subparser)

    args = parser.parse_args(args)

    if args.func is None:
        parser.print_help(sys.stderr)
        sys.exit(1)

    logging.basicConfig(level=logging.INFO)

    try:
        status = args.func(args)
    except ValidationError as valerr:
        sys.exit(
            "Error: The schema validation of the experiment config failed."
            " The following error message may be helpful in determining what went wrong:\n\n"
            + str(valerr)
        )
    except ConfigError as ce:
        sys.exit("\nConfiguration error: " + str(ce) + "\n")
    except DsubgradError as de:
        print(f"\nRun failed: {type(de).__name__}: {de}\n", file=sys.stderr)
        sys.exit(2)
    except ValueError as ve:
        sys.exit("\nProblem encountered: " + str(ve) + "\n")

    return status or 0
