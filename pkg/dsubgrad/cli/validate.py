import sys

from dsubgrad.harness import build_components, load_config
from dsubgrad.schema import dump_config


def create_validate_subcommand(subparser):
    subparser = subparser.add_parser("validate", help="check an experiment config")
    subparser.add_argument("config", help="experiment yaml file or bundled config name")
    subparser.add_argument(
        "--dump",
        action="store_true",
        help="print the validated config with every default filled in",
    )
    subparser.set_defaults(func=handle_validate)


def handle_validate(args):
    config = load_config(args.config)
    components = build_components(config)
    print(
        f"config name={config.name} is valid: n_agents={components.graph.n_agents} "
        f"dimension={components.problem.dimension} beta={components.mixing.beta:.6g}"
    )
    if args.dump:
        sys.stdout.write(dump_config(config))
    return 0
