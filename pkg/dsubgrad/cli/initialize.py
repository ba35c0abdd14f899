import pathlib

from dsubgrad.initialize import render_config
from dsubgrad.problems import CatalogProblem
from dsubgrad.schema import dump_config, verify


def create_init_subcommand(subparser):
    subparser = subparser.add_parser("init", help="write a starter experiment config")
    subparser.add_argument(
        "problem",
        help="catalog problem to configure",
        type=str,
        choices=CatalogProblem.names(),
    )
    subparser.add_argument("--name", help="experiment name (default: problem name)")
    subparser.add_argument("--agents", type=int, help="number of agents")
    subparser.add_argument(
        "--edge-probability", type=float, help="random graph edge probability"
    )
    subparser.add_argument("--iters", type=int, help="number of iterations")
    subparser.add_argument(
        "--output", help="config path to write (default: NAME.yaml)"
    )
    subparser.set_defaults(func=handle_init)


def handle_init(args):
    config = render_config(
        problem_name=args.problem,
        name=args.name,
        n_agents=args.agents,
        edge_probability=args.edge_probability,
        n_iters=args.iters,
    )
    text = dump_config(verify(config))

    config_filename = pathlib.Path(args.output or f"{config['name']}.yaml")
    try:
        with config_filename.open("x") as f:
            f.write(text)
    except FileExistsError:
        raise ValueError(
            f"A config file named {config_filename} already exists. Please move or delete it and try again."
        )
    print(f"wrote {config_filename}")
    return 0
