from dsubgrad.cli.run import parse_seeds
from dsubgrad.harness import load_config, run_experiment


def create_baseline_subcommand(subparser):
    subparser = subparser.add_parser(
        "baseline", help="run the centralized method on the same problem"
    )
    subparser.add_argument("config", help="experiment yaml file or bundled config name")
    subparser.add_argument("--out", help="output directory for traces and summaries")
    subparser.add_argument("--seeds", help="comma separated seeds overriding the config")
    subparser.set_defaults(func=handle_baseline)


def handle_baseline(args):
    config = load_config(args.config)
    result = run_experiment(
        config, output_dir=args.out, seeds=parse_seeds(args.seeds), centralized=True
    )
    return result.status
