from dsubgrad.harness import load_config, run_experiment


def parse_seeds(value):
    if value is None:
        return None
    try:
        return [int(_) for _ in value.split(",") if _.strip()]
    except ValueError:
        raise ValueError(f"--seeds={value} must be a comma separated list of integers")


def create_run_subcommand(subparser):
    subparser = subparser.add_parser("run", help="run the distributed method")
    subparser.add_argument("config", help="experiment yaml file or bundled config name")
    subparser.add_argument("--out", help="output directory for traces and summaries")
    subparser.add_argument(
        "--seeds", help="comma separated seeds overriding the config, e.g. 0,1,2"
    )
    subparser.add_argument(
        "--jobs", type=int, default=1, help="number of seeds to run in parallel"
    )
    subparser.add_argument(
        "--dump-data",
        action="store_true",
        help="write the problem's data set to CSV before running",
    )
    subparser.set_defaults(func=handle_run)


def handle_run(args):
    config = load_config(args.config)
    result = run_experiment(
        config,
        output_dir=args.out,
        seeds=parse_seeds(args.seeds),
        jobs=args.jobs,
        dump_data=args.dump_data,
    )
    return result.status
