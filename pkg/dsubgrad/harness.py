import concurrent.futures
import csv
import dataclasses
import logging
import math
import pathlib
import sys
import typing

import numpy as np
from rich.console import Console
from rich.table import Table

from dsubgrad import diagnostics, network, solver
from dsubgrad.constants import PLOT_TIMEOUT
from dsubgrad.errors import (
    AssumptionViolated,
    ConfigError,
    DimensionMismatch,
    SchemaMismatch,
    TraceIOError,
)
from dsubgrad.objectives import DistributedProblem
from dsubgrad.oracle import NoiseModel, NoisyOracle, default_bound
from dsubgrad.problems import catalog_problem, dump_problem_data
from dsubgrad.schema import GraphTypeEnum, Main, MixingSchemeEnum, verify
from dsubgrad.utils import (
    format_float,
    load_yaml,
    output_directory,
    resolve_config_path,
    run_subprocess_cmd,
    timer,
    yaml,
)

logger = logging.getLogger(__name__)

SUMMARY_METRICS = (
    "consensus_error",
    "consensus_rms",
    "objective_at_mean",
    "stationarity_at_mean",
    "distance_to_minimizer",
    "iterations",
    "boundedness_alarms",
    "bound_violations",
)


@dataclasses.dataclass(frozen=True, eq=False)
class Components:
    config: Main
    problem: DistributedProblem
    graph: network.Graph
    mixing: network.MixingMatrix
    oracle: NoisyOracle
    schedule: solver.StepsizeSchedule
    x0: np.ndarray
    solver_options: solver.SolverOptions
    diagnostics_options: diagnostics.DiagnosticsOptions


def load_config(name_or_path) -> Main:
    """Validated config from a yaml path or the name of a bundled config."""
    config_filename = resolve_config_path(name_or_path)
    logger.debug(f"loading config from {config_filename}")
    return verify(load_yaml(config_filename))


def build_network(config: Main) -> typing.Tuple[network.Graph, network.MixingMatrix]:
    n = config.n_agents
    graph_config = config.graph
    weights = None
    if graph_config.type == GraphTypeEnum.explicit:
        graph = network.build_graph(n, graph_config.edges)
    elif graph_config.type == GraphTypeEnum.random:
        graph = network.random_graph(
            n, graph_config.edge_probability, graph_config.seed
        )
    elif graph_config.type == GraphTypeEnum.complete:
        graph = network.build_graph(
            n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        )
    elif graph_config.type == GraphTypeEnum.path:
        graph = network.build_graph(n, [(i, i + 1) for i in range(1, n)])
    else:
        graph, weights = network.read_graph(graph_config.path)
        if graph.n_agents != n:
            raise ConfigError(
                f"graph.path={graph_config.path} has {graph.n_agents} agents, problem has {n}"
            )

    scheme = config.mixing.scheme
    if scheme == MixingSchemeEnum.file:
        if weights is None:
            raise ConfigError(f"graph.path={graph_config.path} carries no weight block")
        return graph, weights
    return graph, network.metropolis_weights(
        graph, lazy=scheme == MixingSchemeEnum.lazy_metropolis
    )


def build_components(config: Main) -> Components:
    """Everything a run needs; construction failures become ConfigError."""
    try:
        problem = catalog_problem(
            config.problem.name, config.problem.params, config.problem.seed
        )
        graph, mixing = build_network(config)
        logger.info(
            f"graph n_agents={graph.n_agents} edges={len(graph.edges)} beta={mixing.beta:.6g}"
        )

        if config.solver.x0 is not None:
            x0 = np.array(config.solver.x0, dtype=float)
            if x0.shape != (problem.dimension,):
                raise DimensionMismatch(
                    f"solver.x0 has {x0.size} entries, problem dimension is {problem.dimension}"
                )
        else:
            x0 = problem.initial_point()

        noise = config.noise
        bound = noise.bound
        if bound is None:
            bound = default_bound(
                problem, x0, noise.variance, noise.kind, noise.batch_fraction
            )
            logger.info(f"noise.bound not set, using bound={bound:.6g}")
        oracle = NoisyOracle(
            model=NoiseModel(
                kind=noise.kind,
                variance=noise.variance,
                bound=bound,
                batch_fraction=noise.batch_fraction,
            ),
            tie_rule=config.solver.tie_rule,
            strict=config.solver.strict_bounds,
        )
        schedule = solver.validate_schedule(
            config.schedule.a, config.schedule.b, config.schedule.p
        )
    except ConfigError:
        raise
    except (AssumptionViolated, DimensionMismatch, TraceIOError, ValueError) as e:
        raise ConfigError(str(e)) from e

    return Components(
        config=config,
        problem=problem,
        graph=graph,
        mixing=mixing,
        oracle=oracle,
        schedule=schedule,
        x0=x0,
        solver_options=solver.SolverOptions(
            update_rule=config.solver.update_rule,
            projection_radius=config.solver.projection,
            safeguard_radius=config.solver.safeguard_radius,
            verify_every=config.solver.verify_every,
        ),
        diagnostics_options=diagnostics.DiagnosticsOptions(
            cadence=config.diagnostics.cadence,
            max_combinations=config.diagnostics.max_combinations,
            early_stop_tol=config.solver.early_stop_tol,
            early_stop_patience=config.solver.early_stop_patience,
        ),
    )


def write_final_iterate(path, state):
    """One row per agent, then the mean iterate."""
    try:
        with pathlib.Path(path).open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["agent"] + [f"x_{d}" for d in range(state.x.shape[1])])
            for i, row in enumerate(state.x):
                writer.writerow([i] + [format_float(v) for v in row])
            writer.writerow(["mean"] + [format_float(v) for v in state.x_bar])
    except OSError as e:
        raise TraceIOError(f"unable to write final iterate to path={path}: {e}")


def summarize_run(components: Components, trace: diagnostics.RunTrace) -> dict:
    state = trace.final_state
    problem = components.problem
    summary = diagnostics.summarize_state(
        problem, state.x, state.x_bar, components.diagnostics_options.max_combinations
    )
    summary["distance_to_minimizer"] = (
        math.nan
        if problem.minimizer is None
        else float(np.linalg.norm(state.x_bar - problem.minimizer))
    )
    summary["iterations"] = state.nu
    summary["boundedness_alarms"] = len(trace.alarms)
    summary["bound_violations"] = int(sum(r.bound_violations for r in trace.records))
    summary["stopped_early"] = trace.stopped_early
    return summary


def _plot(trace_path: pathlib.Path):
    """Best effort: a failing plot never fails the run."""
    try:
        status = run_subprocess_cmd(
            [sys.executable, "-m", "dsubgrad.plot", str(trace_path)],
            timeout=PLOT_TIMEOUT,
            prefix="plot",
        )
    except Exception as e:
        logger.warning(f"plotting {trace_path} failed: {e}")
        return
    if status != 0:
        logger.warning(f"plotting {trace_path} exited with status={status}")


def run_seed(
    components: Components, seed: int, output: pathlib.Path, centralized=False
) -> typing.Tuple[diagnostics.RunTrace, dict]:
    config = components.config
    stem = f"{config.name}-{'baseline-' if centralized else ''}seed{seed}"
    checkpoint = (
        output / f"{stem}.npz" if config.solver.checkpoint_every else None
    )

    with timer(logger, f"{stem} n_iters={config.solver.n_iters}"):
        trace = solver.run(
            components.problem,
            None if centralized else components.mixing,
            components.oracle,
            components.schedule,
            components.x0,
            config.solver.n_iters,
            seed,
            options=components.solver_options,
            diagnostics=components.diagnostics_options,
            checkpoint_path=checkpoint,
            checkpoint_every=config.solver.checkpoint_every,
        )

    trace_path = output / f"{stem}.csv"
    diagnostics.emit_csv(trace, trace_path)
    write_final_iterate(output / f"{stem}-final.csv", trace.final_state)
    if config.diagnostics.figure_outputs:
        diagnostics.emit_figure_csvs(trace, output, prefix=f"{stem}-")
    if config.diagnostics.plot:
        _plot(trace_path)

    summary = summarize_run(components, trace)
    logger.info(
        f"{stem} consensus_error={summary['consensus_error']:.3e} stationarity={summary['stationarity_at_mean']:.3e} objective={summary['objective_at_mean']:.6g}"
    )
    return trace, summary


def _run_seed_job(config: Main, seed: int, output: pathlib.Path, centralized: bool):
    # processes rebuild their components; construction is deterministic
    _, summary = run_seed(build_components(config), seed, output, centralized)
    return summary


def aggregate(summaries: typing.Dict[int, dict]) -> typing.Dict[str, dict]:
    """Median and interquartile range of every summary metric over seeds."""
    result = {}
    for metric in SUMMARY_METRICS:
        values = np.array([float(s[metric]) for s in summaries.values()])
        values = values[~np.isnan(values)]
        if values.size == 0:
            continue
        q1, median, q3 = np.percentile(values, [25, 50, 75])
        result[metric] = {"median": float(median), "iqr": float(q3 - q1)}
    return result


@dataclasses.dataclass
class ExperimentResult:
    output: pathlib.Path
    summaries: typing.Dict[int, dict]
    aggregate: typing.Dict[str, dict]

    @property
    def status(self) -> int:
        # alarms are recorded in the summaries and never change the status
        return 0


def run_experiment(
    config: Main,
    output_dir=None,
    seeds=None,
    jobs: int = 1,
    centralized: bool = False,
    dump_data: bool = False,
    console: typing.Optional[Console] = None,
) -> ExperimentResult:
    seeds = list(seeds or config.seeds)
    output = output_directory(output_dir, config.output_dir)
    output.mkdir(parents=True, exist_ok=True)

    components = build_components(config)
    if dump_data or config.diagnostics.dump_data:
        if components.problem.data is None:
            logger.warning(f"problem={config.problem.name} has no data to dump")
        else:
            dump_problem_data(components.problem, output / f"{config.name}-data.csv")

    summaries = {}
    if jobs > 1 and len(seeds) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = {
                seed: executor.submit(_run_seed_job, config, seed, output, centralized)
                for seed in seeds
            }
            for seed in seeds:
                summaries[seed] = futures[seed].result()
    else:
        for seed in seeds:
            _, summaries[seed] = run_seed(components, seed, output, centralized)

    result = ExperimentResult(
        output=output, summaries=summaries, aggregate=aggregate(summaries)
    )
    write_summary(result, config, output / f"{config.name}-summary.yaml")
    render_summary(result, console or Console())
    return result


def write_summary(result: ExperimentResult, config: Main, path):
    document = {
        "name": config.name,
        "problem": config.problem.name,
        "seeds": {
            int(seed): {k: _plain(v) for k, v in summary.items()}
            for seed, summary in result.summaries.items()
        },
        "aggregate": result.aggregate,
    }
    try:
        with pathlib.Path(path).open("w") as f:
            yaml.dump(document, f)
    except OSError as e:
        raise TraceIOError(f"unable to write summary to path={path}: {e}")


def _plain(value):
    if isinstance(value, (bool, int, str)):
        return value
    return float(value)


def render_summary(result: ExperimentResult, console: Console):
    table = Table(title="Per-seed summary")
    table.add_column("seed", justify="right")
    for metric in ("consensus_error", "stationarity_at_mean", "objective_at_mean"):
        table.add_column(metric, justify="right")
    table.add_column("alarms", justify="right")
    for seed, summary in result.summaries.items():
        table.add_row(
            str(seed),
            f"{summary['consensus_error']:.3e}",
            f"{summary['stationarity_at_mean']:.3e}",
            f"{summary['objective_at_mean']:.6g}",
            str(summary["boundedness_alarms"] + summary["bound_violations"]),
        )
    console.print(table)

    if len(result.summaries) > 1:
        table = Table(title="Aggregate over seeds")
        table.add_column("metric")
        table.add_column("median", justify="right")
        table.add_column("IQR", justify="right")
        for metric, stats in result.aggregate.items():
            table.add_row(metric, f"{stats['median']:.6g}", f"{stats['iqr']:.3g}")
        console.print(table)


def run_centralized_baseline(
    config: Main, seed=None, output_dir=None
) -> diagnostics.RunTrace:
    """Centralized method on the same problem, schedule and noise streams."""
    seed = config.seeds[0] if seed is None else seed
    components = build_components(config)
    if output_dir is None:
        return solver.run(
            components.problem,
            None,
            components.oracle,
            components.schedule,
            components.x0,
            config.solver.n_iters,
            seed,
            options=components.solver_options,
            diagnostics=components.diagnostics_options,
        )
    output = pathlib.Path(output_dir)
    output.mkdir(parents=True, exist_ok=True)
    trace, _ = run_seed(components, seed, output, centralized=True)
    return trace


# ============== comparison =============


@dataclasses.dataclass
class CompareReport:
    deviations: typing.Dict[str, float]
    tolerance: typing.Optional[float]

    @property
    def passed(self) -> typing.Optional[bool]:
        """None in informational mode (no tolerance)."""
        if self.tolerance is None:
            return None
        return all(d <= self.tolerance for d in self.deviations.values())


def _deviation(a: np.ndarray, b: np.ndarray) -> float:
    both_nan = np.isnan(a) & np.isnan(b)
    one_nan = np.isnan(a) ^ np.isnan(b)
    if one_nan.any():
        return math.inf
    difference = np.where(both_nan, 0.0, np.abs(a - b))
    return float(difference.max()) if difference.size else 0.0


def _as_trace(trace) -> diagnostics.RunTrace:
    if isinstance(trace, diagnostics.RunTrace):
        return trace
    return diagnostics.read_csv(trace)


def compare_runs(trace_a, trace_b, metric=None, tolerance=None) -> CompareReport:
    trace_a, trace_b = _as_trace(trace_a), _as_trace(trace_b)
    if trace_a.columns != trace_b.columns:
        raise SchemaMismatch(
            f"traces have different columns: {trace_a.columns} vs {trace_b.columns}"
        )
    if len(trace_a) != len(trace_b):
        raise SchemaMismatch(
            f"traces have different lengths: {len(trace_a)} vs {len(trace_b)}"
        )

    metrics = [c for c in trace_a.columns if c != "nu"] if metric is None else [metric]
    for name in metrics:
        if name not in trace_a.columns:
            raise SchemaMismatch(f"metric={name} is not a trace column")

    deviations = {
        name: _deviation(trace_a.column(name), trace_b.column(name)) for name in metrics
    }
    return CompareReport(deviations=deviations, tolerance=tolerance)


def render_compare(report: CompareReport, console: Console):
    table = Table(title="Trace comparison")
    table.add_column("metric")
    table.add_column("max deviation", justify="right")
    if report.tolerance is not None:
        table.add_column("pass", justify="center")
    for name, deviation in report.deviations.items():
        row = [name, f"{deviation:.3e}"]
        if report.tolerance is not None:
            row.append("yes" if deviation <= report.tolerance else "no")
        table.add_row(*row)
    console.print(table)
