"""Per-iteration diagnostics and the trace CSV format.

Row nu describes the state *before* step nu: the iterates x^nu, the
stepsize gamma^nu, the algorithm time t_nu = sum_{k<nu} gamma^k and the
partial sums M0 = sum_{k<nu} gamma^k dM_k and B0 = sum_{k<nu} gamma^k beta_k.
Columns of the CSV, in order:

    nu, gamma, time, consensus_error, consensus_rms, objective_at_mean,
    stationarity_at_mean, stationarity_exact, convex_average_norm,
    beta_norm, beta_bound, delta_m_norm, boundedness_max, active_mismatch,
    bound_violations, m0_0 .. m0_{m-1}, b0_0 .. b0_{m-1}

stationarity_at_mean, stationarity_exact, convex_average_norm and
active_mismatch are computed every `cadence` rows and are `nan` otherwise.
beta_bound is `nan` for objectives without a branch Lipschitz constant.
"""

import csv
import dataclasses
import logging
import math
import pathlib
import typing

import numpy as np

from dsubgrad.constants import (
    DEFAULT_DIAGNOSTIC_CADENCE,
    DEFAULT_EARLY_STOP_PATIENCE,
    MAX_ACTIVE_COMBINATIONS,
)
from dsubgrad.errors import BranchUnavailable, TraceIOError, WindowOutOfRange
from dsubgrad.network import mean_rows
from dsubgrad.objectives import DistributedProblem, stationarity_measure
from dsubgrad.utils import format_float

logger = logging.getLogger(__name__)

COLUMNS = (
    "nu",
    "gamma",
    "time",
    "consensus_error",
    "consensus_rms",
    "objective_at_mean",
    "stationarity_at_mean",
    "stationarity_exact",
    "convex_average_norm",
    "beta_norm",
    "beta_bound",
    "delta_m_norm",
    "boundedness_max",
    "active_mismatch",
    "bound_violations",
)


@dataclasses.dataclass(frozen=True)
class BoundednessAlarm:
    nu: int
    agent: int
    norm: float
    radius: float


@dataclasses.dataclass(frozen=True)
class DiagnosticsOptions:
    cadence: int = DEFAULT_DIAGNOSTIC_CADENCE
    max_combinations: int = MAX_ACTIVE_COMBINATIONS
    early_stop_tol: typing.Optional[float] = None
    early_stop_patience: int = DEFAULT_EARLY_STOP_PATIENCE


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    nu: int
    gamma: float
    time: float
    consensus_error: float
    consensus_rms: float
    objective_at_mean: float
    stationarity_at_mean: float
    stationarity_exact: float
    convex_average_norm: float
    beta_norm: float
    beta_bound: float
    delta_m_norm: float
    boundedness_max: float
    active_mismatch: float
    bound_violations: int
    m0: typing.Tuple[float, ...]
    b0: typing.Tuple[float, ...]

    def row(self) -> typing.List[float]:
        return [getattr(self, name) for name in COLUMNS] + list(self.m0) + list(self.b0)


@dataclasses.dataclass
class RunTrace:
    dimension: int
    records: typing.List[TraceRecord] = dataclasses.field(default_factory=list)
    alarms: typing.List[BoundednessAlarm] = dataclasses.field(default_factory=list)
    stopped_early: bool = False
    # solver state after the last step
    final_state: typing.Any = dataclasses.field(default=None, repr=False)

    def __len__(self):
        return len(self.records)

    @property
    def columns(self) -> typing.List[str]:
        return list(COLUMNS) + vector_columns(self.dimension)

    def as_array(self) -> np.ndarray:
        return np.array(
            [r.row() for r in self.records], dtype=float
        ).reshape(len(self.records), len(self.columns))

    def column(self, name) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"trace has no column={name}")
        return self.as_array()[:, self.columns.index(name)]

    def partial_sums(self, series="m0") -> np.ndarray:
        if series not in ("m0", "b0"):
            raise ValueError(f"series={series} must be m0 or b0")
        return np.array([getattr(r, series) for r in self.records]).reshape(
            len(self.records), self.dimension
        )


def vector_columns(dimension: int) -> typing.List[str]:
    return [f"m0_{d}" for d in range(dimension)] + [
        f"b0_{d}" for d in range(dimension)
    ]


def _stack(state) -> np.ndarray:
    return np.asarray(getattr(state, "x", state), dtype=float)


def consensus_error(state) -> float:
    """max_i ||x_(i) - x_bar|| for a solver state or an n x m stack.

    Mixing contracts the stacked residual ||x - 1 (x) x_bar||_F, which is
    sqrt(n) * consensus_rms, by beta. This max-norm is not bounded by beta.
    """
    x = _stack(state)
    return float(np.max(np.linalg.norm(x - mean_rows(x), axis=1)))


def consensus_rms(state) -> float:
    x = _stack(state)
    return float(np.sqrt(np.mean(np.sum((x - mean_rows(x)) ** 2, axis=1))))


@dataclasses.dataclass(frozen=True, eq=False)
class Decomposition:
    g_at_mean: np.ndarray
    beta: np.ndarray
    delta_m: np.ndarray
    # (1/n) sum_i L_i ||x_(i) - x_bar||, nan without branch constants
    beta_bound: float
    fallbacks: int = 0

    @property
    def direction(self) -> np.ndarray:
        return self.g_at_mean + self.beta + self.delta_m


def decompose_update(record, problem: DistributedProblem) -> Decomposition:
    """Split the mean direction (1/n) sum_i y_(i) into g(x_bar) + beta + dM.

    Agent i's branch is re-evaluated at the mean iterate. A branch that is
    not defined there falls back to the Clarke element at the mean.
    """
    x_bar = record.x_bar
    at_mean = np.zeros_like(record.g)
    fallbacks = 0
    for i, (agent, sample) in enumerate(zip(problem.agents, record.samples)):
        try:
            at_mean[i] = agent.branch_gradient(x_bar, sample.selection.branch)
        except BranchUnavailable as e:
            logger.warning(f"agent={i} branch unavailable at the mean iterate: {e}")
            at_mean[i] = agent.clarke_element(x_bar)
            fallbacks += 1

    constants = [sample.selection.lipschitz for sample in record.samples]
    if any(L is None for L in constants):
        bound = math.nan
    else:
        gaps = np.linalg.norm(record.x - x_bar, axis=1)
        bound = float(sum(L * gap for L, gap in zip(constants, gaps)) / len(gaps))

    return Decomposition(
        g_at_mean=mean_rows(at_mean),
        beta=mean_rows(record.g - at_mean),
        delta_m=mean_rows(record.noise),
        beta_bound=bound,
        fallbacks=fallbacks,
    )


def active_mismatch(problem: DistributedProblem, x: np.ndarray, x_bar) -> float:
    """Share of agents whose active choices at x_(i) differ from those at x_bar."""
    differing = sum(
        agent.choice_sets(row) != agent.choice_sets(x_bar)
        for agent, row in zip(problem.agents, x)
    )
    return differing / problem.n_agents


class TraceRecorder:
    """Single-writer accumulator turning step records into trace rows."""

    def __init__(
        self,
        problem: DistributedProblem,
        options: DiagnosticsOptions = DiagnosticsOptions(),
        m0=None,
        b0=None,
    ):
        self.problem = problem
        self.options = options
        self.m0 = np.zeros(problem.dimension) if m0 is None else np.array(m0, dtype=float)
        self.b0 = np.zeros(problem.dimension) if b0 is None else np.array(b0, dtype=float)
        self.trace = RunTrace(dimension=problem.dimension)
        self._below_tolerance = 0
        self._warned = set()

    def _warn_once(self, key, message):
        if key not in self._warned:
            logger.warning(message)
            self._warned.add(key)

    def __call__(self, record) -> TraceRecord:
        problem, options = self.problem, self.options
        x, x_bar = record.x, record.x_bar
        parts = decompose_update(record, problem)

        nan = math.nan
        stationarity = exact = average = mismatch = nan
        if record.nu % options.cadence == 0:
            measure = stationarity_measure(problem, x_bar, options.max_combinations)
            stationarity = measure.value
            exact = float(measure.exact)
            average = measure.convex_average_norm
            mismatch = active_mismatch(problem, x, x_bar)
            self._track_early_stop(stationarity)

        beta_norm = float(np.linalg.norm(parts.beta))
        if not math.isnan(parts.beta_bound) and beta_norm > parts.beta_bound * (
            1.0 + 1e-9
        ) + 1e-12:
            self._warn_once(
                "beta",
                f"beta norm={beta_norm:.6g} exceeds Lipschitz bound={parts.beta_bound:.6g} at nu={record.nu}",
            )

        violations = sum(int(s.bound_violation) for s in record.samples)
        if violations:
            self._warn_once(
                "bound",
                f"{violations} oracle samples exceed the realization bound at nu={record.nu}",
            )
        for alarm in record.alarms:
            self._warn_once(
                "radius",
                f"agent={alarm.agent} norm={alarm.norm:.6g} left safeguard radius={alarm.radius:.6g} at nu={alarm.nu}",
            )
        self.trace.alarms.extend(record.alarms)

        row = TraceRecord(
            nu=record.nu,
            gamma=record.gamma,
            time=record.time,
            consensus_error=consensus_error(x),
            consensus_rms=consensus_rms(x),
            objective_at_mean=problem.value(x_bar),
            stationarity_at_mean=stationarity,
            stationarity_exact=exact,
            convex_average_norm=average,
            beta_norm=beta_norm,
            beta_bound=parts.beta_bound,
            delta_m_norm=float(np.linalg.norm(parts.delta_m)),
            boundedness_max=float(np.max(np.linalg.norm(x, axis=1))),
            active_mismatch=mismatch,
            bound_violations=violations,
            m0=tuple(self.m0.tolist()),
            b0=tuple(self.b0.tolist()),
        )
        self.m0 = self.m0 + record.gamma * parts.delta_m
        self.b0 = self.b0 + record.gamma * parts.beta
        self.trace.records.append(row)
        return row

    def _track_early_stop(self, stationarity):
        tol = self.options.early_stop_tol
        if tol is None:
            return
        self._below_tolerance = self._below_tolerance + 1 if stationarity < tol else 0

    @property
    def should_stop(self) -> bool:
        return (
            self.options.early_stop_tol is not None
            and self._below_tolerance >= self.options.early_stop_patience
        )


def summarize_state(
    problem: DistributedProblem, x, x_bar, max_combinations=MAX_ACTIVE_COMBINATIONS
) -> typing.Dict[str, float]:
    measure = stationarity_measure(problem, x_bar, max_combinations)
    return {
        "consensus_error": consensus_error(x),
        "consensus_rms": consensus_rms(x),
        "objective_at_mean": problem.value(x_bar),
        "stationarity_at_mean": measure.value,
        "stationarity_exact": measure.exact,
    }


# ============== oscillation in algorithm time =============


def first_index_after(trace: RunTrace, t: float) -> int:
    """m(t): smallest nu whose cumulative stepsize t_nu exceeds t."""
    return int(np.searchsorted(trace.column("time"), t, side="right"))


def oscillation_monitor(trace: RunTrace, T: float, window_start: int, series="m0"):
    """max over 0 <= t <= T of ||S(jT + t) - S(jT)|| for window j = window_start.

    S(t) is the partial sum M0 (or B0 with series="b0") at row m(t).
    """
    if T <= 0:
        raise WindowOutOfRange(f"window length T={T} must be positive")
    if window_start < 0:
        raise WindowOutOfRange(f"window_start={window_start} must be nonnegative")

    start = first_index_after(trace, window_start * T)
    stop = first_index_after(trace, (window_start + 1) * T)
    if stop >= len(trace):
        raise WindowOutOfRange(
            f"window {window_start} of length T={T} ends past the trace (algorithm time {trace.records[-1].time if trace.records else 0.0:.6g})"
        )

    sums = trace.partial_sums(series)
    return float(np.max(np.linalg.norm(sums[start : stop + 1] - sums[start], axis=1)))


def oscillation_profile(trace: RunTrace, T: float, series="m0") -> typing.List[float]:
    """Oscillation maxima of every complete window, in order."""
    maxima = []
    j = 0
    while True:
        try:
            maxima.append(oscillation_monitor(trace, T, j, series))
        except WindowOutOfRange:
            return maxima
        j += 1


# ============== csv =============


def emit_csv(trace: RunTrace, path):
    try:
        with pathlib.Path(path).open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(trace.columns)
            for record in trace.records:
                writer.writerow(_format_row(record))
    except OSError as e:
        raise TraceIOError(f"unable to write trace to path={path}: {e}")


def _format_row(record: TraceRecord) -> typing.List[str]:
    values = record.row()
    formatted = [str(record.nu)]
    for name, value in zip(COLUMNS[1:], values[1 : len(COLUMNS)]):
        formatted.append(str(value) if name == "bound_violations" else format_float(value))
    formatted.extend(format_float(v) for v in values[len(COLUMNS) :])
    return formatted


def read_csv(path) -> RunTrace:
    try:
        with pathlib.Path(path).open(newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise TraceIOError(f"unable to read trace from path={path}: {e}")

    if not rows or tuple(rows[0][: len(COLUMNS)]) != COLUMNS:
        raise TraceIOError(f"file={path} does not start with the trace header")
    dimension = (len(rows[0]) - len(COLUMNS)) // 2
    if rows[0] != list(COLUMNS) + vector_columns(dimension):
        raise TraceIOError(f"file={path} has an unexpected header")

    trace = RunTrace(dimension=dimension)
    for row in rows[1:]:
        values = dict(zip(COLUMNS, row))
        vector = [float(v) for v in row[len(COLUMNS) :]]
        fields = {
            name: float(values[name]) for name in COLUMNS if name not in ("nu", "bound_violations")
        }
        trace.records.append(
            TraceRecord(
                nu=int(values["nu"]),
                bound_violations=int(values["bound_violations"]),
                m0=tuple(vector[:dimension]),
                b0=tuple(vector[dimension:]),
                **fields,
            )
        )
    return trace


FIGURE_SERIES = {
    "consensus_error": "consensus_error",
    "stationarity": "stationarity_at_mean",
    "objective": "objective_at_mean",
}


def emit_figure_csvs(trace: RunTrace, directory, prefix="") -> typing.List[pathlib.Path]:
    """Three two-column CSVs (nu, value) mirroring the usual convergence plots.

    The stationarity file only carries rows where it was computed.
    """
    directory = pathlib.Path(directory)
    written = []
    for name, column in FIGURE_SERIES.items():
        path = directory / f"{prefix}{name}.csv"
        try:
            with path.open("w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["nu", column])
                for record in trace.records:
                    value = getattr(record, column)
                    if not math.isnan(value):
                        writer.writerow([record.nu, format_float(value)])
        except OSError as e:
            raise TraceIOError(f"unable to write figure data to path={path}: {e}")
        written.append(path)
    return written
