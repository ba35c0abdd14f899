"""Distributed stochastic subgradient iterations.

Each round every agent draws y_(i) from the oracle at its own iterate, then

    adapt-then-combine:  x+ = (W (x) I)(x - gamma y)
    own-gradient:        x+_(i) = sum_j W_ij x_(j) - gamma y_(i)

Both keep the mean recursion x_bar+ = x_bar - gamma (1/n) sum_i y_(i).
"""

import dataclasses
import enum
import logging
import pathlib
import typing
import zipfile

import numpy as np

from dsubgrad.constants import MEAN_ITERATE_TOLERANCE, MEAN_ITERATE_VERIFY_EVERY
from dsubgrad.diagnostics import (
    BoundednessAlarm,
    DiagnosticsOptions,
    RunTrace,
    TraceRecorder,
)
from dsubgrad.errors import AssumptionViolated, DimensionMismatch, TraceIOError
from dsubgrad.network import MixingMatrix, mean_rows
from dsubgrad.objectives import DistributedProblem
from dsubgrad.oracle import NoisyOracle, OracleSample, substream

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class StepsizeSchedule:
    """gamma^nu = a / (b + nu)^p with a > 0, b >= 1 and 1/2 < p <= 1."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        if not self.a > 0:
            raise AssumptionViolated(
                f"schedule a={self.a} must be positive: stepsizes must be strictly positive",
                value=self.a,
            )
        if not self.b >= 1:
            raise AssumptionViolated(f"schedule b={self.b} must be >= 1", value=self.b)
        if not self.p > 0.5:
            raise AssumptionViolated(
                f"schedule p={self.p} <= 0.5: the sum of squared stepsizes diverges",
                value=self.p,
            )
        if not self.p <= 1:
            raise AssumptionViolated(
                f"schedule p={self.p} > 1: the sum of stepsizes converges",
                value=self.p,
            )

    def __call__(self, nu: int) -> float:
        return self.a / (self.b + nu) ** self.p


def validate_schedule(a, b, p) -> StepsizeSchedule:
    return StepsizeSchedule(a=float(a), b=float(b), p=float(p))


class UpdateRule(str, enum.Enum):
    adapt_then_combine = "adapt-then-combine"
    own_gradient = "own-gradient"


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    update_rule: UpdateRule = UpdateRule.adapt_then_combine
    # project every agent onto the ball of this radius after mixing
    projection_radius: typing.Optional[float] = None
    # non-fatal alarm when an agent leaves this ball
    safeguard_radius: typing.Optional[float] = None
    verify_every: int = MEAN_ITERATE_VERIFY_EVERY
    # every agent draws from agent 0's substream
    shared_noise: bool = False


@dataclasses.dataclass(frozen=True, eq=False)
class SolverState:
    x: np.ndarray
    x_bar: np.ndarray
    nu: int
    schedule: StepsizeSchedule
    seed: int
    # algorithm time sum_{k<nu} gamma^k
    time: float = 0.0

    @classmethod
    def initial(cls, problem: DistributedProblem, x0, schedule, seed):
        x0 = problem.initial_point() if x0 is None else np.asarray(x0, dtype=float)
        if x0.shape != (problem.dimension,):
            raise DimensionMismatch(
                f"x0 has shape={x0.shape}, expected ({problem.dimension},)"
            )
        x = np.tile(x0, (problem.n_agents, 1))
        return cls(x=x, x_bar=x0.copy(), nu=0, schedule=schedule, seed=seed)


@dataclasses.dataclass(frozen=True, eq=False)
class StepRecord:
    nu: int
    gamma: float
    time: float
    # iterates before the step
    x: np.ndarray
    x_bar: np.ndarray
    samples: typing.Tuple[OracleSample, ...]
    y: np.ndarray
    g: np.ndarray
    noise: np.ndarray
    alarms: typing.Tuple[BoundednessAlarm, ...] = ()

    @property
    def mean_direction(self) -> np.ndarray:
        return mean_rows(self.y)


def _check_dimensions(state, problem, mixing):
    n, m = problem.n_agents, problem.dimension
    if state.x.shape != (n, m):
        raise DimensionMismatch(
            f"iterates have shape={state.x.shape}, problem expects ({n}, {m})"
        )
    if mixing is not None and mixing.n_agents != n:
        raise DimensionMismatch(
            f"mixing matrix has {mixing.n_agents} agents, problem has {n}"
        )


def sample_agents(state, problem, oracle, options, executor=None, points=None):
    """Oracle samples for every agent; agent i uses substream (seed, i, nu)."""
    points = state.x if points is None else points

    def draw(i):
        stream = substream(state.seed, 0 if options.shared_noise else i, state.nu)
        return oracle.sample(problem.agents[i], points[i], stream)

    agents = range(problem.n_agents)
    if executor is None:
        return tuple(draw(i) for i in agents)
    return tuple(executor.map(draw, agents))


def _project(x, radius):
    norms = np.linalg.norm(x, axis=1)
    outside = norms > radius
    if not outside.any():
        return x, False
    x = x.copy()
    x[outside] *= (radius / norms[outside])[:, None]
    return x, True


def _advance(state, x_next, direction, gamma, options):
    """Projection, incremental mean update and periodic resynchronization."""
    projected = False
    if options.projection_radius is not None:
        x_next, projected = _project(x_next, options.projection_radius)

    x_bar_next = state.x_bar - gamma * direction
    nu_next = state.nu + 1
    if projected:
        x_bar_next = mean_rows(x_next)
    elif options.verify_every and nu_next % options.verify_every == 0:
        exact = mean_rows(x_next)
        drift = float(np.max(np.abs(x_bar_next - exact)))
        if drift > MEAN_ITERATE_TOLERANCE:
            logger.warning(f"mean iterate drift={drift:.3e} at nu={nu_next}, resynchronized")
        x_bar_next = exact

    alarms = ()
    if options.safeguard_radius is not None:
        norms = np.linalg.norm(x_next, axis=1)
        alarms = tuple(
            BoundednessAlarm(
                nu=nu_next, agent=int(i), norm=float(norms[i]), radius=options.safeguard_radius
            )
            for i in np.flatnonzero(norms > options.safeguard_radius)
        )

    new_state = dataclasses.replace(
        state, x=x_next, x_bar=x_bar_next, nu=nu_next, time=state.time + gamma
    )
    return new_state, alarms


def _record(state, gamma, samples, alarms):
    return StepRecord(
        nu=state.nu,
        gamma=gamma,
        time=state.time,
        x=state.x,
        x_bar=state.x_bar,
        samples=samples,
        y=np.array([s.y for s in samples]),
        g=np.array([s.g for s in samples]),
        noise=np.array([s.noise for s in samples]),
        alarms=alarms,
    )


def step(
    state: SolverState,
    problem: DistributedProblem,
    mixing: MixingMatrix,
    oracle: NoisyOracle,
    options: SolverOptions = SolverOptions(),
    executor=None,
) -> typing.Tuple[SolverState, StepRecord]:
    _check_dimensions(state, problem, mixing)
    gamma = state.schedule(state.nu)
    samples = sample_agents(state, problem, oracle, options, executor)
    Y = np.array([s.y for s in samples])

    if options.update_rule == UpdateRule.own_gradient:
        x_next = mixing.mix(state.x) - gamma * Y
    else:
        x_next = mixing.mix(state.x - gamma * Y)

    new_state, alarms = _advance(state, x_next, mean_rows(Y), gamma, options)
    return new_state, _record(state, gamma, samples, alarms)


def centralized_step(
    state: SolverState,
    problem: DistributedProblem,
    oracle: NoisyOracle,
    options: SolverOptions = SolverOptions(),
    executor=None,
) -> typing.Tuple[SolverState, StepRecord]:
    """x+ = x - gamma (1/n) sum_i y_(i)(x) with every agent at the same point."""
    _check_dimensions(state, problem, None)
    gamma = state.schedule(state.nu)
    samples = sample_agents(
        state, problem, oracle, options, executor, points=[state.x_bar] * problem.n_agents
    )
    direction = mean_rows(np.array([s.y for s in samples]))
    x_next = np.tile(state.x_bar - gamma * direction, (problem.n_agents, 1))
    new_state, alarms = _advance(state, x_next, direction, gamma, options)
    return new_state, _record(state, gamma, samples, alarms)


def run(
    problem: DistributedProblem,
    mixing: typing.Optional[MixingMatrix],
    oracle: NoisyOracle,
    schedule: StepsizeSchedule,
    x0,
    n_iters: int,
    seed: int,
    callbacks: typing.Sequence[typing.Callable] = (),
    options: SolverOptions = SolverOptions(),
    diagnostics: DiagnosticsOptions = DiagnosticsOptions(),
    executor=None,
    state: typing.Optional[SolverState] = None,
    recorder: typing.Optional[TraceRecorder] = None,
    checkpoint_path=None,
    checkpoint_every: int = 0,
) -> RunTrace:
    """Step until iteration `n_iters` and return the diagnostics trace.

    `mixing=None` runs the centralized method. Pass a loaded `state` and
    `recorder` (see `load_checkpoint`) to resume. Callbacks are called
    as `callback(record, state)` after every step.
    """
    if n_iters < 1:
        raise ValueError(f"n_iters={n_iters} must be >= 1")
    if state is None:
        state = SolverState.initial(problem, x0, schedule, seed)
    if recorder is None:
        recorder = TraceRecorder(problem, diagnostics)

    while state.nu < n_iters:
        if mixing is None:
            state, record = centralized_step(state, problem, oracle, options, executor)
        else:
            state, record = step(state, problem, mixing, oracle, options, executor)
        recorder(record)
        for callback in callbacks:
            callback(record, state)

        if checkpoint_path is not None and checkpoint_every and state.nu % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, state, recorder)

        if recorder.should_stop:
            logger.info(f"stationarity below tolerance, stopping early at nu={state.nu}")
            recorder.trace.stopped_early = True
            break

    recorder.trace.final_state = state
    return recorder.trace


def run_centralized(
    problem, oracle, schedule, x0, n_iters, seed, **kwargs
) -> RunTrace:
    return run(problem, None, oracle, schedule, x0, n_iters, seed, **kwargs)


# ============== checkpoints =============

CHECKPOINT_KEYS = ("x", "x_bar", "nu", "seed", "time", "schedule", "m0", "b0")


def save_checkpoint(path, state: SolverState, recorder: TraceRecorder):
    """Iteration index, iterates and partial sums; streams are keyed by (seed, agent, nu)."""
    try:
        with pathlib.Path(path).open("wb") as f:
            np.savez(
                f,
                x=state.x,
                x_bar=state.x_bar,
                nu=state.nu,
                seed=state.seed,
                time=state.time,
                schedule=np.array([state.schedule.a, state.schedule.b, state.schedule.p]),
                m0=recorder.m0,
                b0=recorder.b0,
            )
    except OSError as e:
        raise TraceIOError(f"unable to write checkpoint to path={path}: {e}")
    logger.debug(f"checkpoint nu={state.nu} written to path={path}")


def load_checkpoint(
    path, problem: DistributedProblem, diagnostics: DiagnosticsOptions = DiagnosticsOptions()
) -> typing.Tuple[SolverState, TraceRecorder]:
    """State and recorder to pass to `run` for resuming.

    The recorder starts with an empty trace: rows before the checkpoint
    live in the earlier run's output, only the partial sums carry over.
    """
    try:
        with np.load(pathlib.Path(path)) as data:
            contents = {key: data[key] for key in data.files}
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as e:
        raise TraceIOError(f"unable to read checkpoint from path={path}: {e}")

    missing = sorted(set(CHECKPOINT_KEYS) - set(contents))
    if missing:
        raise TraceIOError(f"checkpoint path={path} is missing keys={missing}")

    a, b, p = contents["schedule"].tolist()
    state = SolverState(
        x=contents["x"],
        x_bar=contents["x_bar"],
        nu=int(contents["nu"]),
        schedule=StepsizeSchedule(a, b, p),
        seed=int(contents["seed"]),
        time=float(contents["time"]),
    )
    _check_dimensions(state, problem, None)
    recorder = TraceRecorder(problem, diagnostics, m0=contents["m0"], b0=contents["b0"])
    return state, recorder
