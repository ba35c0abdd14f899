"""Stochastic subgradient oracles y = g + noise.

Noise is drawn from a per-agent, per-iteration substream, so a sample
depends only on (seed, agent, iteration) and never on the order in which
agents are sampled.
"""

import dataclasses
import enum
import logging
import math
import typing

import numpy as np

from dsubgrad.constants import BOUND_SAFETY_FACTOR
from dsubgrad.errors import BoundInfeasible, OracleFailure
from dsubgrad.objectives import (
    DistributedProblem,
    Objective,
    Selection,
    TieRule,
    check_dimension,
)

logger = logging.getLogger(__name__)

# relative slack on the realization bound for rounding in y = g + noise
_BOUND_SLACK = 1e-12


class NoiseKind(str, enum.Enum):
    gaussian_truncated = "gaussian-truncated"
    uniform_ball = "uniform-ball"
    minibatch = "minibatch"


@dataclasses.dataclass(frozen=True)
class NoiseModel:
    """Noise law with second-moment target R and realization bound B.

    For `minibatch` the noise comes from subsampling data terms and R is
    only a reporting target; R = 0 makes every kind deterministic.
    """

    kind: NoiseKind = NoiseKind.gaussian_truncated
    variance: float = 0.0
    bound: typing.Optional[float] = None
    batch_fraction: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not self.variance >= 0:
            raise ValueError(f"variance={self.variance} must be nonnegative")
        if self.bound is not None and not self.bound > 0:
            raise ValueError(f"bound={self.bound} must be positive")
        if not 0 < self.batch_fraction <= 1:
            raise ValueError(f"batch_fraction={self.batch_fraction} must lie in (0, 1]")

    @property
    def deterministic(self) -> bool:
        return self.variance == 0.0

    def batch_size(self, n_terms: int) -> int:
        return min(n_terms, max(1, round(self.batch_fraction * n_terms)))


@dataclasses.dataclass(frozen=True, eq=False)
class OracleSample:
    y: np.ndarray
    g: np.ndarray
    noise: np.ndarray
    # clean branch at x, kept for the update decomposition
    selection: Selection
    bound_violation: bool = False


def substream(seed: int, agent: int, nu: int) -> np.random.Generator:
    return np.random.default_rng([seed, agent, nu])


@dataclasses.dataclass(frozen=True)
class NoisyOracle:
    model: NoiseModel
    tie_rule: TieRule = TieRule.lowest_index
    # raise on ||y|| > B instead of logging
    strict: bool = False

    def perturbation(self, g, rng) -> np.ndarray:
        """Symmetric additive noise with E||noise||^2 <= R and ||g + noise|| <= B."""
        m = g.size
        R = self.model.variance
        if self.model.kind == NoiseKind.uniform_ball:
            direction = rng.standard_normal(m)
            direction /= np.linalg.norm(direction)
            radius = math.sqrt(R * (m + 2) / m) * rng.random() ** (1.0 / m)
            noise = radius * direction
        else:
            noise = math.sqrt(R / m) * rng.standard_normal(m)

        if self.model.bound is not None:
            budget = self.model.bound - np.linalg.norm(g)
            size = np.linalg.norm(noise)
            if size > budget:
                noise = noise * (budget / size)
        return noise

    def sample(self, objective: Objective, x, rng) -> OracleSample:
        x = check_dimension(x, objective.dimension)
        clean = objective.select(x, self.tie_rule, rng)
        g = clean.gradient
        B = self.model.bound
        if B is not None and np.linalg.norm(g) > B:
            raise BoundInfeasible(
                f"clean subgradient norm={np.linalg.norm(g):.6g} exceeds bound={B:.6g}"
            )

        if self.model.deterministic:
            noise = np.zeros_like(g)
        elif self.model.kind == NoiseKind.minibatch:
            n_terms = objective.n_terms
            k = self.model.batch_size(n_terms)
            batch = tuple(sorted(rng.choice(n_terms, size=k, replace=False).tolist()))
            drawn = objective.select(x, self.tie_rule, rng, batch, n_terms / k)
            noise = drawn.gradient - g
        else:
            noise = self.perturbation(g, rng)

        y = g + noise
        violation = B is not None and np.linalg.norm(y) > B * (1.0 + _BOUND_SLACK)
        if violation:
            message = f"oracle sample norm={np.linalg.norm(y):.6g} exceeds bound={B:.6g}"
            if self.strict:
                raise OracleFailure(message)
            logger.debug(message)

        return OracleSample(
            y=y, g=g, noise=noise, selection=clean, bound_violation=bool(violation)
        )


def default_bound(
    problem: DistributedProblem,
    x0,
    variance: float,
    kind: NoiseKind = NoiseKind.gaussian_truncated,
    batch_fraction: float = 1.0,
) -> float:
    """10 * (largest agent subgradient norm at x0 + sqrt(R)).

    For minibatch noise the largest single-term scaled subgradient is used.
    """
    x0 = check_dimension(x0, problem.dimension)
    largest = 0.0
    for agent in problem.agents:
        largest = max(largest, float(np.linalg.norm(agent.clarke_element(x0))))
        if kind == NoiseKind.minibatch and agent.n_terms > 1:
            k = NoiseModel(kind=kind, batch_fraction=batch_fraction).batch_size(
                agent.n_terms
            )
            scale = agent.n_terms / k
            for s in range(agent.n_terms):
                drawn = agent.select(x0, batch=(s,), scale=scale)
                largest = max(largest, float(np.linalg.norm(drawn.gradient)))
    bound = BOUND_SAFETY_FACTOR * (largest + math.sqrt(variance))
    return bound if bound > 0 else BOUND_SAFETY_FACTOR


# ============== assumption checks =============


@dataclasses.dataclass
class ProbeReport:
    point: np.ndarray
    mean_norm: float
    second_moment: float
    max_norm: float
    max_clean_norm: float
    violations: int
    biased: bool


@dataclasses.dataclass
class Assumption2Report:
    probes: typing.List[ProbeReport]
    threshold: float

    @property
    def hard_failure(self) -> bool:
        return any(p.violations > 0 for p in self.probes)

    @property
    def warning(self) -> bool:
        return any(p.biased for p in self.probes)


def verify_assumption2(
    oracle: NoisyOracle, objective: Objective, probe_points, n_samples: int, rng
) -> Assumption2Report:
    """Empirical noise mean, second moment and realization bound per probe point.

    A sample with ||y|| > B is a hard failure; an empirical mean noise norm
    above 4 sqrt(R / n_samples) is a statistical warning.
    """
    probe_points = list(probe_points)
    if not probe_points:
        raise ValueError("verify_assumption2 needs at least one probe point")

    relaxed = dataclasses.replace(oracle, strict=False)
    threshold = 4.0 * math.sqrt(oracle.model.variance / n_samples)
    probes = []
    for x in probe_points:
        x = check_dimension(x, objective.dimension)
        noise_sum = np.zeros(objective.dimension)
        second, max_norm, max_clean, violations = 0.0, 0.0, 0.0, 0
        for _ in range(n_samples):
            sample = relaxed.sample(objective, x, rng)
            noise_sum = noise_sum + sample.noise
            second += float(sample.noise @ sample.noise)
            max_norm = max(max_norm, float(np.linalg.norm(sample.y)))
            max_clean = max(max_clean, float(np.linalg.norm(sample.g)))
            violations += int(sample.bound_violation)

        mean_norm = float(np.linalg.norm(noise_sum / n_samples))
        probe = ProbeReport(
            point=x,
            mean_norm=mean_norm,
            second_moment=second / n_samples,
            max_norm=max_norm,
            max_clean_norm=max_clean,
            violations=violations,
            biased=mean_norm > threshold,
        )
        if probe.violations:
            logger.error(
                f"{violations} of {n_samples} samples exceed bound={oracle.model.bound} at x={x}"
            )
        if probe.biased:
            logger.warning(
                f"empirical noise mean norm={mean_norm:.3e} above threshold={threshold:.3e} at x={x}"
            )
        probes.append(probe)

    return Assumption2Report(probes=probes, threshold=threshold)
