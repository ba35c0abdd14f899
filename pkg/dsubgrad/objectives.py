"""Per-agent objectives written as maxima of smooth functions.

An agent objective f_i is either a single max over smooth components

    f_i(x) = max_j f_ij(x)

or a sum of such maxima (one per data term, plus an optional regularizer).
A sum of maxima is itself a max of smooth functions over the product of the
per-term index sets, so every objective is described by its *kinks*: one
max per kink, each with a tuple of currently active pieces. A branch picks
pieces at every kink; its gradient is an element of the Clarke
subdifferential wherever the branch is active.
"""

import enum
import itertools
import logging
import math
import typing
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from dsubgrad.constants import (
    ACTIVE_RELATIVE_TOLERANCE,
    FD_RELATIVE_ERROR,
    FD_RELATIVE_STEP,
    MAX_ACTIVE_COMBINATIONS,
)
from dsubgrad.errors import BranchUnavailable, DimensionMismatch

logger = logging.getLogger(__name__)

Choices = typing.Tuple[typing.Tuple[int, ...], ...]


class TieRule(str, enum.Enum):
    lowest_index = "lowest-index"
    uniform_random = "uniform-random"
    convex_average = "convex-average"


@dataclass(frozen=True, eq=False)
class SmoothComponent:
    value_fn: typing.Callable[[np.ndarray], float]
    gradient_fn: typing.Callable[[np.ndarray], np.ndarray]
    # Lipschitz constant of gradient_fn; 0 for affine pieces
    lipschitz_grad_bound: float

    def __post_init__(self):
        if not self.lipschitz_grad_bound >= 0:
            raise ValueError(
                f"lipschitz_grad_bound={self.lipschitz_grad_bound} must be nonnegative"
            )


@dataclass(frozen=True, eq=False)
class Branch:
    """Pieces chosen at every kink, plus the data terms they were drawn for.

    `batch=None` means all data terms. `scale` multiplies the data-term part
    of the gradient (minibatch debiasing); regularizers are never scaled.
    """

    choices: typing.Any
    batch: typing.Optional[typing.Tuple[int, ...]] = None
    scale: float = 1.0


@dataclass(frozen=True, eq=False)
class Selection:
    branch: Branch
    gradient: np.ndarray
    lipschitz: typing.Optional[float] = None


def check_dimension(x, dimension: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dimension,):
        raise DimensionMismatch(
            f"point has shape={x.shape} but the objective expects ({dimension},)"
        )
    return x


def active_band(tolerance: typing.Optional[float], value: float) -> float:
    if tolerance is not None:
        return tolerance
    return ACTIVE_RELATIVE_TOLERANCE * (1.0 + abs(value))


def resolve_ties(choice_sets, tie_rule: TieRule, rng=None) -> Choices:
    """Reduce each kink's active pieces according to the tie rule."""
    tie_rule = TieRule(tie_rule)
    resolved = []
    for pieces in choice_sets:
        if len(pieces) == 1 or tie_rule == TieRule.convex_average:
            resolved.append(tuple(pieces))
        elif tie_rule == TieRule.lowest_index:
            resolved.append((pieces[0],))
        else:
            if rng is None:
                raise ValueError("tie_rule=uniform-random needs a random stream")
            resolved.append((pieces[int(rng.integers(len(pieces)))],))
    return tuple(resolved)


class Objective(ABC):
    """Locally Lipschitz f: R^m -> R with a max-of-smooth description."""

    dimension: int

    @property
    def n_terms(self) -> int:
        """Number of data terms a minibatch may subsample."""
        return 1

    @property
    def n_kinks(self) -> int:
        return 1

    @abstractmethod
    def value(self, x) -> float:
        ...

    @abstractmethod
    def choice_sets(self, x, batch=None) -> typing.List[typing.Tuple[int, ...]]:
        """Active pieces (ascending) at every kink of the selected terms."""

    @abstractmethod
    def gradient(self, x, choices, batch=None, scale=1.0) -> np.ndarray:
        """Gradient of the branch `choices`, averaging pieces listed together."""

    def branch_lipschitz(self, branch: Branch) -> typing.Optional[float]:
        return None

    def select(
        self, x, tie_rule=TieRule.lowest_index, rng=None, batch=None, scale=1.0
    ) -> Selection:
        x = check_dimension(x, self.dimension)
        choices = resolve_ties(self.choice_sets(x, batch), tie_rule, rng)
        branch = Branch(choices=choices, batch=batch, scale=scale)
        return Selection(
            branch=branch,
            gradient=self.gradient(x, choices, batch, scale),
            lipschitz=self.branch_lipschitz(branch),
        )

    def branch_gradient(self, x, branch: Branch) -> np.ndarray:
        x = check_dimension(x, self.dimension)
        return self.gradient(x, branch.choices, branch.batch, branch.scale)

    def clarke_element(self, x, tie_rule=TieRule.lowest_index, rng=None) -> np.ndarray:
        return self.select(x, tie_rule, rng).gradient

    def count_active(self, x) -> int:
        return math.prod(len(pieces) for pieces in self.choice_sets(x))

    def active_branches(self, x) -> typing.List[Choices]:
        """Every pure branch (one piece per kink) active at x."""
        choice_sets = self.choice_sets(x)
        return [
            tuple((j,) for j in combo) for combo in itertools.product(*choice_sets)
        ]

    def vertex_gradients(self, x, limit=MAX_ACTIVE_COMBINATIONS):
        """Gradients of all active pure branches, or None beyond `limit`."""
        x = check_dimension(x, self.dimension)
        if self.count_active(x) > limit:
            return None
        return [self.gradient(x, choices) for choices in self.active_branches(x)]


class MaxOfSmoothObjective(Objective):
    def __init__(
        self,
        components: typing.Sequence[SmoothComponent],
        dimension: int,
        active_tolerance: typing.Optional[float] = None,
    ):
        if len(components) == 0:
            raise ValueError("a max-of-smooth objective needs at least one component")
        if active_tolerance is not None and active_tolerance < 0:
            raise ValueError(f"active_tolerance={active_tolerance} must be nonnegative")
        self.components = tuple(components)
        self.dimension = int(dimension)
        self.active_tolerance = active_tolerance

    def component_values(self, x) -> typing.List[float]:
        x = check_dimension(x, self.dimension)
        return [float(c.value_fn(x)) for c in self.components]

    def value(self, x) -> float:
        return max(self.component_values(x))

    def active_set(self, x, tolerance=None) -> typing.FrozenSet[int]:
        values = self.component_values(x)
        top = max(values)
        band = active_band(
            tolerance if tolerance is not None else self.active_tolerance, top
        )
        return frozenset(j for j, v in enumerate(values) if v >= top - band)

    def choice_sets(self, x, batch=None):
        return [tuple(sorted(self.active_set(x)))]

    def gradient(self, x, choices, batch=None, scale=1.0):
        if len(choices) != 1:
            raise BranchUnavailable(
                f"branch has {len(choices)} kinks, this objective has exactly one"
            )
        (pieces,) = choices
        if not pieces or max(pieces) >= len(self.components):
            raise BranchUnavailable(f"pieces={pieces} are not components")
        total = np.zeros(self.dimension)
        for j in pieces:
            total = total + np.asarray(self.components[j].gradient_fn(x), dtype=float)
        return scale * (total / len(pieces))

    def branch_lipschitz(self, branch):
        (pieces,) = branch.choices
        return branch.scale * max(
            self.components[j].lipschitz_grad_bound for j in pieces
        )


class SeparableObjective(Objective):
    """Sum of max-of-smooth data terms plus an optional regularizer."""

    def __init__(
        self,
        terms: typing.Sequence[Objective],
        regularizer: typing.Optional[Objective] = None,
    ):
        if len(terms) == 0:
            raise ValueError("a separable objective needs at least one term")
        dimensions = {t.dimension for t in terms}
        if regularizer is not None:
            dimensions.add(regularizer.dimension)
        if len(dimensions) != 1:
            raise DimensionMismatch(f"terms disagree on dimension: {sorted(dimensions)}")
        self.terms = tuple(terms)
        self.regularizer = regularizer
        self.dimension = dimensions.pop()

    @property
    def n_terms(self):
        return len(self.terms)

    @property
    def n_kinks(self):
        fixed = self.regularizer.n_kinks if self.regularizer is not None else 0
        return fixed + sum(t.n_kinks for t in self.terms)

    def _batch(self, batch):
        return range(len(self.terms)) if batch is None else batch

    def value(self, x):
        x = check_dimension(x, self.dimension)
        total = 0.0 if self.regularizer is None else self.regularizer.value(x)
        for term in self.terms:
            total += term.value(x)
        return total

    def choice_sets(self, x, batch=None):
        x = check_dimension(x, self.dimension)
        sets = [] if self.regularizer is None else self.regularizer.choice_sets(x)
        for s in self._batch(batch):
            sets.extend(self.terms[s].choice_sets(x))
        return sets

    def _split(self, choices, batch):
        choices = tuple(choices)
        offset = 0
        fixed = ()
        if self.regularizer is not None:
            offset = self.regularizer.n_kinks
            fixed = choices[:offset]
        parts = []
        for s in self._batch(batch):
            width = self.terms[s].n_kinks
            parts.append((s, choices[offset : offset + width]))
            offset += width
        if offset != len(choices):
            raise BranchUnavailable(
                f"branch has {len(choices)} kinks but the selected terms have {offset}"
            )
        return fixed, parts

    def gradient(self, x, choices, batch=None, scale=1.0):
        fixed, parts = self._split(choices, batch)
        data = np.zeros(self.dimension)
        for s, term_choices in parts:
            data = data + self.terms[s].gradient(x, term_choices)
        if self.regularizer is None:
            return scale * data
        return self.regularizer.gradient(x, fixed) + scale * data

    def branch_lipschitz(self, branch):
        fixed, parts = self._split(branch.choices, branch.batch)
        total = 0.0
        for s, term_choices in parts:
            bound = self.terms[s].branch_lipschitz(Branch(term_choices))
            if bound is None:
                return None
            total += bound
        total *= branch.scale
        if self.regularizer is not None:
            bound = self.regularizer.branch_lipschitz(Branch(fixed))
            if bound is None:
                return None
            total += bound
        return total


def absolute_value_term(
    residual_fn, residual_gradient_fn, dimension, residual_lipschitz=0.0
) -> MaxOfSmoothObjective:
    """|r(x)| written as max(r(x), -r(x))."""
    return MaxOfSmoothObjective(
        [
            SmoothComponent(
                residual_fn, residual_gradient_fn, residual_lipschitz
            ),
            SmoothComponent(
                lambda x: -residual_fn(x),
                lambda x: -residual_gradient_fn(x),
                residual_lipschitz,
            ),
        ],
        dimension=dimension,
    )


@dataclass(frozen=True, eq=False)
class DistributedProblem:
    """F(theta) = sum_i f_i(theta); agent i only knows f_i."""

    agents: typing.Tuple[Objective, ...]
    dimension: int
    name: str = ""
    x0: typing.Optional[np.ndarray] = None
    # known global minimizer, when the construction provides one
    minimizer: typing.Optional[np.ndarray] = None
    # per-agent (features, targets) for data-backed problems
    data: typing.Optional[typing.Tuple[typing.Tuple[np.ndarray, np.ndarray], ...]] = (
        field(default=None, repr=False)
    )

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) == 0:
            raise ValueError("a distributed problem needs at least one agent")
        for i, agent in enumerate(self.agents):
            if agent.dimension != self.dimension:
                raise DimensionMismatch(
                    f"agent {i} has dimension={agent.dimension}, problem has {self.dimension}"
                )

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def value(self, x) -> float:
        total = 0.0
        for agent in self.agents:
            total += agent.value(x)
        return total

    def initial_point(self) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(self.dimension)
        return np.array(self.x0, dtype=float)


# ============== stationarity =============


@dataclass(frozen=True)
class Stationarity:
    value: float
    exact: bool
    convex_average_norm: float
    combinations: int


def min_norm_element(points) -> np.ndarray:
    """Minimal-norm point of the convex hull of the rows of `points`."""
    G = np.unique(np.atleast_2d(np.asarray(points, dtype=float)), axis=0)
    if G.shape[0] == 1:
        return G[0].copy()

    if G.shape[1] == 1:
        lo, hi = G[:, 0].min(), G[:, 0].max()
        if lo <= 0.0 <= hi:
            return np.zeros(1)
        return np.array([lo if lo > 0 else hi])

    origin = np.zeros(G.shape[1])
    if in_convex_hull(G, origin, tol=1e-12):
        return origin

    k = G.shape[0]
    H = G @ G.T
    result = optimize.minimize(
        lambda lam: lam @ H @ lam,
        np.full(k, 1.0 / k),
        jac=lambda lam: 2.0 * H @ lam,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda lam: lam.sum() - 1.0}],
        options={"ftol": 1e-16, "maxiter": 500},
    )
    lam = np.clip(result.x, 0.0, None)
    lam = lam / lam.sum()
    best = lam @ G

    # polish on the support through the KKT system of the equality QP
    support = np.flatnonzero(lam > 1e-9)
    s = len(support)
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = 2.0 * H[np.ix_(support, support)]
    kkt[:s, s] = kkt[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[s] = 1.0
    solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:s]
    if np.all(solution >= -1e-14) and abs(solution.sum() - 1.0) < 1e-12:
        polished = np.clip(solution, 0.0, None) @ G[support]
        if np.linalg.norm(polished) <= np.linalg.norm(best):
            best = polished

    return best


def in_convex_hull(points, v, tol=1e-9) -> bool:
    """Hull membership through the LP min ||G^T lam - v||_1 over the simplex."""
    G = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(v, dtype=float)
    k, m = G.shape
    # variables: lam (k), slack t (m)
    c = np.concatenate([np.zeros(k), np.ones(m)])
    A_ub = np.block([[G.T, -np.eye(m)], [-G.T, -np.eye(m)]])
    b_ub = np.concatenate([v, -v])
    A_eq = np.concatenate([np.ones(k), np.zeros(m)])[None, :]
    result = optimize.linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * (k + m),
        method="highs",
    )
    return bool(result.success and result.fun <= tol * (1.0 + np.linalg.norm(v)))


def stationarity_measure(
    problem: DistributedProblem, x, max_combinations=MAX_ACTIVE_COMBINATIONS
) -> Stationarity:
    """Norm of the minimal-norm element of sum_i conv{active gradients of f_i}.

    Exact while the product of active-set sizes across agents stays within
    `max_combinations`; otherwise the convex-average element is used and
    `exact` is False.
    """
    x = check_dimension(x, problem.dimension)

    convex_average = np.zeros(problem.dimension)
    for agent in problem.agents:
        convex_average = (
            convex_average + agent.select(x, TieRule.convex_average).gradient
        )
    convex_average_norm = float(np.linalg.norm(convex_average))

    combinations = 1
    for agent in problem.agents:
        combinations *= agent.count_active(x)
        if combinations > max_combinations:
            return Stationarity(
                value=convex_average_norm,
                exact=False,
                convex_average_norm=convex_average_norm,
                combinations=combinations,
            )

    per_agent = [agent.vertex_gradients(x, max_combinations) for agent in problem.agents]
    sums = []
    for combo in itertools.product(*per_agent):
        total = np.zeros(problem.dimension)
        for g in combo:
            total = total + g
        sums.append(total)

    return Stationarity(
        value=float(np.linalg.norm(min_norm_element(np.array(sums)))),
        exact=True,
        convex_average_norm=convex_average_norm,
        combinations=combinations,
    )


# ============== finite differences =============


def finite_difference_gradient(value_fn, x, step=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = step if step is not None else FD_RELATIVE_STEP * (1.0 + np.linalg.norm(x))
    g = np.zeros_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e[d] = h
        g[d] = (value_fn(x + e) - value_fn(x - e)) / (2.0 * h)
    return g


def gradient_error(value_fn, gradient, x) -> float:
    """Error of `gradient` against central differences.

    Relative to the finite-difference norm when that exceeds 1 and absolute
    below, so near-zero gradients are checked to an absolute tolerance.
    """
    fd = finite_difference_gradient(value_fn, x)
    return float(np.linalg.norm(np.asarray(gradient) - fd) / max(1.0, np.linalg.norm(fd)))


def gradient_check(objective: Objective, points, rtol=FD_RELATIVE_ERROR) -> float:
    """Largest finite-difference error of clarke_element over smooth points.

    Points where more than one branch is active are skipped.
    """
    worst = 0.0
    for x in points:
        if objective.count_active(x) != 1:
            continue
        error = gradient_error(objective.value, objective.clarke_element(x), x)
        worst = max(worst, error)
        if error > rtol:
            logger.warning(f"gradient mismatch error={error:.3e} at x={x}")
    return worst
