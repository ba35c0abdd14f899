"""Communication graph and gossip mixing matrix.

Agents are labelled 1..n in graphs, edge lists and the plain-text graph
format. Arrays (adjacency, weights, agent stacks) are indexed 0..n-1.
"""

import logging
import pathlib
import typing
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from dsubgrad.constants import (
    RANDOM_GRAPH_RETRIES,
    SPECTRAL_TOLERANCE,
    STOCHASTIC_TOLERANCE,
)
from dsubgrad.errors import (
    AssumptionViolated,
    DisconnectedAfterRetries,
    InvalidEdge,
    NotConnected,
    TraceIOError,
)
from dsubgrad.utils import format_float

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    n_agents: int
    edges: typing.FrozenSet[typing.Tuple[int, int]]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_agents, self.n_agents))
        for i, j in self.edges:
            A[i - 1, j - 1] = A[j - 1, i - 1] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, agent: int) -> typing.List[int]:
        return sorted(
            j if i == agent else i for i, j in self.edges if agent in (i, j)
        )

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(1, self.n_agents + 1))
        G.add_edges_from(self.edges)
        return G

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())


def build_graph(n_agents: int, edge_list) -> Graph:
    if int(n_agents) != n_agents or n_agents < 1:
        raise InvalidEdge(f"n_agents={n_agents} must be a positive integer")

    edges = set()
    for edge in edge_list:
        i, j = (int(_) for _ in edge)
        if not (1 <= i <= n_agents and 1 <= j <= n_agents):
            raise InvalidEdge(
                f"edge ({i}, {j}) has an endpoint outside [1, {n_agents}]"
            )
        if i == j:
            raise InvalidEdge(f"edge ({i}, {j}) is a self-loop")
        key = (min(i, j), max(i, j))
        if key in edges:
            raise InvalidEdge(f"edge ({i}, {j}) is listed more than once")
        edges.add(key)

    return Graph(n_agents=int(n_agents), edges=frozenset(edges))


def random_graph(
    n_agents: int,
    edge_probability: float,
    seed: int,
    retries: int = RANDOM_GRAPH_RETRIES,
) -> Graph:
    """Erdős–Rényi draw, redrawn until connected.

    Attempt k uses a seed derived from (seed, k) so the sequence of draws is
    reproducible.
    """
    if not 0.0 <= edge_probability <= 1.0:
        raise InvalidEdge(f"edge_probability={edge_probability} must lie in [0, 1]")

    for attempt in range(retries):
        attempt_seed = int(
            np.random.SeedSequence([seed, attempt]).generate_state(1)[0]
        )
        G = nx.gnp_random_graph(n_agents, edge_probability, seed=attempt_seed)
        if nx.is_connected(G):
            logger.debug(
                f"random graph n_agents={n_agents} p={edge_probability} connected after {attempt + 1} draws"
            )
            return build_graph(n_agents, [(i + 1, j + 1) for i, j in G.edges()])

    raise DisconnectedAfterRetries(
        f"no connected graph with n_agents={n_agents} p={edge_probability} seed={seed} within {retries} draws"
    )


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Symmetric doubly stochastic gossip weights respecting a graph.

    Construct through `MixingMatrix.from_weights` or `metropolis_weights`;
    both validate every invariant and cache beta.
    """

    weights: np.ndarray
    beta: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, weights, graph: typing.Optional[Graph] = None):
        W = np.array(weights, dtype=float)
        _check_doubly_stochastic(W, graph)
        beta, eigenvalues = _spectrum(W)
        if beta >= 1.0 - SPECTRAL_TOLERANCE:
            raise AssumptionViolated(
                f"beta={beta} >= 1: the graph is disconnected or the weights are periodic",
                value=beta,
            )
        W.setflags(write=False)
        eigenvalues.setflags(write=False)
        return cls(weights=W, beta=beta, eigenvalues=eigenvalues)

    def mix(self, x: np.ndarray) -> np.ndarray:
        """Apply W ⊗ I to a stack of agent rows.

        einsum keeps a fixed summation order (no BLAS) so results do not
        depend on the linear algebra backend.
        """
        return np.einsum("ij,jk->ik", self.weights, x)

    def lazy(self) -> "MixingMatrix":
        n = self.n_agents
        return MixingMatrix.from_weights((np.eye(n) + self.weights) / 2.0)


def _check_doubly_stochastic(W: np.ndarray, graph: typing.Optional[Graph]):
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise AssumptionViolated(f"mixing matrix must be square, got shape={W.shape}")
    if graph is not None and graph.n_agents != W.shape[0]:
        raise AssumptionViolated(
            f"mixing matrix has {W.shape[0]} rows but the graph has {graph.n_agents} agents"
        )
    if np.any(W < 0):
        raise AssumptionViolated("mixing matrix has negative entries")
    if np.max(np.abs(W - W.T)) > STOCHASTIC_TOLERANCE:
        raise AssumptionViolated("mixing matrix is not symmetric")

    row_error = np.max(np.abs(W.sum(axis=1) - 1.0))
    column_error = np.max(np.abs(W.sum(axis=0) - 1.0))
    if max(row_error, column_error) > STOCHASTIC_TOLERANCE:
        raise AssumptionViolated(
            f"mixing matrix is not doubly stochastic: row error={row_error:.3e} column error={column_error:.3e}",
            value=max(row_error, column_error),
        )

    if graph is not None:
        allowed = graph.adjacency() + np.eye(graph.n_agents)
        if np.any((W > 0) & (allowed == 0)):
            raise AssumptionViolated(
                "mixing matrix puts weight on a pair that is not an edge of the graph"
            )


def _spectrum(W: np.ndarray) -> typing.Tuple[float, np.ndarray]:
    # eigvalsh returns ascending order; the analysis sorts nonincreasing
    eigenvalues = np.linalg.eigvalsh(W)[::-1].copy()
    if abs(eigenvalues[0] - 1.0) > SPECTRAL_TOLERANCE:
        raise AssumptionViolated(
            f"largest eigenvalue={eigenvalues[0]!r} differs from 1",
            value=float(eigenvalues[0]),
        )
    if len(eigenvalues) == 1:
        return 0.0, eigenvalues
    beta = float(max(abs(eigenvalues[1]), abs(eigenvalues[-1])))
    return beta, eigenvalues


def spectral_beta(matrix) -> float:
    """beta = max(|lambda_2|, |lambda_n|) of a symmetric doubly stochastic matrix.

    Raises AssumptionViolated (with `.value` set to beta) when beta >= 1.
    """
    if isinstance(matrix, MixingMatrix):
        return matrix.beta

    W = np.asarray(matrix, dtype=float)
    _check_doubly_stochastic(W, None)
    beta, _ = _spectrum(W)
    if beta >= 1.0 - SPECTRAL_TOLERANCE:
        raise AssumptionViolated(f"beta={beta} violates beta < 1", value=beta)
    return beta


def metropolis_weights(graph: Graph, lazy: bool = False) -> MixingMatrix:
    """Metropolis–Hastings weights W_ij = 1 / (1 + max(deg_i, deg_j)).

    With `lazy=True` the matrix (I + W) / 2 is returned, whose eigenvalues
    are all nonnegative.
    """
    if not graph.is_connected():
        raise NotConnected(f"graph with n_agents={graph.n_agents} is not connected")

    n = graph.n_agents
    degrees = graph.degrees()
    W = np.zeros((n, n))
    for i, j in sorted(graph.edges):
        W[i - 1, j - 1] = W[j - 1, i - 1] = 1.0 / (
            1.0 + max(degrees[i - 1], degrees[j - 1])
        )
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()

    if lazy:
        W = (np.eye(n) + W) / 2.0

    return MixingMatrix.from_weights(W, graph)


def mean_rows(x: np.ndarray) -> np.ndarray:
    """Agent average, summed sequentially over agents."""
    total = np.zeros(x.shape[1:], dtype=float)
    for row in x:
        total = total + row
    return total / x.shape[0]


# ============== plain-text format =============


def write_graph(path, graph: Graph, mixing: typing.Optional[MixingMatrix] = None):
    """First line `n m`, then m lines `i j`, then optionally n weight rows."""
    lines = [f"{graph.n_agents} {len(graph.edges)}"]
    lines.extend(f"{i} {j}" for i, j in sorted(graph.edges))
    if mixing is not None:
        lines.extend(" ".join(format_float(w) for w in row) for row in mixing.weights)
    pathlib.Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> typing.Tuple[Graph, typing.Optional[MixingMatrix]]:
    try:
        rows = [
            line.split()
            for line in pathlib.Path(path).read_text().splitlines()
            if line.strip()
        ]
    except OSError as e:
        raise TraceIOError(f"unable to read graph file={path}: {e}")

    if not rows:
        raise InvalidEdge(f"graph file={path} is empty")

    def integers(k, count):
        if len(rows[k]) != count:
            raise InvalidEdge(
                f"graph file={path} line {k + 1} must hold {count} integers, got {' '.join(rows[k])!r}"
            )
        try:
            return [int(v) for v in rows[k]]
        except ValueError:
            raise InvalidEdge(
                f"graph file={path} line {k + 1} is not integer: {' '.join(rows[k])!r}"
            )

    n, m = integers(0, 2)
    if len(rows) < 1 + m:
        raise InvalidEdge(f"graph file={path} declares {m} edges but lists {len(rows) - 1}")
    graph = build_graph(n, [tuple(integers(k, 2)) for k in range(1, 1 + m)])

    weight_rows = rows[1 + m :]
    if not weight_rows:
        return graph, None
    if len(weight_rows) != n or any(len(row) != n for row in weight_rows):
        raise InvalidEdge(f"graph file={path} must carry an {n}x{n} weight block")
    try:
        weights = np.array([[float(w) for w in row] for row in weight_rows])
    except ValueError as e:
        raise InvalidEdge(f"graph file={path} has a non-numeric weight: {e}")
    return graph, MixingMatrix.from_weights(weights, graph)
