import csv
import logging
import pathlib
import typing
from abc import ABC, abstractmethod

import numpy as np

from dsubgrad.errors import BadParams, TraceIOError, UnknownProblem
from dsubgrad.objectives import DistributedProblem
from dsubgrad.utils import format_float

logger = logging.getLogger(__name__)


class CatalogProblem(ABC):
    """Named, parameterized test problem.

    Subclasses register themselves by `name`. Parameters not listed in
    `defaults` are rejected; missing ones take the default.
    """

    _problems = {}

    name = ""  # Each subclass must have a unique name
    defaults: typing.Dict[str, typing.Any] = {}

    def __init_subclass__(cls):
        assert cls.name != ""
        assert cls.name not in cls._problems
        cls._problems[cls.name] = cls

    @classmethod
    def names(cls) -> typing.List[str]:
        return sorted(cls._problems)

    @classmethod
    def get(cls, name) -> typing.Type["CatalogProblem"]:
        if name not in cls._problems:
            raise UnknownProblem(
                f"problem={name} is not one of the catalog problems {cls.names()}"
            )
        return cls._problems[name]

    def __init__(self, params: typing.Optional[dict] = None, seed: int = 0):
        params = dict(params or {})
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise BadParams(
                f"problem={self.name} does not accept parameters {sorted(unknown)}; accepted {sorted(self.defaults)}"
            )
        self.params = {**self.defaults, **params}
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.validate()

    def require(self, condition, message):
        if not condition:
            raise BadParams(f"problem={self.name}: {message}")

    def validate(self):
        n_agents = self.params.get("n_agents")
        self.require(
            isinstance(n_agents, int) and n_agents >= 1,
            f"n_agents={n_agents} must be a positive integer",
        )
        if "dimension" in self.params:
            dimension = self.params["dimension"]
            self.require(
                isinstance(dimension, int) and dimension >= 1,
                f"dimension={dimension} must be a positive integer",
            )

    @abstractmethod
    def build(self) -> DistributedProblem:
        ...


def catalog_problem(name, params=None, seed=0) -> DistributedProblem:
    problem = CatalogProblem.get(name)(params, seed).build()
    logger.debug(
        f"built problem={name} n_agents={problem.n_agents} dimension={problem.dimension} seed={seed}"
    )
    return problem


def dump_problem_data(problem: DistributedProblem, path):
    """Write per-agent data of a data-backed problem as one CSV.

    Columns: agent, a_0..a_{d-1}, then the target columns.
    """
    if problem.data is None:
        raise BadParams(f"problem={problem.name} has no data to dump")

    n_features = problem.data[0][0].shape[1]
    targets = np.atleast_2d(problem.data[0][1].T).T
    header = ["agent"]
    header += [f"a_{d}" for d in range(n_features)]
    header += (
        ["y"] if targets.shape[1] == 1 else [f"y_{k}" for k in range(targets.shape[1])]
    )

    try:
        with pathlib.Path(path).open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for agent, (A, y) in enumerate(problem.data):
                y = np.atleast_2d(y.T).T
                for row, target in zip(A, y):
                    writer.writerow(
                        [agent]
                        + [format_float(v) for v in row]
                        + [format_float(v) for v in target]
                    )
    except OSError as e:
        raise TraceIOError(f"unable to write problem data to path={path}: {e}")
