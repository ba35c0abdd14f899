import enum
import io
import json
import typing

import pydantic
from pydantic import root_validator, validator

from dsubgrad.objectives import TieRule
from dsubgrad.oracle import NoiseKind
from dsubgrad.problems import CatalogProblem
from dsubgrad.solver import UpdateRule, validate_schedule
from dsubgrad.utils import yaml


class GraphTypeEnum(str, enum.Enum):
    explicit = "explicit"
    random = "random"
    complete = "complete"
    path = "path"
    file = "file"


class MixingSchemeEnum(str, enum.Enum):
    metropolis = "metropolis"
    lazy_metropolis = "lazy-metropolis"
    file = "file"


class Base(pydantic.BaseModel):
    ...

    class Config:
        extra = "forbid"


# ============== Problem =============


class Problem(Base):
    name: str
    seed: int = 0
    params: typing.Dict[str, typing.Any] = {}

    @validator("name")
    def known_problem(cls, value):
        if value not in CatalogProblem.names():
            raise ValueError(
                f"problem name={value} must be one of {CatalogProblem.names()}"
            )
        return value

    @validator("params")
    def agents_present(cls, value):
        n_agents = value.get("n_agents", 1)
        if not isinstance(n_agents, int) or n_agents < 1:
            raise ValueError(f"params.n_agents={n_agents} must be a positive integer")
        return value


# ============== Network =============


class Graph(Base):
    type: GraphTypeEnum = GraphTypeEnum.random
    edges: typing.Optional[typing.List[typing.Tuple[int, int]]]
    edge_probability: typing.Optional[pydantic.confloat(ge=0, le=1)]
    seed: int = 0
    path: typing.Optional[str]

    @root_validator
    def type_has_fields(cls, values):
        required = {
            GraphTypeEnum.explicit: "edges",
            GraphTypeEnum.random: "edge_probability",
            GraphTypeEnum.file: "path",
        }.get(values.get("type"))
        if required is not None and values.get(required) is None:
            raise ValueError(f"graph type={values['type'].value} requires {required}")
        return values


class Mixing(Base):
    scheme: MixingSchemeEnum = MixingSchemeEnum.metropolis


# ============== Noise and schedule =============


class Noise(Base):
    kind: NoiseKind = NoiseKind.gaussian_truncated
    variance: pydantic.confloat(ge=0) = 0.0
    bound: typing.Optional[pydantic.PositiveFloat]
    batch_fraction: pydantic.confloat(gt=0, le=1) = 0.01


class Schedule(Base):
    a: float = 0.1
    b: float = 1.0
    p: float = 1.0

    @root_validator(skip_on_failure=True)
    def summable(cls, values):
        # AssumptionViolated is a ValueError, reported with the failed condition
        validate_schedule(values["a"], values["b"], values["p"])
        return values


# ============== Solver and diagnostics =============


class Solver(Base):
    n_iters: pydantic.PositiveInt = 1000
    update_rule: UpdateRule = UpdateRule.adapt_then_combine
    tie_rule: TieRule = TieRule.lowest_index
    x0: typing.Optional[typing.List[float]]
    projection: typing.Optional[pydantic.PositiveFloat]
    safeguard_radius: typing.Optional[pydantic.PositiveFloat]
    strict_bounds: bool = False
    early_stop_tol: typing.Optional[pydantic.PositiveFloat]
    early_stop_patience: pydantic.PositiveInt = 100
    verify_every: pydantic.PositiveInt = 100
    checkpoint_every: pydantic.conint(ge=0) = 0


class Diagnostics(Base):
    cadence: pydantic.PositiveInt = 10
    max_combinations: pydantic.PositiveInt = 16
    figure_outputs: bool = False
    plot: bool = False
    dump_data: bool = False


# ==================== Main ===================


class Main(Base):
    name: str = "experiment"
    problem: Problem
    graph: Graph = Graph(type=GraphTypeEnum.complete)
    mixing: Mixing = Mixing()
    noise: Noise = Noise()
    schedule: Schedule = Schedule()
    solver: Solver = Solver()
    diagnostics: Diagnostics = Diagnostics()
    seeds: typing.List[int] = [0]
    output_dir: typing.Optional[str]

    @validator("seeds")
    def seeds_nonempty(cls, value):
        if len(value) == 0:
            raise ValueError("seeds must list at least one seed")
        if len(set(value)) != len(value):
            raise ValueError(f"seeds={value} must not repeat")
        return value

    @root_validator(skip_on_failure=True)
    def mixing_file_needs_graph_file(cls, values):
        if (
            values["mixing"].scheme == MixingSchemeEnum.file
            and values["graph"].type != GraphTypeEnum.file
        ):
            raise ValueError("mixing scheme=file reads weights from a graph of type=file")
        return values

    @property
    def n_agents(self) -> int:
        return self.problem.params.get(
            "n_agents", CatalogProblem.get(self.problem.name).defaults["n_agents"]
        )


def verify(config):
    return Main(**config)


def dump_config(config: Main) -> str:
    """YAML text for a validated config; verify(load(dump)) reproduces it."""
    data = json.loads(config.json(exclude_none=True))
    stream = io.StringIO()
    yaml.dump(data, stream)
    return stream.getvalue()
