import os
import pathlib

import numpy as np
import pytest

from dsubgrad.network import build_graph, metropolis_weights
from dsubgrad.objectives import (
    DistributedProblem,
    MaxOfSmoothObjective,
    SmoothComponent,
)
from dsubgrad.oracle import NoiseModel, NoisyOracle
from dsubgrad.problems import catalog_problem
from dsubgrad.solver import StepsizeSchedule
from dsubgrad.utils import yaml

# (problem name, params) small enough for exhaustive checks
CATALOG_INPUTS = [
    ("abs_sum", {"n_agents": 3, "dimension": 2}),
    ("max_quadratics", {"n_agents": 2, "dimension": 2}),
    ("robust_regression_l1", {"n_agents": 2, "dimension": 3, "samples_per_agent": 6}),
    ("phase_retrieval_toy", {"n_agents": 2, "dimension": 3, "samples_per_agent": 5}),
    (
        "tiny_relu_net",
        {"n_agents": 2, "samples_per_agent": 6, "n_features": 3, "n_hidden": 2},
    ),
]

MEDIAN_CENTERS = [-1.0, 0.0, 4.0]


def absolute_value(dimension=1):
    """max(x_0, -x_0) on R^dimension."""
    e = np.zeros(dimension)
    e[0] = 1.0
    return MaxOfSmoothObjective(
        [
            SmoothComponent(lambda x: float(x[0]), lambda x: e.copy(), 0.0),
            SmoothComponent(lambda x: float(-x[0]), lambda x: -e.copy(), 0.0),
        ],
        dimension=dimension,
    )


def zero_problem(n_agents, dimension=1):
    zero = SmoothComponent(lambda x: 0.0, lambda x: np.zeros(dimension), 0.0)
    return DistributedProblem(
        agents=[MaxOfSmoothObjective([zero], dimension) for _ in range(n_agents)],
        dimension=dimension,
        name="zero",
    )


def path_graph(n_agents):
    return build_graph(n_agents, [(i, i + 1) for i in range(1, n_agents)])


def deterministic_oracle(**kwargs):
    return NoisyOracle(NoiseModel(variance=0.0), **kwargs)


@pytest.fixture
def median_problem():
    """f_i(x) = |x - c_i| with c = (-1, 0, 4); F is minimized at 0."""
    return catalog_problem(
        "abs_sum", {"n_agents": 3, "dimension": 1, "centers": MEDIAN_CENTERS}
    )


@pytest.fixture
def path_mixing():
    return metropolis_weights(path_graph(3))


@pytest.fixture
def harmonic_schedule():
    # gamma = 0.1 / (1 + nu)
    return StepsizeSchedule(0.1, 1.0, 1.0)


@pytest.fixture
def experiment_config():
    """A small, fast experiment as a plain dict."""
    return {
        "name": "pytest-abs-sum",
        "problem": {
            "name": "abs_sum",
            "seed": 0,
            "params": {
                "n_agents": 3,
                "dimension": 1,
                "centers": MEDIAN_CENTERS,
                "x0": [1.0],
            },
        },
        "graph": {"type": "path"},
        "noise": {"kind": "gaussian-truncated", "variance": 0.01},
        "schedule": {"a": 1.0, "b": 1.0, "p": 1.0},
        "solver": {"n_iters": 200},
        "diagnostics": {"cadence": 10},
        "seeds": [0],
    }


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict as yaml under tmp_path and return its path."""

    def _write(config, filename="experiment.yaml"):
        path = tmp_path / filename
        with path.open("w") as f:
            yaml.dump(config, f)
        return path

    return _write


GOLDEN_DIRECTORY = pathlib.Path(__file__).parent / "golden"


@pytest.fixture
def golden_file():
    """Path of a reference file under tests/golden.

    A missing file (or DSUBGRAD_REGENERATE_GOLDEN=1) is written with `record(path)`
    and the test is skipped, so references are only ever produced by the
    code under test.
    """
    regenerate = os.getenv("DSUBGRAD_REGENERATE_GOLDEN", "") not in ("", "0")

    def _golden(name, record):
        path = GOLDEN_DIRECTORY / name
        if regenerate or not path.is_file():
            GOLDEN_DIRECTORY.mkdir(exist_ok=True)
            record(path)
            pytest.skip(f"recorded golden file {path.name}")
        return path

    return _golden
