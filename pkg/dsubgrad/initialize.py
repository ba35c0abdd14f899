import copy
import logging

from dsubgrad.problems import CatalogProblem

logger = logging.getLogger(__name__)


BASE_CONFIGURATION = {
    "name": None,
    "problem": {"name": None, "seed": 0, "params": {}},
    "graph": {"type": "random", "edge_probability": 0.5, "seed": 0},
    "mixing": {"scheme": "metropolis"},
    "noise": {"kind": "gaussian-truncated", "variance": 1.0},
    "schedule": {"a": 0.1, "b": 1.0, "p": 0.75},
    "solver": {"n_iters": 1000, "tie_rule": "lowest-index"},
    "diagnostics": {"cadence": 10},
    "seeds": [0],
}

# noise and schedule that suit each problem out of the box
PROBLEM_OVERRIDES = {
    "tiny_relu_net": {
        "noise": {"kind": "minibatch", "variance": 1.0, "batch_fraction": 0.01},
        # gamma = 0.1 / (1 + nu / 1000)^0.75
        "schedule": {"a": 17.782794100389228, "b": 1000.0, "p": 0.75},
    },
    "robust_regression_l1": {
        "noise": {"kind": "minibatch", "variance": 1.0, "batch_fraction": 0.25},
    },
}


def render_config(
    problem_name: str,
    name: str = None,
    n_agents: int = None,
    edge_probability: float = None,
    n_iters: int = None,
    seeds=None,
):
    """Starter experiment config for a catalog problem, as a plain dict."""
    config = copy.deepcopy(BASE_CONFIGURATION)
    CatalogProblem.get(problem_name)

    config["name"] = name or problem_name
    config["problem"]["name"] = problem_name
    for section, values in PROBLEM_OVERRIDES.get(problem_name, {}).items():
        config[section].update(values)

    if n_agents is not None:
        config["problem"]["params"]["n_agents"] = n_agents
    if edge_probability is not None:
        config["graph"]["edge_probability"] = edge_probability
    if n_iters is not None:
        config["solver"]["n_iters"] = n_iters
    if seeds:
        config["seeds"] = list(seeds)

    logger.debug(f"rendered starter config for problem={problem_name}")
    return config
