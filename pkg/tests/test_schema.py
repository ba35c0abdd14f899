import io

import pytest
from pydantic import ValidationError

from dsubgrad.harness import build_components, load_config
from dsubgrad.schema import GraphTypeEnum, dump_config, verify
from dsubgrad.utils import bundled_config_directory, yaml


def test_schema(experiment_config):
    config = verify(experiment_config)
    assert config.n_agents == 3
    assert config.graph.type == GraphTypeEnum.path
    assert config.solver.checkpoint_every == 0
    assert config.diagnostics.max_combinations == 16


def test_defaults_fill_in():
    config = verify({"problem": {"name": "max_quadratics"}})
    assert config.name == "experiment"
    assert config.graph.type == GraphTypeEnum.complete
    assert config.n_agents == 2
    assert config.seeds == [0]


@pytest.mark.parametrize(
    "section, patch",
    [
        ("problem", {"name": "rosenbrock"}),
        ("problem", {"params": {"n_agents": 0}}),
        ("graph", {"type": "random"}),
        ("graph", {"type": "explicit"}),
        ("graph", {"type": "ring"}),
        ("noise", {"kind": "laplace"}),
        ("noise", {"variance": -1.0}),
        ("noise", {"batch_fraction": 0.0}),
        ("schedule", {"p": 0.5}),
        ("schedule", {"p": 1.5}),
        ("schedule", {"b": 0.0}),
        ("solver", {"n_iters": 0}),
        ("solver", {"tie_rule": "highest-index"}),
        ("solver", {"iterations": 10}),
        ("diagnostics", {"cadence": 0}),
    ],
)
def test_schema_rejects(experiment_config, section, patch):
    experiment_config[section] = {**experiment_config[section], **patch}
    with pytest.raises(ValidationError):
        verify(experiment_config)


@pytest.mark.parametrize("seeds", [[], [1, 1]])
def test_seeds_rules(experiment_config, seeds):
    experiment_config["seeds"] = seeds
    with pytest.raises(ValidationError):
        verify(experiment_config)


def test_unknown_top_level_key(experiment_config):
    experiment_config["extra"] = True
    with pytest.raises(ValidationError):
        verify(experiment_config)


def test_mixing_file_needs_graph_file(experiment_config):
    experiment_config["mixing"] = {"scheme": "file"}
    with pytest.raises(ValidationError):
        verify(experiment_config)

    experiment_config["graph"] = {"type": "file", "path": "graph.txt"}
    assert verify(experiment_config).graph.path == "graph.txt"


def test_dump_roundtrip(experiment_config):
    experiment_config["graph"] = {
        "type": "explicit",
        "edges": [[1, 2], [2, 3]],
    }
    config = verify(experiment_config)
    text = dump_config(config)
    assert "noise:" in text
    assert verify(yaml.load(io.StringIO(text))) == config


@pytest.mark.parametrize(
    "name", sorted(p.stem for p in bundled_config_directory().glob("*.yaml"))
)
def test_bundled_configs(name):
    config = load_config(name)
    assert config.name == name
    components = build_components(config)
    assert components.mixing.beta < 1.0
    assert components.x0.shape == (components.problem.dimension,)
