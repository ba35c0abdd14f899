import pytest

from dsubgrad.cli import cli
from dsubgrad.errors import UnknownProblem
from dsubgrad.harness import build_components, load_config
from dsubgrad.initialize import render_config
from dsubgrad.problems import CatalogProblem
from dsubgrad.schema import verify


@pytest.mark.parametrize("problem_name", CatalogProblem.names())
def test_init(problem_name):
    config = verify(render_config(problem_name, n_agents=4, n_iters=50))
    assert config.name == problem_name
    assert config.n_agents == 4
    assert config.solver.n_iters == 50


def test_init_overrides():
    config = render_config("tiny_relu_net", name="relu", edge_probability=0.8, seeds=[3, 4])
    assert config["name"] == "relu"
    assert config["noise"]["kind"] == "minibatch"
    assert config["graph"]["edge_probability"] == 0.8
    assert config["seeds"] == [3, 4]
    # the base configuration is never mutated
    assert render_config("abs_sum")["noise"]["kind"] == "gaussian-truncated"


def test_init_unknown_problem():
    with pytest.raises(UnknownProblem):
        render_config("rosenbrock")


def test_init_cli(tmp_path, capsys):
    path = tmp_path / "starter.yaml"
    status = cli(
        ["init", "abs_sum", "--output", str(path), "--agents", "5", "--iters", "20"]
    )
    assert status == 0
    assert f"wrote {path}" in capsys.readouterr().out

    config = load_config(path)
    assert config.n_agents == 5
    build_components(config)

    with pytest.raises(SystemExit) as excinfo:
        cli(["init", "abs_sum", "--output", str(path)])
    assert "already exists" in str(excinfo.value.code)
