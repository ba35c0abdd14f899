import pytest

from dsubgrad.cli import cli
from dsubgrad.cli.run import parse_seeds


def test_no_subcommand():
    with pytest.raises(SystemExit) as excinfo:
        cli([])
    assert excinfo.value.code == 1


def test_parse_seeds():
    assert parse_seeds(None) is None
    assert parse_seeds("3,4, 5") == [3, 4, 5]
    with pytest.raises(ValueError):
        parse_seeds("0,a")


def test_validate(write_config, experiment_config, capsys):
    path = write_config(experiment_config)
    assert cli(["validate", str(path), "--dump"]) == 0
    out = capsys.readouterr().out
    assert "n_agents=3" in out
    assert "dimension=1" in out
    assert "name: pytest-abs-sum" in out


def test_validate_bundled_config(capsys):
    assert cli(["validate", "max_quadratics_small"]) == 0
    assert "is valid" in capsys.readouterr().out


def test_schema_error_exits_with_message(write_config, experiment_config):
    experiment_config["schedule"]["p"] = 0.5
    path = write_config(experiment_config)
    with pytest.raises(SystemExit) as excinfo:
        cli(["validate", str(path)])
    assert "schema validation" in str(excinfo.value.code)


def test_missing_config_exits():
    with pytest.raises(SystemExit) as excinfo:
        cli(["run", "no-such-config.yaml"])
    assert "must exist" in str(excinfo.value.code)


def test_config_error_exits(write_config, experiment_config):
    experiment_config["graph"] = {"type": "explicit", "edges": [[1, 2]]}
    path = write_config(experiment_config)
    with pytest.raises(SystemExit) as excinfo:
        cli(["validate", str(path)])
    assert "Configuration error" in str(excinfo.value.code)


def test_run_and_baseline(tmp_path, write_config, experiment_config):
    path = write_config(experiment_config)
    out = tmp_path / "out"
    assert cli(["run", str(path), "--out", str(out), "--seeds", "3,4"]) == 0
    assert (out / "pytest-abs-sum-seed3.csv").is_file()
    assert (out / "pytest-abs-sum-seed4.csv").is_file()
    assert not (out / "pytest-abs-sum-seed0.csv").exists()

    assert cli(["baseline", str(path), "--out", str(out), "--seeds", "3"]) == 0
    assert (out / "pytest-abs-sum-baseline-seed3.csv").is_file()


def test_bad_seeds_exit(write_config, experiment_config, tmp_path):
    path = write_config(experiment_config)
    with pytest.raises(SystemExit) as excinfo:
        cli(["run", str(path), "--out", str(tmp_path), "--seeds", "x"])
    assert "--seeds" in str(excinfo.value.code)


def test_compare(tmp_path, write_config, experiment_config, capsys):
    path = write_config(experiment_config)
    cli(["run", str(path), "--out", str(tmp_path), "--seeds", "0,1"])
    a = str(tmp_path / "pytest-abs-sum-seed0.csv")
    b = str(tmp_path / "pytest-abs-sum-seed1.csv")
    capsys.readouterr()

    assert cli(["compare", a, a, "--tol", "0"]) == 0
    assert cli(["compare", a, b]) == 0
    assert "gamma" in capsys.readouterr().out
    assert cli(["compare", a, b, "--metric", "gamma", "--tol", "0"]) == 0

    with pytest.raises(SystemExit) as excinfo:
        cli(["compare", a, b, "--tol", "0"])
    assert excinfo.value.code == 2
    assert "ComparisonFailed" in capsys.readouterr().err


def test_compare_schema_mismatch_exits(tmp_path, write_config, experiment_config, capsys):
    path = write_config(experiment_config)
    cli(["run", str(path), "--out", str(tmp_path)])
    trace = tmp_path / "pytest-abs-sum-seed0.csv"
    truncated = tmp_path / "truncated.csv"
    truncated.write_text("\n".join(trace.read_text().splitlines()[:5]) + "\n")

    capsys.readouterr()
    with pytest.raises(SystemExit) as excinfo:
        cli(["compare", str(trace), str(truncated)])
    assert excinfo.value.code == 2
    assert "traces have different lengths" in capsys.readouterr().err
