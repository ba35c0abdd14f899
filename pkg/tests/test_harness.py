import io
import shutil
import sys

import numpy as np
import pytest
from rich.console import Console

from dsubgrad import harness
from dsubgrad.diagnostics import read_csv
from dsubgrad.errors import ConfigError, SchemaMismatch
from dsubgrad.network import metropolis_weights, write_graph
from dsubgrad.schema import verify
from dsubgrad.utils import load_yaml, output_directory, run_subprocess_cmd

from .conftest import path_graph


def quiet():
    return Console(file=io.StringIO())


def single_agent(experiment_config):
    experiment_config["problem"]["params"] = {
        "n_agents": 1,
        "dimension": 1,
        "centers": [0.5],
        "x0": [2.0],
    }
    return verify(experiment_config)


def test_build_components(experiment_config):
    components = harness.build_components(verify(experiment_config))
    assert components.mixing.beta == pytest.approx(2.0 / 3.0)
    np.testing.assert_array_equal(components.x0, [1.0])
    # 10 * (max |g(x0)| + sqrt(R))
    assert components.oracle.model.bound == pytest.approx(11.0)
    assert components.schedule(0) == 1.0
    assert components.diagnostics_options.cadence == 10


def test_build_components_x0_dimension(experiment_config):
    experiment_config["solver"]["x0"] = [1.0, 2.0]
    with pytest.raises(ConfigError):
        harness.build_components(verify(experiment_config))


def test_graph_file(tmp_path, experiment_config):
    path = tmp_path / "graph.txt"
    mixing = metropolis_weights(path_graph(3))
    write_graph(path, path_graph(3), mixing)
    experiment_config["graph"] = {"type": "file", "path": str(path)}
    experiment_config["mixing"] = {"scheme": "file"}
    components = harness.build_components(verify(experiment_config))
    np.testing.assert_array_equal(components.mixing.weights, mixing.weights)

    experiment_config["problem"]["params"]["n_agents"] = 4
    experiment_config["problem"]["params"]["centers"] = [0.0, 1.0, 2.0, 3.0]
    with pytest.raises(ConfigError):
        harness.build_components(verify(experiment_config))


def test_graph_file_without_weights(tmp_path, experiment_config):
    path = tmp_path / "graph.txt"
    path.write_text("3 2\n1 2\n2 3\n")
    experiment_config["graph"] = {"type": "file", "path": str(path)}
    assert harness.build_components(verify(experiment_config)).mixing.beta < 1

    experiment_config["mixing"] = {"scheme": "file"}
    with pytest.raises(ConfigError):
        harness.build_components(verify(experiment_config))


def test_disconnected_graph(experiment_config):
    experiment_config["graph"] = {"type": "explicit", "edges": [[1, 2]]}
    with pytest.raises(ConfigError):
        harness.build_components(verify(experiment_config))


def test_run_experiment(tmp_path, experiment_config):
    experiment_config["seeds"] = [0, 1]
    result = harness.run_experiment(verify(experiment_config), tmp_path, console=quiet())
    assert result.status == 0
    assert sorted(result.summaries) == [0, 1]

    trace = read_csv(tmp_path / "pytest-abs-sum-seed1.csv")
    assert len(trace) == 200
    final = (tmp_path / "pytest-abs-sum-seed0-final.csv").read_text().splitlines()
    assert final[0] == "agent,x_0"
    assert [line.split(",")[0] for line in final[1:]] == ["0", "1", "2", "mean"]

    summary = load_yaml(tmp_path / "pytest-abs-sum-summary.yaml")
    assert summary["problem"] == "abs_sum"
    assert summary["seeds"][0]["iterations"] == 200
    assert summary["seeds"][1]["stopped_early"] is False
    assert set(summary["aggregate"]) >= {"consensus_error", "stationarity_at_mean"}
    assert summary["aggregate"]["iterations"] == {"median": 200.0, "iqr": 0.0}


def test_run_experiment_outputs(tmp_path, experiment_config):
    experiment_config["diagnostics"]["figure_outputs"] = True
    experiment_config["solver"]["checkpoint_every"] = 50
    harness.run_experiment(verify(experiment_config), tmp_path, console=quiet())
    for suffix in ("consensus_error", "stationarity", "objective"):
        assert (tmp_path / f"pytest-abs-sum-seed0-{suffix}.csv").is_file()
    assert (tmp_path / "pytest-abs-sum-seed0.npz").is_file()


def test_dump_data(tmp_path, experiment_config):
    experiment_config["problem"] = {
        "name": "robust_regression_l1",
        "params": {"n_agents": 3, "samples_per_agent": 4},
    }
    harness.run_experiment(
        verify(experiment_config), tmp_path, dump_data=True, console=quiet()
    )
    rows = (tmp_path / "pytest-abs-sum-data.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 4


def test_parallel_seeds_match_serial(tmp_path, experiment_config):
    experiment_config["seeds"] = [0, 1, 2]
    config = verify(experiment_config)
    harness.run_experiment(config, tmp_path / "serial", console=quiet())
    harness.run_experiment(config, tmp_path / "parallel", jobs=2, console=quiet())
    for seed in (0, 1, 2):
        name = f"pytest-abs-sum-seed{seed}.csv"
        assert (tmp_path / "serial" / name).read_text() == (
            tmp_path / "parallel" / name
        ).read_text()


def test_single_agent_baseline_matches(tmp_path, experiment_config):
    config = single_agent(experiment_config)
    harness.run_experiment(config, tmp_path, console=quiet())
    harness.run_experiment(config, tmp_path, centralized=True, console=quiet())

    report = harness.compare_runs(
        tmp_path / "pytest-abs-sum-seed0.csv",
        tmp_path / "pytest-abs-sum-baseline-seed0.csv",
        tolerance=0.0,
    )
    assert report.passed
    assert set(report.deviations.values()) == {0.0}


def test_centralized_baseline_in_memory(experiment_config):
    trace = harness.run_centralized_baseline(verify(experiment_config))
    assert len(trace) == 200
    assert set(trace.column("consensus_error")) == {0.0}


def test_compare_modes(experiment_config):
    config = verify(experiment_config)
    trace = harness.run_centralized_baseline(config, seed=0)
    other = harness.run_centralized_baseline(config, seed=1)

    informational = harness.compare_runs(trace, other)
    assert informational.passed is None
    assert "nu" not in informational.deviations
    assert informational.deviations["gamma"] == 0.0

    single = harness.compare_runs(trace, other, metric="objective_at_mean", tolerance=1e9)
    assert list(single.deviations) == ["objective_at_mean"]
    assert single.passed

    assert not harness.compare_runs(trace, other, tolerance=0.0).passed


def test_compare_schema_mismatch(experiment_config):
    trace = harness.run_centralized_baseline(verify(experiment_config))
    experiment_config["problem"]["params"] = {"n_agents": 3, "dimension": 2}
    wider = harness.run_centralized_baseline(verify(experiment_config))
    with pytest.raises(SchemaMismatch):
        harness.compare_runs(trace, wider)

    experiment_config["problem"]["params"] = {"n_agents": 3, "dimension": 1}
    experiment_config["solver"]["n_iters"] = 150
    shorter = harness.run_centralized_baseline(verify(experiment_config))
    with pytest.raises(SchemaMismatch):
        harness.compare_runs(trace, shorter)
    with pytest.raises(SchemaMismatch):
        harness.compare_runs(trace, trace, metric="loss")


def test_output_directory(monkeypatch, tmp_path):
    monkeypatch.delenv("DSUBGRAD_OUTPUT_DIR", raising=False)
    monkeypatch.setattr("dsubgrad.utils.DSUBGRAD_OUTPUT_DIR", None)
    assert output_directory(None, "from-config") == output_directory("from-config")
    assert str(output_directory()) == "dsubgrad-output"

    monkeypatch.setenv("DSUBGRAD_OUTPUT_DIR", str(tmp_path / "env"))
    assert output_directory(None, "from-config") == tmp_path / "env"
    assert output_directory("flag", "from-config").name == "flag"


def test_abs_sum_small_is_reproducible(tmp_path):
    config = harness.load_config("abs_sum_small")
    harness.run_experiment(config, tmp_path / "a", console=quiet())
    harness.run_experiment(config, tmp_path / "b", console=quiet())
    first = (tmp_path / "a" / "abs_sum_small-seed0.csv").read_text()
    assert first == (tmp_path / "b" / "abs_sum_small-seed0.csv").read_text()

    trace = read_csv(tmp_path / "a" / "abs_sum_small-seed0.csv")
    assert len(trace) == 5000
    # x0 = 1 with centers -1, 0, 4: F = 2 + 1 + 3, gamma = 1 / (1 + nu)
    row0, row1 = trace.records[:2]
    assert (row0.nu, row0.gamma, row0.time, row0.objective_at_mean) == (0, 1.0, 0.0, 6.0)
    assert row0.consensus_error == 0.0
    assert (row1.gamma, row1.time) == (0.5, 1.0)
    # slopes +1, +1, -1
    assert row0.stationarity_at_mean == 1.0


def test_plot_failure_is_not_fatal(tmp_path, monkeypatch, experiment_config, caplog):
    def fail(*args, **kwargs):
        return 3

    monkeypatch.setattr(harness, "run_subprocess_cmd", fail)
    experiment_config["diagnostics"]["plot"] = True
    result = harness.run_experiment(verify(experiment_config), tmp_path, console=quiet())
    assert result.status == 0
    assert "exited with status=3" in caplog.text


def test_abs_sum_small_matches_golden_trace(tmp_path, golden_file):
    result = harness.run_experiment(
        harness.load_config("abs_sum_small"), tmp_path, console=quiet()
    )
    assert result.summaries[0]["consensus_error"] < 1e-3

    produced = tmp_path / "abs_sum_small-seed0.csv"
    golden = golden_file(
        "abs_sum_small-seed0.csv", lambda path: shutil.copyfile(produced, path)
    )
    report = harness.compare_runs(golden, produced, tolerance=1e-9)
    assert report.passed, report.deviations


def test_run_subprocess_cmd_prefixes_output(capfd):
    status = run_subprocess_cmd([sys.executable, "-c", "print('hello')"], prefix="plot")
    assert status == 0
    assert "[plot]: hello" in capfd.readouterr().out


def test_run_subprocess_cmd_timeout():
    status = run_subprocess_cmd(
        [sys.executable, "-c", "import time; time.sleep(30)"], timeout=0.5
    )
    assert status != 0
