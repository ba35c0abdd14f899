import networkx as nx
import numpy as np
import pytest

from dsubgrad.errors import (
    AssumptionViolated,
    DisconnectedAfterRetries,
    InvalidEdge,
    NotConnected,
)
from dsubgrad.network import (
    MixingMatrix,
    build_graph,
    mean_rows,
    metropolis_weights,
    random_graph,
    read_graph,
    spectral_beta,
    write_graph,
)

from .conftest import path_graph


def complete_graph(n):
    return build_graph(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def test_single_node_graph():
    graph = build_graph(1, [])
    assert graph.n_agents == 1
    assert graph.edges == frozenset()
    assert graph.is_connected()


def test_path_graph():
    graph = build_graph(3, [(1, 2), (3, 2)])
    assert graph.edges == {(1, 2), (2, 3)}
    assert graph.neighbors(2) == [1, 3]
    np.testing.assert_array_equal(graph.degrees(), [1, 2, 1])


@pytest.mark.parametrize(
    "n_agents, edges",
    [
        (3, [(1, 4)]),
        (3, [(0, 1)]),
        (3, [(2, 2)]),
        (3, [(1, 2), (2, 1)]),
        (0, []),
    ],
)
def test_build_graph_rejects(n_agents, edges):
    with pytest.raises(InvalidEdge):
        build_graph(n_agents, edges)


def test_random_graph_forced_complete():
    graph = random_graph(2, 1.0, seed=3)
    assert graph.edges == {(1, 2)}


def test_random_graph_empty_never_connects():
    with pytest.raises(DisconnectedAfterRetries):
        random_graph(4, 0.0, seed=0)


def test_random_graph_is_reproducible():
    assert random_graph(20, 0.3, seed=11) == random_graph(20, 0.3, seed=11)


def test_random_graph_edge_density():
    counts = [len(random_graph(50, 0.5, seed).edges) for seed in range(40)]
    # n (n - 1) / 2 p = 612.5
    assert abs(np.mean(counts) - 612.5) < 0.03 * 612.5


def test_metropolis_two_agents():
    mixing = metropolis_weights(build_graph(2, [(1, 2)]))
    np.testing.assert_allclose(mixing.weights, [[0.5, 0.5], [0.5, 0.5]])
    assert mixing.beta == pytest.approx(0.0, abs=1e-12)


def test_metropolis_path():
    mixing = metropolis_weights(path_graph(3))
    expected = np.array([[2, 1, 0], [1, 1, 1], [0, 1, 2]]) / 3.0
    np.testing.assert_allclose(mixing.weights, expected, atol=1e-15)
    # eigenvalues 1, 2/3, 0
    assert mixing.beta == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_half_weights_on_path():
    weights = [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]]
    mixing = MixingMatrix.from_weights(weights, path_graph(3))
    np.testing.assert_allclose(mixing.eigenvalues, [1.0, 0.5, -0.5], atol=1e-12)
    assert spectral_beta(weights) == pytest.approx(0.5, abs=1e-12)


def test_metropolis_complete_graph():
    mixing = metropolis_weights(complete_graph(4))
    np.testing.assert_allclose(mixing.weights, np.full((4, 4), 0.25), atol=1e-15)
    assert mixing.beta == pytest.approx(0.0, abs=1e-12)


def test_lazy_metropolis_spectrum():
    mixing = metropolis_weights(path_graph(5), lazy=True)
    assert np.all(mixing.eigenvalues > -1e-12)
    assert mixing.beta < 1.0
    np.testing.assert_allclose(
        mixing.weights, (np.eye(5) + metropolis_weights(path_graph(5)).weights) / 2
    )


def test_metropolis_requires_connected_graph():
    with pytest.raises(NotConnected):
        metropolis_weights(build_graph(3, [(1, 2)]))


def test_spectral_beta_identity():
    with pytest.raises(AssumptionViolated) as excinfo:
        spectral_beta(np.eye(2))
    assert excinfo.value.value == pytest.approx(1.0)


def test_spectral_beta_uniform():
    assert spectral_beta(np.full((5, 5), 0.2)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "weights",
    [
        [[0.6, 0.5], [0.4, 0.5]],
        [[1.2, -0.2], [-0.2, 1.2]],
        [[0.7, 0.3], [0.4, 0.6]],
    ],
)
def test_invalid_weights(weights):
    with pytest.raises(AssumptionViolated):
        MixingMatrix.from_weights(weights)


def test_weights_must_respect_graph():
    with pytest.raises(AssumptionViolated):
        MixingMatrix.from_weights(np.full((3, 3), 1.0 / 3.0), path_graph(3))


def test_random_connected_graph_properties():
    rng = np.random.default_rng(0)
    for trial in range(200):
        n = int(rng.integers(2, 31))
        graph = random_graph(n, float(rng.uniform(0.3, 0.9)), seed=trial)
        assert nx.is_connected(graph.to_networkx())
        mixing = metropolis_weights(graph)
        W = mixing.weights

        assert np.max(np.abs(W.sum(axis=0) - 1)) <= 1e-12
        assert np.max(np.abs(W.sum(axis=1) - 1)) <= 1e-12
        np.testing.assert_array_equal(W, W.T)
        assert mixing.beta < 1.0

        x = rng.standard_normal((n, 3))
        mixed = mixing.mix(x)
        np.testing.assert_allclose(mean_rows(mixed), mean_rows(x), atol=1e-12)
        residual = np.linalg.norm(mixed - mean_rows(mixed))
        assert residual <= mixing.beta * np.linalg.norm(x - mean_rows(x)) + 1e-10


def test_graph_file_roundtrip(tmp_path):
    graph = path_graph(4)
    mixing = metropolis_weights(graph)
    path = tmp_path / "graph.txt"
    write_graph(path, graph, mixing)

    assert path.read_text().splitlines()[:4] == ["4 3", "1 2", "2 3", "3 4"]
    loaded, weights = read_graph(path)
    assert loaded == graph
    np.testing.assert_array_equal(weights.weights, mixing.weights)


def test_graph_file_without_weights(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text("3 2\n1 2\n2 3\n")
    graph, weights = read_graph(path)
    assert graph == path_graph(3)
    assert weights is None


@pytest.mark.parametrize(
    "contents, message",
    [
        ("", "is empty"),
        ("3\n", "line 1"),
        ("three 2\n1 2\n2 3\n", "line 1"),
        ("3 2\n1 2\n", "declares 2 edges"),
        ("3 2\n1 2\n2 x\n", "line 3"),
        ("3 2\n1 2\n2 3 4\n", "line 3"),
        ("2 1\n1 2\n0.5 a\n0.5 0.5\n", "non-numeric weight"),
    ],
)
def test_malformed_graph_file(tmp_path, contents, message):
    path = tmp_path / "graph.txt"
    path.write_text(contents)
    with pytest.raises(InvalidEdge, match=message):
        read_graph(path)
