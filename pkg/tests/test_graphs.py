import numpy as np
import pytest

from netcubic.graphs import (
    Graph,
    apply_laplacian_block,
    build_laplacian,
    consensus_gap,
    generate_graph,
    graph_from_edgelist,
    graph_to_edgelist,
)


def test_complete_graph_spectrum():
    for m in (2, 3, 5, 8):
        lap = build_laplacian(generate_graph("complete", m))
        want = np.array([0.0] + [float(m)] * (m - 1))
        assert np.abs(lap.eig.values - want).max() <= 1e-9
        assert abs(lap.chi - 1.0) <= 1e-12
        assert len(lap.graph.edges) == m * (m - 1) // 2


def test_cycle_graph_spectrum():
    lap = build_laplacian(generate_graph("cycle", 6))
    want = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(6) / 6.0))
    assert np.abs(lap.eig.values - want).max() <= 1e-9
    assert abs(lap.lambda_max - 4.0) <= 1e-9
    assert abs(lap.lambda_min_pos - 1.0) <= 1e-9
    assert abs(lap.chi - 4.0) <= 1e-9


def test_star_and_path_spectra():
    star = build_laplacian(generate_graph("star", 5))
    assert np.abs(star.eig.values - [0.0, 1.0, 1.0, 1.0, 5.0]).max() <= 1e-9
    path = build_laplacian(generate_graph("path", 3))
    assert np.abs(path.eig.values - [0.0, 1.0, 3.0]).max() <= 1e-9


def test_laplacian_matrix_is_degree_minus_adjacency():
    g = generate_graph("path", 4)
    lap = build_laplacian(g)
    W = np.zeros((4, 4))
    for i, j in g.edges:
        W[i, i] += 1.0
        W[j, j] += 1.0
        W[i, j] -= 1.0
        W[j, i] -= 1.0
    assert np.array_equal(lap.W, W)
    assert lap.m == 4


def test_erdos_renyi_connected_and_deterministic():
    for seed in range(6):
        g = generate_graph("erdos_renyi", 10, p=0.4, seed=seed)
        again = generate_graph("erdos_renyi", 10, p=0.4, seed=seed)
        assert g.edges == again.edges
        build_laplacian(g)  # raises if not exactly one zero eigenvalue


def test_erdos_renyi_impossible_density_fails():
    with pytest.raises(ValueError):
        generate_graph("erdos_renyi", 10, p=1e-9, seed=0)


def test_generate_graph_argument_errors():
    with pytest.raises(ValueError):
        generate_graph("moebius", 4)
    with pytest.raises(ValueError):
        generate_graph("cycle", 2)
    with pytest.raises(ValueError):
        generate_graph("complete", 1)


def test_graph_validation_errors():
    with pytest.raises(ValueError):
        Graph(3, ((0, 1), (0, 1), (1, 2)))  # duplicate
    with pytest.raises(ValueError):
        Graph(3, ((1, 0), (1, 2)))  # not ordered within the pair
    with pytest.raises(ValueError):
        Graph(3, ((0, 1), (1, 5)))  # endpoint out of range
    with pytest.raises(ValueError):
        Graph(4, ((0, 1), (2, 3)))  # disconnected
    with pytest.raises(ValueError):
        Graph(3, ())  # no edges, disconnected


def test_apply_laplacian_block_matches_dense():
    rng = np.random.default_rng(0)
    lap = build_laplacian(generate_graph("erdos_renyi", 7, p=0.5, seed=3))
    X = rng.standard_normal((7, 4))
    assert np.allclose(apply_laplacian_block(lap, X), lap.W @ X, atol=1e-12)
    with pytest.raises(ValueError):
        apply_laplacian_block(lap, X[:5])


def test_consensus_gap_hand_example():
    lap = build_laplacian(Graph(2, ((0, 1),)))
    X = np.array([[1.0], [-1.0]])
    assert abs(consensus_gap(lap, X) - 2.0) <= 1e-12


def test_consensus_gap_zero_on_consensus():
    lap = build_laplacian(generate_graph("complete", 4))
    X = np.tile(np.array([2.0, -3.0, 0.5]), (4, 1))
    assert consensus_gap(lap, X) == 0.0


def test_consensus_gap_scaling():
    lap = build_laplacian(generate_graph("cycle", 5))
    X = np.random.default_rng(1).standard_normal((5, 2))
    g1 = consensus_gap(lap, X)
    assert abs(consensus_gap(lap, 3.0 * X) - 3.0 * g1) <= 1e-9 * g1


def test_edgelist_round_trip():
    g = generate_graph("erdos_renyi", 8, p=0.5, seed=5)
    text = graph_to_edgelist(g)
    back = graph_from_edgelist(text)
    assert back.m == g.m and back.edges == g.edges


def test_edgelist_parse_errors_name_the_line():
    with pytest.raises(ValueError):
        graph_from_edgelist("not an edgelist\n")
    g = generate_graph("path", 3)
    text = graph_to_edgelist(g)
    broken = text.replace("\n", "\nbogus tokens here\n", 1)
    with pytest.raises(ValueError):
        graph_from_edgelist(broken)
