import json

import numpy as np
import pytest

from netcubic.graphs import Graph, build_laplacian, generate_graph
from netcubic.harness import (
    AccessRecorder,
    CommLedger,
    exchange_round,
    gossip_recorded,
    relaxed_constraint_oracle,
)
from netcubic.objectives import LogisticLocal, QuadraticLocal, StackedObjective


def test_ledger_counts_scalars_per_round():
    ledger = CommLedger()
    for _ in range(5):
        ledger.tick(4, 2)
    assert ledger.rounds == 5
    assert ledger.scalars_sent == 5 * 2 * 4 * 2


def test_ledger_json_round_trip():
    ledger = CommLedger()
    ledger.tick(3, 7)
    blob = json.loads(ledger.to_json())
    assert blob["rounds"] == 1
    assert blob["scalars_sent"] == 2 * 3 * 7
    assert set(blob) >= {"rounds", "scalars_sent", "edges", "n"}


def test_ledger_per_round_log():
    ledger = CommLedger(per_round_log=[])
    edges = ((0, 1), (1, 2))
    ledger.tick(2, 3, edge_list=edges)
    # one entry per direction per undirected edge
    assert len(ledger.per_round_log) == 4
    assert all(entry == (1, pair, 3) for entry, pair in zip(
        ledger.per_round_log, ((0, 1), (1, 0), (1, 2), (2, 1))))


def test_exchange_round_complete_graph_views():
    lap = build_laplacian(generate_graph("complete", 3))
    payloads = np.arange(6, dtype=float).reshape(3, 2)
    ledger = CommLedger()
    recorder = AccessRecorder(lap.graph)
    views = exchange_round(lap, payloads, ledger, recorder)
    assert ledger.rounds == 1
    for i in range(3):
        got = dict(views[i].items())
        assert set(got) == {j for j in range(3) if j != i}
        for j, val in got.items():
            assert np.array_equal(val, payloads[j])
        assert np.array_equal(views[i].own, payloads[i])
    assert recorder.violations == []


def test_exchange_round_path_graph_views():
    lap = build_laplacian(generate_graph("path", 3))
    payloads = np.eye(3)
    views = exchange_round(lap, payloads)
    assert set(dict(views[1].items())) == {0, 2}
    assert set(dict(views[0].items())) == {1}
    assert set(dict(views[2].items())) == {1}


def test_out_of_neighborhood_access_is_recorded_not_raised():
    lap = build_laplacian(generate_graph("path", 3))
    recorder = AccessRecorder(lap.graph)
    views = exchange_round(lap, np.eye(3), recorder=recorder)
    views[0][2]  # agent 0 peeks at the far end of the path
    assert len(recorder.violations) == 1
    round_idx, reader, source = recorder.violations[0]
    assert (reader, source) == (0, 2)
    views[0][1]
    assert len(recorder.violations) == 1  # neighbor access stays clean


def test_exchange_round_ledger_formula_on_cycle():
    lap = build_laplacian(generate_graph("cycle", 4))
    ledger = CommLedger()
    payloads = np.random.default_rng(0).standard_normal((4, 2))
    T = 7
    for _ in range(T):
        exchange_round(lap, payloads, ledger)
    assert ledger.rounds == T
    assert ledger.scalars_sent == T * 2 * 4 * 2


def test_gossip_recorded_matches_matrix_action():
    lap = build_laplacian(generate_graph("erdos_renyi", 6, p=0.6, seed=2))
    payloads = np.random.default_rng(1).standard_normal((6, 3))
    ledger = CommLedger()
    recorder = AccessRecorder(lap.graph)
    out = gossip_recorded(lap, payloads, ledger, recorder)
    assert np.allclose(out, lap.W @ payloads, atol=1e-12)
    assert ledger.rounds == 1
    assert recorder.violations == []


def test_ledger_determinism():
    def run():
        lap = build_laplacian(generate_graph("cycle", 5))
        ledger = CommLedger()
        payloads = np.random.default_rng(3).standard_normal((5, 2))
        for _ in range(4):
            payloads = gossip_recorded(lap, payloads, ledger)
        return ledger.to_json()

    assert run() == run()


def _two_agent_quadratics(shift=2.0, scale=1.0):
    A0 = scale * np.array([[2.0, 0.0], [0.0, 1.0]])
    A1 = scale * np.array([[1.0, 0.0], [0.0, 3.0]])
    b0 = scale * np.array([1.0, -0.5])
    b1 = scale * np.array([-shift, 1.5])
    obj = StackedObjective([QuadraticLocal(A0, b0), QuadraticLocal(A1, b1)])
    lap = build_laplacian(Graph(2, ((0, 1),)))
    return obj, lap


def test_relaxation_bracket_inequalities():
    obj, lap = _two_agent_quadratics()
    eps = 0.1
    br = relaxed_constraint_oracle(obj, lap, eps)
    gap = br.f_exact - br.f_relaxed
    assert gap > 0.0  # distinct local minimizers make relaxation strictly help
    assert br.y_relaxed * eps <= gap + 1e-6
    assert gap <= br.y_exact * eps + 1e-6
    assert br.eps == eps


def test_relaxation_bracket_zero_eps_collapses():
    obj, lap = _two_agent_quadratics()
    br = relaxed_constraint_oracle(obj, lap, 0.0)
    assert abs(br.f_exact - br.f_relaxed) <= 1e-12 * max(1.0, abs(br.f_exact))


def test_relaxation_bracket_homogeneity():
    obj1, lap = _two_agent_quadratics(scale=1.0)
    obj3, _ = _two_agent_quadratics(scale=3.0)
    eps = 0.05
    br1 = relaxed_constraint_oracle(obj1, lap, eps)
    br3 = relaxed_constraint_oracle(obj3, lap, eps)
    gap1 = br1.f_exact - br1.f_relaxed
    gap3 = br3.f_exact - br3.f_relaxed
    assert abs(gap3 - 3.0 * gap1) <= 1e-6 * max(1.0, abs(gap3))
    assert abs(br3.y_exact - 3.0 * br1.y_exact) <= 1e-6 * max(1.0, br3.y_exact)


def test_relaxation_oracle_rejects_non_quadratic():
    rows = np.random.default_rng(4).standard_normal((4, 2))
    labels = np.array([1.0, -1.0, 1.0, -1.0])
    obj = StackedObjective(
        [LogisticLocal(rows[:2], labels[:2], 4), LogisticLocal(rows[2:], labels[2:], 4)]
    )
    lap = build_laplacian(Graph(2, ((0, 1),)))
    with pytest.raises(TypeError):
        relaxed_constraint_oracle(obj, lap, 0.1)
