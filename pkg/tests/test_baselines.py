import numpy as np
import pytest

from netcubic.baselines import (
    BaselineConfig,
    cen_gm,
    dec_acc_gm,
    dec_cubic,
    dec_newton,
)
from netcubic.graphs import build_laplacian, generate_graph
from netcubic.harness import AccessRecorder, CommLedger
from netcubic.inner import InnerSettings
from netcubic.objectives import QuadraticLocal, StackedObjective, synth_classification

from conftest import newton_fstar


def _quadratic_problem(seed=0, m=3, n=2):
    rng = np.random.default_rng(seed)
    locs = []
    for _ in range(m):
        R = rng.standard_normal((n, n))
        locs.append(QuadraticLocal(R @ R.T + 0.5 * np.eye(n), rng.standard_normal(n)))
    return StackedObjective(locs)


def _exact_fstar(objective):
    A = np.sum([f.A for f in objective.locals], axis=0)
    b = np.sum([f.b for f in objective.locals], axis=0)
    xbar = np.linalg.solve(A, b)
    return objective.aggregate_value(xbar), xbar


def test_cen_gm_quadratic_reaches_minimizer():
    objective = _quadratic_problem(seed=1)
    _, xbar = _exact_fstar(objective)
    x, trace = cen_gm(objective, grad_tol=1e-12)
    assert trace.converged
    assert float(np.linalg.norm(x - xbar)) <= 1e-9
    vals = np.array(trace.values)
    assert np.all(np.diff(vals) <= 1e-12)


def test_cen_gm_logistic_matches_newton_oracle():
    objective = synth_classification(m=2, n=3, d_per_agent=15, seed=2, scale=0.8)
    fref, _ = newton_fstar(objective)
    x, trace = cen_gm(objective, grad_tol=1e-12)
    assert trace.converged
    assert objective.aggregate_value(x) - fref <= 1e-10


def test_cen_gm_oversized_step_warns_then_recovers():
    objective = _quadratic_problem(seed=3)
    sum_lip = sum(f.grad_lip for f in objective.locals)
    with pytest.warns(UserWarning, match="stable bound"):
        x, trace = cen_gm(objective, step=10.0 / sum_lip, grad_tol=1e-10)
    assert trace.converged
    assert trace.step_final < 10.0 / sum_lip
    fstar, _ = _exact_fstar(objective)
    assert objective.aggregate_value(x) - fstar <= 1e-9


def test_dec_newton_first_step_is_exact_on_quadratics():
    objective = _quadratic_problem(seed=4)
    lap = build_laplacian(generate_graph("complete", 3))
    fstar, _ = _exact_fstar(objective)
    cfg = BaselineConfig(
        max_outer=3,
        inner_acc=1e-8,
        f_target=fstar + 1e-6,
        inner=InnerSettings(stop_when_stable=True),
    )
    x, trace = dec_newton(objective, lap, cfg)
    assert trace.stop_reason == "target"
    assert trace.reached_at == 1
    assert trace.values[1] - fstar <= 1e-6


def test_dec_cubic_converges_and_coeff_five_is_more_conservative():
    lap = build_laplacian(generate_graph("complete", 3))
    fstar, _ = _exact_fstar(_quadratic_problem(seed=5))

    def run(coeff):
        objective = _quadratic_problem(seed=5)
        cfg = BaselineConfig(
            max_outer=25,
            inner_acc=1e-7,
            cubic_coeff=coeff,
            hess_lip_override=1.0,
            f_target=fstar + 1e-5,
            warm_dual=True,
            inner=InnerSettings(stop_when_stable=True, round_cap=4000),
        )
        return dec_cubic(objective, lap, cfg)

    x6, t6 = run("six")
    x5, t5 = run("five")
    assert t6.stop_reason == "target"
    assert t5.stop_reason == "target"
    assert t6.values[-1] - fstar <= 1e-5
    assert t5.values[-1] - fstar <= 1e-5
    # The literal /5 reading inflates the weight, so its first step is
    # no more aggressive than the consistent /6 one.
    assert t5.values[1] >= t6.values[1] - 1e-9


def test_dec_cubic_validation():
    objective = _quadratic_problem(seed=6)
    lap = build_laplacian(generate_graph("complete", 3))
    with pytest.raises(ValueError, match="cubic_coeff"):
        dec_cubic(objective, lap, BaselineConfig(cubic_coeff="four"))
    # Quadratic locals have zero curvature constant: weight collapses.
    with pytest.raises(ValueError, match="positive cubic weight"):
        dec_cubic(objective, lap, BaselineConfig())


def test_dec_acc_gm_reaches_target_without_hessians():
    objective = _quadratic_problem(seed=7)
    lap = build_laplacian(generate_graph("complete", 3))
    fstar, _ = _exact_fstar(objective)
    cfg = BaselineConfig(
        max_outer=40,
        inner_acc=1e-5,
        f_target=fstar + 1e-2,
        warm_dual=True,
        inner=InnerSettings(stop_when_stable=True),
    )
    _, trace = dec_acc_gm(objective, lap, cfg)
    assert trace.stop_reason == "target"
    assert trace.reached_at <= 15
    assert objective.hess_evals == 0
    gaps = [v - fstar for v in trace.values]
    assert all(g > 0.0 for g in gaps[: trace.reached_at])


def test_dec_acc_gm_requires_positive_curvature():
    locs = [QuadraticLocal(np.zeros((2, 2)), np.zeros(2)) for _ in range(3)]
    objective = StackedObjective(locs)
    lap = build_laplacian(generate_graph("complete", 3))
    with pytest.raises(ValueError, match="curvature"):
        dec_acc_gm(objective, lap, BaselineConfig())


def test_dec_acc_gm_divergence_guard():
    # Understating the gradient Lipschitz constant by 40x makes the
    # quadratic-model step overshoot geometrically.
    objective = _quadratic_problem(seed=8)
    lap = build_laplacian(generate_graph("complete", 3))
    cfg = BaselineConfig(
        max_outer=200,
        inner_acc=1e-8,
        grad_lip_override=objective.grad_lip / 40.0,
        inner=InnerSettings(stop_when_stable=True, round_cap=3000),
    )
    _, trace = dec_acc_gm(objective, lap, cfg)
    assert trace.stop_reason == "diverged"
    assert len(trace.values) < 201


def test_oracle_accounting_and_recorder_cleanliness():
    lap = build_laplacian(generate_graph("cycle", 3))
    runs = (
        (dec_newton, BaselineConfig(max_outer=2, inner_acc=1e-4), 2),
        (
            dec_cubic,
            BaselineConfig(max_outer=2, inner_acc=1e-4, hess_lip_override=1.0),
            2,
        ),
        (dec_acc_gm, BaselineConfig(max_outer=2, inner_acc=1e-4), 2),
    )
    for method, cfg, per_iter in runs:
        objective = _quadratic_problem(seed=9)
        ledger = CommLedger()
        recorder = AccessRecorder(lap.graph)
        cfg.inner = InnerSettings(stop_when_stable=True, round_cap=2000)
        _, trace = method(objective, lap, cfg, ledger=ledger, recorder=recorder)
        assert recorder.violations == []
        assert trace.oracle_calls == [0, per_iter, 2 * per_iter]
        assert trace.inner_rounds[0] == 0
        assert ledger.rounds == sum(trace.inner_rounds)
        assert len(trace.values) == len(trace.gaps) == 3
