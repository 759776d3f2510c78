"""Baseline methods the accelerated cubic scheme is benchmarked against.

All decentralized baselines dispatch their subproblem to the same smoothed
dual-ascent inner solver, so differences in the comparison come from the
outer model (quadratic vs cubic, accelerated vs not), not from unrelated
solver machinery.  The centralized gradient method doubles as the
reference-value oracle for benchmark runs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .cubic import CubicModel
from .graphs import LaplacianSpec, consensus_gap
from .harness import CommLedger, AccessRecorder
from .inner import InnerSettings, run_inner
from .objectives import StackedObjective

__all__ = [
    "CenTrace",
    "cen_gm",
    "MethodTrace",
    "BaselineConfig",
    "dec_newton",
    "dec_cubic",
    "dec_acc_gm",
]

_DIVERGE_FACTOR = 1e9


@dataclass
class CenTrace:
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    step_final: float = 0.0


def cen_gm(
    objective: StackedObjective,
    step: float | None = None,
    max_iters: int = 200_000,
    grad_tol: float = 1e-12,
    x0: np.ndarray | None = None,
) -> tuple:
    """Centralized gradient descent on the aggregate objective.

    The default step is the reciprocal of the summed per-agent curvature
    bounds; larger steps draw a warning.  On divergence the step halves and
    the iterate rolls back (decreasing-step fallback).  A plateau with a
    runaway iterate norm triggers a separable-data warning, since the
    logistic loss then has no finite minimizer.
    """
    sum_lip = float(sum(f.grad_lip for f in objective.locals))
    if step is None:
        step = 1.0 / sum_lip if sum_lip > 0.0 else 1.0
    elif sum_lip > 0.0 and step > 1.0 / sum_lip * (1.0 + 1e-12):
        warnings.warn(
            f"step {step:g} exceeds the stable bound {1.0 / sum_lip:g}",
            stacklevel=2,
        )
    x = np.zeros(objective.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    trace = CenTrace()
    f_cur = objective.aggregate_value(x)
    warned_separable = False
    k = 0
    while k < max_iters:
        g = objective.aggregate_gradient(x)
        gn = float(np.linalg.norm(g))
        trace.values.append(f_cur)
        trace.grad_norms.append(gn)
        if gn <= grad_tol:
            trace.converged = True
            break
        x_try = x - step * g
        f_try = objective.aggregate_value(x_try)
        if not math.isfinite(f_try) or f_try > f_cur + 1e-9 * max(1.0, abs(f_cur)):
            step *= 0.5
            if step < 1e-18:
                break
            continue
        x, f_cur = x_try, f_try
        k += 1
        if not warned_separable and k % 1000 == 0 and float(np.linalg.norm(x)) > 1e3:
            warnings.warn(
                "iterate norm exceeds 1e3 while the gradient has not converged; "
                "the data may be linearly separable",
                stacklevel=2,
            )
            warned_separable = True
    trace.iterations = k
    trace.step_final = step
    return x, trace


@dataclass
class MethodTrace:
    """Per-iteration record shared by the decentralized baselines."""

    values: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    oracle_calls: list = field(default_factory=list)
    inner_rounds: list = field(default_factory=list)
    reached_at: int | None = None
    stop_reason: str = "budget"


@dataclass
class BaselineConfig:
    """Common knobs: outer budget, inner accuracy, optional value target.

    ``cubic_coeff`` toggles the cubic denominator of the non-accelerated
    cubic baseline between 6 (the consistent choice) and 5 (as sometimes
    stated); ``f_target`` stops a run at the first crossing.

    ``acc_progress``, ``adaptive_radius`` and ``warm_dual`` mirror the
    practical knobs of the accelerated scheme so a benchmark comparison
    is about the outer model, not about one method getting cheaper inner
    solves than the others.
    """

    max_outer: int = 200
    inner_acc: float = 1e-8
    f_target: float | None = None
    cubic_weight: float | None = None
    cubic_coeff: str = "six"
    grad_lip_override: float | None = None
    hess_lip_override: float | None = None
    acc_progress: float | None = None
    adaptive_radius: bool = False
    warm_dual: bool = False
    inner: InnerSettings = field(
        default_factory=lambda: InnerSettings(stop_when_stable=True)
    )


def _loop_second_order(
    objective: StackedObjective,
    lap: LaplacianSpec,
    cfg: BaselineConfig,
    cubic_weight: float,
    ledger: CommLedger | None,
    recorder: AccessRecorder | None,
) -> tuple:
    calls0 = objective.oracle_calls
    m, n = objective.m, objective.n
    x = np.zeros((m, n))
    trace = MethodTrace()
    f_cur = objective.stacked_value(x)
    trace.values.append(f_cur)
    trace.gaps.append(0.0)
    trace.oracle_calls.append(0)
    trace.inner_rounds.append(0)
    f0 = f_cur
    warm = None
    step_norm: float | None = None
    prog: float | None = None
    for k in range(cfg.max_outer):
        model = CubicModel(
            center=x,
            grads=objective.stacked_gradient(x),
            hess_blocks=objective.hessian_blocks(x),
            cubic_weight=cubic_weight,
        )
        acc = cfg.inner_acc
        if cfg.acc_progress is not None and prog is not None:
            acc = max(acc, cfg.acc_progress * prog)
        settings = cfg.inner
        if cfg.adaptive_radius and step_norm is not None and settings.radius is None:
            settings = replace(settings, radius=max(2.0 * step_norm, 1e-6))
        x_prev = x
        x, rep = run_inner(model, lap, acc, settings, ledger, recorder, w_init=warm)
        if cfg.warm_dual:
            warm = rep.w_final
        step_norm = float(np.linalg.norm(x - x_prev))
        f_prev = f_cur
        f_cur = objective.stacked_value(x)
        prog = abs(f_prev - f_cur)
        trace.values.append(f_cur)
        trace.gaps.append(consensus_gap(lap, x))
        trace.oracle_calls.append(objective.oracle_calls - calls0)
        trace.inner_rounds.append(rep.rounds)
        if not math.isfinite(f_cur) or f_cur > _DIVERGE_FACTOR * max(1.0, abs(f0)):
            trace.stop_reason = "diverged"
            break
        if cfg.f_target is not None and f_cur <= cfg.f_target:
            trace.stop_reason = "target"
            trace.reached_at = k + 1
            break
    return x, trace


def dec_newton(
    objective: StackedObjective,
    lap: LaplacianSpec,
    cfg: BaselineConfig | None = None,
    ledger: CommLedger | None = None,
    recorder: AccessRecorder | None = None,
) -> tuple:
    """Damped-free decentralized Newton: pure quadratic model per step.

    The zero cubic weight turns every local solve into a shifted linear
    system; only the dual smoothing regularizes flat directions, so the
    method can overshoot on poorly curved problems (that is the point of
    comparing against it).
    """
    cfg = cfg or BaselineConfig()
    return _loop_second_order(objective, lap, cfg, 0.0, ledger, recorder)


def dec_cubic(
    objective: StackedObjective,
    lap: LaplacianSpec,
    cfg: BaselineConfig | None = None,
    ledger: CommLedger | None = None,
    recorder: AccessRecorder | None = None,
) -> tuple:
    """Non-accelerated cubic regularization over the network."""
    cfg = cfg or BaselineConfig()
    hess_lip = (
        cfg.hess_lip_override if cfg.hess_lip_override is not None else objective.hess_lip
    )
    weight = cfg.cubic_weight if cfg.cubic_weight is not None else 5.0 * hess_lip
    if cfg.cubic_coeff == "five":
        weight *= 6.0 / 5.0
    elif cfg.cubic_coeff != "six":
        raise ValueError(f"cubic_coeff must be 'six' or 'five', got {cfg.cubic_coeff!r}")
    if weight <= 0.0:
        raise ValueError("cubic baseline needs a positive cubic weight")
    return _loop_second_order(objective, lap, cfg, weight, ledger, recorder)


def dec_acc_gm(
    objective: StackedObjective,
    lap: LaplacianSpec,
    cfg: BaselineConfig | None = None,
    ledger: CommLedger | None = None,
    recorder: AccessRecorder | None = None,
) -> tuple:
    """Accelerated first-order method with quadratic estimate sequences.

    Mirrors the cubic scheme's skeleton: a gradient model at the blended
    point and a quadratic estimate function, both minimized over consensus
    by the inner solver.  No Hessian oracle is ever called.
    """
    cfg = cfg or BaselineConfig()
    grad_lip = (
        cfg.grad_lip_override if cfg.grad_lip_override is not None else objective.grad_lip
    )
    if grad_lip <= 0.0:
        raise ValueError("accelerated gradient needs a positive curvature bound")
    calls0 = objective.oracle_calls
    m, n = objective.m, objective.n
    eye_blocks = np.tile(np.eye(n), (m, 1, 1))
    x0 = np.zeros((m, n))
    x = x0.copy()
    v = x0.copy()
    lam = 1.0
    affine_g = np.zeros((m, n))
    affine_c = 0.0
    trace = MethodTrace()
    f_cur = objective.stacked_value(x)
    trace.values.append(f_cur)
    trace.gaps.append(0.0)
    trace.oracle_calls.append(0)
    trace.inner_rounds.append(0)
    f0 = f_cur
    warm_x = None
    warm_v = None
    step_x: float | None = None
    step_v: float | None = None
    prog: float | None = None
    for k in range(cfg.max_outer):
        # alpha solves a^2 = (1 - a) lam
        alpha = 0.5 * (math.sqrt(lam * lam + 4.0 * lam) - lam)
        z = alpha * v + (1.0 - alpha) * x
        model = CubicModel(
            center=z,
            grads=objective.stacked_gradient(z),
            hess_blocks=grad_lip * eye_blocks,
            cubic_weight=0.0,
        )
        acc = cfg.inner_acc
        if cfg.acc_progress is not None and prog is not None:
            acc = max(acc, cfg.acc_progress * prog)
        settings_x = cfg.inner
        if cfg.adaptive_radius and step_x is not None and settings_x.radius is None:
            settings_x = replace(settings_x, radius=max(2.0 * step_x, 1e-6))
        x, rep_x = run_inner(model, lap, acc, settings_x, ledger, recorder, w_init=warm_x)
        if cfg.warm_dual:
            warm_x = rep_x.w_final
        step_x = float(np.linalg.norm(x - z))
        f_prev = f_cur
        f_cur = objective.stacked_value(x)
        prog = abs(f_prev - f_cur)
        g_new = objective.stacked_gradient(x)
        lam *= 1.0 - alpha
        affine_g = (1.0 - alpha) * affine_g + alpha * g_new
        affine_c = (1.0 - alpha) * affine_c + alpha * (
            f_cur - float(np.sum(g_new * x))
        )
        est_model = CubicModel(
            center=x0,
            grads=affine_g,
            hess_blocks=lam * grad_lip * eye_blocks,
            cubic_weight=0.0,
        )
        settings_v = cfg.inner
        if cfg.adaptive_radius and step_v is not None and settings_v.radius is None:
            settings_v = replace(settings_v, radius=max(1.3 * step_v, 1e-6))
        v, rep_v = run_inner(est_model, lap, cfg.inner_acc, settings_v, ledger, recorder, w_init=warm_v)
        if cfg.warm_dual:
            warm_v = rep_v.w_final
        step_v = float(np.linalg.norm(v - x0))
        trace.values.append(f_cur)
        trace.gaps.append(consensus_gap(lap, x))
        trace.oracle_calls.append(objective.oracle_calls - calls0)
        trace.inner_rounds.append(rep_x.rounds + rep_v.rounds)
        if not math.isfinite(f_cur) or f_cur > _DIVERGE_FACTOR * max(1.0, abs(f0)):
            trace.stop_reason = "diverged"
            break
        if cfg.f_target is not None and f_cur <= cfg.f_target:
            trace.stop_reason = "target"
            trace.reached_at = k + 1
            break
    return x, trace
