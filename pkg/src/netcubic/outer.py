"""Accelerated outer loop with estimate sequences.

Each outer iteration builds the cubic-regularized second-order model at a
convex combination of the running iterate and the estimate-sequence
minimizer, dispatches both the model step and the estimate-sequence update
to the consensus inner solver, and tightens two accuracy schedules chosen
so the whole scheme keeps its 1/k^3 value rate.  The estimate function
stays in closed form the entire time: a scaled copy of the initial cubic
envelope plus a running affine part.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cubic import CubicModel, model_value
from .graphs import LaplacianSpec, consensus_gap
from .harness import CommLedger, AccessRecorder
from .inner import InnerSettings, run_inner
from .objectives import StackedObjective

__all__ = [
    "EstimateState",
    "OuterConfig",
    "OuterTrace",
    "solve_alpha",
    "lambda_rate_bound",
    "outer_iteration_bound",
    "uniform_convexity_constants",
    "delta_schedules",
    "build_phi_model",
    "phi_value",
    "run_outer",
    "estimate_gap_certificate",
]

_ALPHA_TOL = 1e-15


def solve_alpha(lam: float) -> float:
    """Acceleration weight: the root of 12 a^3 = (1 - a) lam in (0, 1).

    Safeguarded Newton; the residual of the returned root is at machine
    level (well under 1e-14).
    """
    if lam <= 0.0:
        raise ValueError("estimate weight must be positive")
    lo, hi = 0.0, 1.0
    a = min(0.999, (lam / 12.0) ** (1.0 / 3.0))
    for _ in range(200):
        g = 12.0 * a**3 + lam * a - lam
        if abs(g) <= _ALPHA_TOL * max(1.0, lam):
            break
        if g > 0.0:
            hi = a
        else:
            lo = a
        step = a - g / (36.0 * a * a + lam)
        a = step if lo < step < hi else 0.5 * (lo + hi)
    return a


def lambda_rate_bound(k: int) -> float:
    """Closed-form ceiling on the estimate weight after k iterations."""
    return (3.0 / (3.0 + k * (1.0 / 12.0) ** (1.0 / 3.0))) ** 3


def outer_iteration_bound(
    epsilon: float, value_gap: float, hess_lip: float, dist_opt: float
) -> int:
    """Iterations sufficient for an epsilon-accurate value.

    ceil(12 epsilon^{-1/3} (value_gap + hess_lip dist_opt^3 / 6)^{1/3}),
    with value_gap an upper bound on the initial optimality gap and
    dist_opt on the distance from the start to a minimizer.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if value_gap < 0.0 or dist_opt < 0.0 or hess_lip < 0.0:
        raise ValueError("bracket terms must be nonnegative")
    bracket = value_gap + hess_lip / 6.0 * dist_opt**3
    return int(math.ceil(12.0 * epsilon ** (-1.0 / 3.0) * bracket ** (1.0 / 3.0)))


def uniform_convexity_constants(hess_lip: float, domain_diam: float) -> tuple:
    """Domain-level gradient Lipschitz constant and convexity modulus.

    The cubic envelope (hess_lip/6)||.||^3 is uniformly convex of degree 3
    with modulus hess_lip/6; its gradient is Lipschitz with constant
    hess_lip times the domain diameter.
    """
    if hess_lip < 0.0 or domain_diam < 0.0:
        raise ValueError("constants must be nonnegative")
    return hess_lip * domain_diam, hess_lip / 6.0


def delta_schedules(
    alpha: float,
    lam: float,
    epsilon: float,
    split: float,
    domain_grad_lip: float,
    convexity_mod: float,
    domain_diam: float,
    variant: str = "theorem1",
) -> tuple:
    """Per-iteration accuracies (model solve, estimate solve).

    Both schedules are cubes of epsilon-proportional terms damped by the
    domain constants, capped at 1.  ``variant`` selects the published
    constant in the estimate schedule (6 lam^2) or the tighter one from
    the underlying induction (3 lam^2).  A zero convexity modulus (exactly
    quadratic objectives) short-circuits to min(1, epsilon^3).
    """
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie strictly between 0 and 1")
    if variant not in ("theorem1", "lemma2"):
        raise ValueError(f"unknown schedule variant {variant!r}")
    if convexity_mod == 0.0:
        acc = min(1.0, epsilon**3)
        return acc, acc
    lam_coeff = 6.0 if variant == "theorem1" else 3.0
    damp = domain_diam * domain_grad_lip
    num_phi = (alpha * split / (1.0 - alpha)) * epsilon
    den_phi = 1.0 + damp * (lam_coeff * lam * lam / convexity_mod) ** (1.0 / 3.0)
    acc_phi = min(1.0, (num_phi / den_phi) ** 3)
    num_f = ((1.0 - split) * alpha + 0.5) * epsilon
    den_f = 1.0 + damp * (3.0 / convexity_mod) ** (1.0 / 3.0)
    acc_f = min(1.0, (num_f / den_f) ** 3)
    return acc_f, acc_phi


@dataclass
class EstimateState:
    """Closed form of the estimate function.

    phi(x) = lam (base_value + hess_lip/6 ||x - center||^3)
             + <affine_g, x> + affine_c
    """

    lam: float
    center: np.ndarray
    base_value: float
    affine_g: np.ndarray
    affine_c: float

    def update(self, alpha: float, x_new: np.ndarray, f_new: float, g_new: np.ndarray):
        """Blend in the linearization at a new iterate with weight alpha."""
        self.lam *= 1.0 - alpha
        self.affine_g = (1.0 - alpha) * self.affine_g + alpha * g_new
        self.affine_c = (1.0 - alpha) * self.affine_c + alpha * (
            f_new - float(np.sum(g_new * x_new))
        )


def build_phi_model(es: EstimateState, hess_lip: float) -> CubicModel:
    """Estimate function as a curvature-free cubic model around the start."""
    return CubicModel(
        center=es.center,
        grads=es.affine_g,
        hess_blocks=None,
        cubic_weight=es.lam * hess_lip,
    )


def phi_value(es: EstimateState, hess_lip: float, X: np.ndarray) -> float:
    """Evaluate the estimate function at a stacked point."""
    diff = np.asarray(X, dtype=float) - es.center
    cubic = float(np.sum(diff * diff)) ** 1.5
    return (
        es.lam * (es.base_value + hess_lip / 6.0 * cubic)
        + float(np.sum(es.affine_g * X))
        + es.affine_c
    )


def _phi_offset(es: EstimateState) -> float:
    # Constant between the displacement model and phi itself.
    return es.lam * es.base_value + float(np.sum(es.affine_g * es.center)) + es.affine_c


@dataclass
class OuterConfig:
    """Configuration of one outer run.

    ``cubic_weight`` defaults to five times the Hessian Lipschitz constant.
    ``hess_lip_override`` substitutes the model curvature constant; it is
    mandatory for exactly-quadratic objectives, where the natural constant
    of zero would make the estimate models unbounded below.

    ``acc_floor`` is the hard numeric floor on the accuracy schedules;
    ``acc_relax``, when set, raises that floor for practical runs (each
    flooring is counted in the trace), and ``acc_relax_phi`` does the same
    for the estimate-model solve alone, which tolerates a much looser
    target since its output only steers the next blend point.
    ``acc_progress`` scales the value-solve floor with the last observed
    value decrease, so early iterations run cheap and the target tightens
    exactly as fast as the trajectory does.
    ``adaptive_radius`` re-estimates the subproblem radius from the
    previous step instead of the one-shot heuristic.  ``warm_dual`` seeds
    every inner solve with the previous dual state of the same model
    family.  ``stall_window`` > 0 stops early after that many outer
    iterations without measurable value progress; ``f_target`` stops as
    soon as the stacked value crosses it.
    """

    epsilon: float = 1e-4
    split: float = 0.5
    cubic_weight: float | None = None
    hess_lip_override: float | None = None
    domain_radius: float | None = None
    k_override: int | None = None
    value_gap: float | None = None
    dist_opt: float | None = None
    schedule_variant: str = "theorem1"
    acc_floor: float = 1e-16
    acc_relax: float | None = None
    acc_relax_phi: float | None = None
    acc_progress: float | None = None
    adaptive_radius: bool = False
    warm_dual: bool = False
    stall_window: int = 0
    stall_rtol: float = 1e-11
    f_target: float | None = None
    inner: InnerSettings = field(default_factory=InnerSettings)


@dataclass
class OuterTrace:
    """Per-iteration record of an outer run; row 0 is the initial point."""

    k: list = field(default_factory=list)
    F: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    delta_F: list = field(default_factory=list)
    delta_phi: list = field(default_factory=list)
    inner_rounds_F: list = field(default_factory=list)
    inner_rounds_phi: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    lams: list = field(default_factory=list)
    oracle_calls: list = field(default_factory=list)
    outer_bound: int = 0
    floor_events: int = 0
    stop_reason: str = "budget"
    reached_at: int | None = None
    final_estimate: object = field(default=None, repr=False)

    def add_row(self, k, F, gap, dF, dP, rF, rP, wall, calls):
        self.k.append(k)
        self.F.append(F)
        self.gap.append(gap)
        self.delta_F.append(dF)
        self.delta_phi.append(dP)
        self.inner_rounds_F.append(rF)
        self.inner_rounds_phi.append(rP)
        self.wall_ms.append(wall)
        self.oracle_calls.append(calls)

    def to_csv(self, timing: bool = True) -> str:
        lines = ["# netcubic outer trace v1"]
        lines.append("k,F,gap,delta_F,delta_phi,inner_rounds_F,inner_rounds_phi,wall_ms")
        for i in range(len(self.k)):
            wall = self.wall_ms[i] if timing else 0.0
            lines.append(
                f"{self.k[i]},{self.F[i]:.17g},{self.gap[i]:.17g},"
                f"{self.delta_F[i]:.17g},{self.delta_phi[i]:.17g},"
                f"{self.inner_rounds_F[i]},{self.inner_rounds_phi[i]},{wall:.17g}"
            )
        return "\n".join(lines) + "\n"


def _clamp_acc(acc: float, cfg: OuterConfig, relax: float | None) -> tuple:
    floor = cfg.acc_floor if relax is None else max(cfg.acc_floor, relax)
    if acc < floor:
        return floor, True
    return acc, False


def run_outer(
    objective: StackedObjective,
    lap: LaplacianSpec | None,
    cfg: OuterConfig | None = None,
    ledger: CommLedger | None = None,
    recorder: AccessRecorder | None = None,
) -> tuple:
    """Run the accelerated cubic scheme from the stacked origin.

    Returns the final stacked iterate and an :class:`OuterTrace`.  With a
    single agent (``lap`` None) every subproblem collapses to one exact
    local cubic step, which recovers the centralized scheme.
    """
    cfg = cfg or OuterConfig()
    m, n = objective.m, objective.n
    if lap is None and m != 1:
        raise ValueError("a gossip matrix is required for more than one agent")
    if lap is not None and lap.m != m:
        raise ValueError("objective and gossip matrix disagree on the agent count")

    hess_lip = cfg.hess_lip_override if cfg.hess_lip_override is not None else objective.hess_lip
    if hess_lip <= 0.0:
        raise ValueError(
            "model curvature constant is zero; set hess_lip_override so the "
            "estimate models stay bounded below"
        )
    cubic_weight = cfg.cubic_weight if cfg.cubic_weight is not None else 5.0 * hess_lip
    domain_radius = cfg.domain_radius if cfg.domain_radius is not None else 1e3
    domain_diam = 2.0 * domain_radius
    dom_lip, conv_mod = uniform_convexity_constants(hess_lip, domain_diam)
    if cfg.k_override is not None:
        K = cfg.k_override
    else:
        K = outer_iteration_bound(
            cfg.epsilon,
            cfg.value_gap if cfg.value_gap is not None else 1.0,
            hess_lip,
            cfg.dist_opt if cfg.dist_opt is not None else 1.0,
        )

    calls0 = objective.oracle_calls
    x0 = np.zeros((m, n))
    x = x0.copy()
    v = x0.copy()
    f0 = objective.stacked_value(x0)
    es = EstimateState(
        lam=1.0, center=x0, base_value=f0, affine_g=np.zeros((m, n)), affine_c=0.0
    )
    trace = OuterTrace(outer_bound=K)
    trace.add_row(0, f0, 0.0, 0.0, 0.0, 0, 0, 0.0, 0)
    trace.lams.append(es.lam)

    best_f = f0
    since_best = 0
    f_prev = f0
    prog_prev: float | None = None
    step_norm_f: float | None = None
    step_norm_phi: float | None = None
    warm_f: np.ndarray | None = None
    warm_phi: np.ndarray | None = None

    for k in range(K):
        t0 = time.perf_counter()
        alpha = solve_alpha(es.lam)
        acc_f, acc_phi = delta_schedules(
            alpha,
            es.lam,
            cfg.epsilon,
            cfg.split,
            dom_lip,
            conv_mod,
            domain_diam,
            cfg.schedule_variant,
        )
        relax_phi = cfg.acc_relax_phi if cfg.acc_relax_phi is not None else cfg.acc_relax
        acc_f, fl1 = _clamp_acc(acc_f, cfg, cfg.acc_relax)
        acc_phi, fl2 = _clamp_acc(acc_phi, cfg, relax_phi)
        trace.floor_events += int(fl1) + int(fl2)
        if cfg.acc_progress is not None and prog_prev is not None:
            # Value-solve only: the estimate-model value scale does not
            # shrink with the trajectory, so tying its target to progress
            # starves the smoothing ridge and blows up the round count.
            acc_f = max(acc_f, cfg.acc_progress * prog_prev)

        z = alpha * v + (1.0 - alpha) * x
        model_f = CubicModel(
            center=z,
            grads=objective.stacked_gradient(z),
            hess_blocks=objective.hessian_blocks(z),
            cubic_weight=cubic_weight,
        )
        settings_f = cfg.inner
        if cfg.adaptive_radius and step_norm_f is not None and settings_f.radius is None:
            settings_f = replace(settings_f, radius=max(2.0 * step_norm_f, 1e-6))
        x_new, rep_f = run_inner(
            model_f, lap, acc_f, settings_f, ledger, recorder, w_init=warm_f
        )
        if cfg.warm_dual:
            warm_f = rep_f.w_final
        step_norm_f = float(np.linalg.norm(x_new - z))

        f_new = objective.stacked_value(x_new)
        g_new = objective.stacked_gradient(x_new)
        prog_prev = abs(f_prev - f_new)
        f_prev = f_new
        es.update(alpha, x_new, f_new, g_new)
        model_phi = build_phi_model(es, hess_lip)
        settings_phi = cfg.inner
        if cfg.adaptive_radius and step_norm_phi is not None and settings_phi.radius is None:
            # Tighter inflation than the value solve: this radius only sets
            # the smoothing ridge, and the blend-point norm grows slowly.
            settings_phi = replace(settings_phi, radius=max(1.3 * step_norm_phi, 1e-6))
        v_new, rep_phi = run_inner(
            model_phi, lap, acc_phi, settings_phi, ledger, recorder, w_init=warm_phi
        )
        if cfg.warm_dual:
            warm_phi = rep_phi.w_final
        step_norm_phi = float(np.linalg.norm(v_new - x0))

        x, v = x_new, v_new
        wall = (time.perf_counter() - t0) * 1e3
        gap = consensus_gap(lap, x) if lap is not None else 0.0
        trace.add_row(
            k + 1, f_new, gap, acc_f, acc_phi, rep_f.rounds, rep_phi.rounds,
            wall, objective.oracle_calls - calls0,
        )
        trace.alphas.append(alpha)
        trace.lams.append(es.lam)

        if cfg.f_target is not None and f_new <= cfg.f_target:
            trace.stop_reason = "target"
            trace.reached_at = k + 1
            break
        if f_new < best_f - cfg.stall_rtol * max(1.0, abs(best_f)):
            best_f = f_new
            since_best = 0
        else:
            since_best += 1
            if cfg.stall_window > 0 and since_best >= cfg.stall_window:
                trace.stop_reason = "stalled"
                break

    trace.final_estimate = es
    return x, trace


def estimate_gap_certificate(
    objective: StackedObjective,
    lap: LaplacianSpec | None,
    es: EstimateState,
    X: np.ndarray,
    hess_lip: float,
    probe_acc: float,
    settings: InnerSettings | None = None,
) -> float:
    """Computable bound witness for the value gap at a stacked point.

    Probes the estimate function's constrained minimum with one inner solve
    at ``probe_acc`` and returns F(X) minus the probed value.  While the
    scheme's invariant holds this stays below epsilon plus the probe
    accuracy.
    """
    model = build_phi_model(es, hess_lip)
    v_hat, _ = run_inner(model, lap, probe_acc, settings)
    phi_min_est = model_value(model, v_hat - es.center) + _phi_offset(es)
    return objective.stacked_value(X) - phi_min_est
