"""Second-order model with cubic regularization and its separable dual.

The stacked model around a center z is

    sum_i [ <g_i, h_i> + 0.5 <H_i h_i, h_i> ] + (N/6) ||h||^3,

with h the stacked displacement and N the cubic weight.  The coupling cubic
term admits an exact variational form as a maximum over per-agent
nonnegative scales, which is what lets each agent solve its own small
shifted linear system (a secular equation in one scalar) during the dual
ascent.  Dropping the equal-scales constraint never changes the value on
the consensus subspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import SymEigen, sym_eigendecompose

__all__ = [
    "CubicModel",
    "cubic_dual_value",
    "cubic_dual_max",
    "solve_secular",
    "local_best_response",
    "model_value",
]

_SECULAR_MAX_ITER = 100
_SECULAR_TOL = 1e-12


@dataclass
class CubicModel:
    """Quadratic-plus-cubic model data for all agents.

    ``hess_blocks`` may be None for a model with zero curvature (the
    estimate-sequence models are linear plus cubic).  ``cubic_weight`` of
    zero degenerates to a plain quadratic model; the dual scale path is
    then bypassed.
    """

    center: np.ndarray
    grads: np.ndarray
    hess_blocks: np.ndarray | None
    cubic_weight: float
    _spectra: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.grads = np.asarray(self.grads, dtype=float)
        if self.center.ndim != 2 or self.center.shape != self.grads.shape:
            raise ValueError("center and grads must share an (m, n) shape")
        m, n = self.center.shape
        if self.hess_blocks is not None:
            self.hess_blocks = np.asarray(self.hess_blocks, dtype=float)
            if self.hess_blocks.shape != (m, n, n):
                raise ValueError(f"hess_blocks must have shape ({m}, {n}, {n})")
        if self.cubic_weight < 0.0:
            raise ValueError("cubic weight must be nonnegative")

    @property
    def m(self) -> int:
        return self.center.shape[0]

    @property
    def n(self) -> int:
        return self.center.shape[1]

    def spectra(self) -> list:
        """Per-agent eigendecompositions, computed once and cached."""
        if self._spectra is None:
            n = self.n
            if self.hess_blocks is None:
                flat = SymEigen(values=np.zeros(n), vectors=np.eye(n))
                self._spectra = [flat] * self.m
            else:
                self._spectra = [sym_eigendecompose(H) for H in self.hess_blocks]
        return self._spectra


def cubic_dual_value(X: np.ndarray, tau: np.ndarray) -> float:
    """Evaluate the separable surrogate of ||X||^3 / 3 at given scales.

    For stacked X over m agents and nonnegative scales tau this is
    sum_i tau_i ||X_i||^2 - (4 / (3 m)) sum_i tau_i^3; its maximum over
    equal scales recovers ||X||^3 / 3 exactly.
    """
    X = np.asarray(X, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if X.ndim != 2 or tau.shape != (X.shape[0],):
        raise ValueError("X must be (m, n) and tau (m,)")
    if np.any(tau < 0.0):
        raise ValueError("scales must be nonnegative")
    m = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    return float(tau @ sq - (4.0 / (3.0 * m)) * np.sum(tau**3))


def cubic_dual_max(X: np.ndarray) -> tuple:
    """Maximizing scales and value of the separable surrogate.

    Returns ``(value, tau)`` with every entry of tau equal to ||X|| / 2 and
    value equal to ||X||^3 / 3.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a stacked (m, n) array")
    norm = float(np.linalg.norm(X))
    tau = np.full(X.shape[0], 0.5 * norm)
    return norm**3 / 3.0, tau


def _secular_batch(
    gamma: np.ndarray,
    eigvals: np.ndarray,
    cubic_weight: float,
    ridge: float,
    n_agents: int,
    tau_init: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized safeguarded Newton on the reciprocal secular equation.

    Each row solves (n_agents/4) sum_j gamma_j^2 / (s_j + N tau + ridge)^2
    = tau^2 for its unique nonnegative root.  Newton runs on the monotone
    form 2 / (sqrt(m) r(tau)) - 1/tau with bisection as fallback whenever a
    step leaves the current bracket.
    """
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    eigvals = np.atleast_2d(np.asarray(eigvals, dtype=float))
    if gamma.shape != eigvals.shape:
        raise ValueError("gamma and eigenvalue arrays must align")
    B = gamma.shape[0]
    root_m = np.sqrt(float(n_agents))
    g2 = gamma * gamma
    gnorm = np.sqrt(g2.sum(axis=1))
    tau = np.zeros(B)
    active = gnorm > 0.0
    if not np.any(active):
        return tau

    base = eigvals + ridge  # s_j + ridge, constant across the solve
    if cubic_weight == 0.0:
        # Left side no longer depends on tau: closed form.
        if np.any(base[active].min(axis=1) <= 0.0):
            raise np.linalg.LinAlgError(
                "quadratic path needs a positive shifted spectrum"
            )
        r0 = np.sqrt((g2[active] / base[active] ** 2).sum(axis=1))
        tau[active] = 0.5 * root_m * r0
        return tau

    # Upper bounds for the root: curvature-only and cubic-only estimates.
    hi = np.full(B, np.inf)
    smin = base.min(axis=1)
    pos = active & (smin > 0.0)
    hi[pos] = 0.5 * root_m * gnorm[pos] / smin[pos]
    hi_cubic = np.sqrt(0.5 * root_m * gnorm / cubic_weight)
    hi = np.minimum(hi, hi_cubic)
    hi = hi * (1.0 + 1e-12) + 1e-300
    lo = np.zeros(B)

    t = np.where(active, np.clip(
        tau_init if tau_init is not None else 0.5 * hi,
        np.finfo(float).tiny, hi), 1.0)

    idx = np.where(active)[0]
    g2a = g2[idx]
    sa = base[idx]
    loa, hia, ta = lo[idx], hi[idx], t[idx]
    live = np.ones(idx.size, dtype=bool)
    # Near-zero right-hand sides can underflow r; the bracket fallback
    # below absorbs the resulting inf/nan steps, so silence those flags.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(_SECULAR_MAX_ITER):
            den = sa + cubic_weight * ta[:, None]
            r2 = (g2a / den**2).sum(axis=1)
            r = np.sqrt(r2)
            fval = 2.0 / (root_m * r) - 1.0 / ta
            shrink = fval > 0.0
            hia = np.where(shrink, ta, hia)
            loa = np.where(shrink, loa, ta)
            s3 = (g2a / den**3).sum(axis=1)
            fprime = 2.0 * cubic_weight * s3 / (root_m * r * r2) + 1.0 / (ta * ta)
            step = fval / fprime
            cand = ta - step
            inside = (cand > loa) & (cand < hia) & np.isfinite(cand)
            new = np.where(inside, cand, 0.5 * (loa + hia))
            moved = np.abs(new - ta)
            ta = new
            live = moved > _SECULAR_TOL * np.maximum(1.0, ta)
            if not np.any(live):
                break
    tau[idx] = ta
    return tau


def solve_secular(
    gamma: np.ndarray,
    eigvals: np.ndarray,
    cubic_weight: float,
    ridge: float,
    n_agents: int,
    tau_init: float | None = None,
) -> float:
    """Nonnegative root of one agent's scale equation.

    ``gamma`` holds the rotated right-hand side (eigenbasis coordinates of
    the dual signal minus gradient), ``eigvals`` the local Hessian spectrum.
    Zero right-hand side gives a zero root.  The residual of the returned
    root satisfies |lhs - tau^2| <= 1e-10 max(1, tau^2).
    """
    init = None if tau_init is None else np.asarray([tau_init], dtype=float)
    out = _secular_batch(gamma, eigvals, cubic_weight, ridge, n_agents, init)
    return float(out[0])


def local_best_response(
    dual_sig: np.ndarray,
    grad: np.ndarray,
    eig: SymEigen,
    cubic_weight: float,
    ridge: float,
    n_agents: int,
    tau_init: float | None = None,
) -> tuple:
    """One agent's minimizer of its smoothed dual-ascent subproblem.

    Solves the scale equation, then the shifted linear system
    (H + (N tau + ridge) I) h = dual_sig - grad in the eigenbasis.
    Returns ``(h, tau)``; the pair satisfies sqrt(m)/2 ||h|| = tau.
    """
    gamma = eig.vectors @ (np.asarray(dual_sig, dtype=float) - grad)
    tau = solve_secular(gamma, eig.values, cubic_weight, ridge, n_agents, tau_init)
    den = eig.values + cubic_weight * tau + ridge
    if den.min() <= 0.0:
        raise np.linalg.LinAlgError("shifted local system is singular")
    h = eig.vectors.T @ (gamma / den)
    return h, tau


def model_value(model: CubicModel, H: np.ndarray) -> float:
    """Model objective at a stacked displacement from the center."""
    H = np.asarray(H, dtype=float)
    if H.shape != model.grads.shape:
        raise ValueError("displacement shape must match the model")
    val = float(np.sum(model.grads * H))
    if model.hess_blocks is not None:
        val += 0.5 * float(np.einsum("ij,ijk,ik->", H, model.hess_blocks, H))
    if model.cubic_weight > 0.0:
        val += model.cubic_weight / 6.0 * float(np.sum(H * H)) ** 1.5
    return val
