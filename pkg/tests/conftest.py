"""Shared numeric oracles for the test suite.

Everything here is deliberately independent of the package's own solvers:
pooled damped Newton for reference optima, eigenbasis bisection for the
consensus-restricted cubic model, and a log-log slope fit.
"""

import math

import numpy as np


def pooled_hessian(objective, x):
    H = np.zeros((objective.n, objective.n))
    for f in objective.locals:
        H += f.hessian(x)
    return H


def newton_fstar(objective, tol=1e-14, max_iters=200):
    """Minimize the aggregate objective by damped Newton with Armijo.

    Returns (value, minimizer).  The aggregate of per-agent locals at a
    common point equals the stacked value on the consensus subspace, so
    this is the reference optimum for every consensus method.
    """
    x = np.zeros(objective.n)
    fx = objective.aggregate_value(x)
    for _ in range(max_iters):
        g = objective.aggregate_gradient(x)
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        H = pooled_hessian(objective, x)
        step = np.linalg.solve(H + 1e-14 * np.eye(objective.n), g)
        t = 1.0
        decr = float(g @ step)
        for _ in range(60):
            cand = x - t * step
            fc = objective.aggregate_value(cand)
            if fc <= fx - 1e-4 * t * decr:
                x, fx = cand, fc
                break
            t *= 0.5
        else:
            break
    return fx, x


def consensus_cubic_min(grads, hess_blocks, weight):
    """Exact minimum of the stacked cubic model on the consensus subspace.

    With every agent at the same displacement h the model is
    G.h + 0.5 h.Hsum.h + (weight/6) m^{3/2} ||h||^3; stationarity gives
    (Hsum + (weight/2) m^{3/2} r I) h = -G with r = ||h||, a scalar
    bisection in the eigenbasis of Hsum.
    """
    grads = np.asarray(grads, dtype=float)
    m, n = grads.shape
    G = grads.sum(axis=0)
    Hsum = np.zeros((n, n))
    if hess_blocks is not None:
        Hsum = np.asarray(hess_blocks, dtype=float).sum(axis=0)
    vals, vecs = np.linalg.eigh(Hsum)
    gt = vecs.T @ G
    c = 0.5 * weight * m**1.5

    def h_norm(r):
        return float(np.linalg.norm(gt / (vals + c * r + 1e-300)))

    if weight == 0.0:
        h = -vecs @ (gt / vals)
        val = float(G @ h + 0.5 * h @ Hsum @ h)
        return val, h
    lo, hi = 0.0, 1.0
    while h_norm(hi) > hi:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("unbounded consensus model")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h_norm(mid) > mid:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    h = -vecs @ (gt / (vals + c * r))
    val = float(G @ h + 0.5 * h @ Hsum @ h + weight / 6.0 * (m * h @ h) ** 1.5)
    return val, h


def loglog_slope(ks, gaps):
    xs = [math.log(k) for k, g in zip(ks, gaps) if g > 0]
    ys = [math.log(g) for g in gaps if g > 0]
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(v * v for v in xs)
    sxy = sum(a * b for a, b in zip(xs, ys))
    return (n * sxy - sx * sy) / (n * sxx - sx * sx)


def secular_bisect(gamma, eigvals, weight, ridge, m, iters=200):
    """Independent bisection oracle for the per-agent scale equation."""
    gamma = np.asarray(gamma, dtype=float)
    eigvals = np.asarray(eigvals, dtype=float)
    gn = float(np.linalg.norm(gamma))
    if gn == 0.0:
        return 0.0

    def lhs_minus(tau):
        den = eigvals + weight * tau + ridge
        return 0.25 * m * float(np.sum(gamma**2 / den**2)) - tau * tau

    hi = 1.0
    while lhs_minus(hi) > 0.0:
        hi *= 2.0
        if hi > 1e18:
            raise RuntimeError("no bracket for the scale root")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if lhs_minus(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
