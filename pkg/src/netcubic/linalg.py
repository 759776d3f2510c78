"""Dense symmetric linear algebra kernels.

Everything here operates on small dense matrices (local Hessians, gossip
matrices of a few hundred nodes at most).  The eigensolver is a cyclic
Jacobi iteration rather than a LAPACK call so that the package's numerical
core has no opaque dependencies; LAPACK is still used in the test suite as
an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymEigen",
    "sym_eigendecompose",
    "shifted_diag_solve",
    "finite_diff_gradient",
    "finite_diff_hessian",
]

# Residual-based sweep tolerance; entry-level symmetry tolerance on input.
_OFF_TOL = 1e-12
_SYM_TOL = 1e-10
_SWEEP_BUDGET = 100


@dataclass(frozen=True)
class SymEigen:
    """Eigendecomposition of a symmetric matrix.

    ``values`` ascend.  Rows of ``vectors`` are the eigenvectors, so the
    matrix factors as ``vectors.T @ diag(values) @ vectors``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.vectors.T @ (self.values[:, None] * self.vectors)


def sym_eigendecompose(H: np.ndarray, sweep_budget: int = _SWEEP_BUDGET) -> SymEigen:
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Parameters
    ----------
    H : (d, d) array
        Symmetric input; entries must match their transpose within 1e-10.
    sweep_budget : int
        Maximum number of full pivot sweeps before giving up.

    Returns
    -------
    SymEigen
        Ascending eigenvalues and an orthonormal row-eigenvector matrix.

    Raises
    ------
    ValueError
        If the input is not square or not symmetric.
    RuntimeError
        If the off-diagonal mass has not fallen below 1e-12 times the
        Frobenius norm after ``sweep_budget`` sweeps.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.abs(H - H.T) <= _SYM_TOL):
        raise ValueError("matrix is not symmetric within 1e-10")
    d = H.shape[0]
    if d == 1:
        return SymEigen(values=H.diagonal().copy(), vectors=np.ones((1, 1)))

    A = 0.5 * (H + H.T)  # exact symmetry keeps the sweep stable
    V = np.eye(d)
    norm_target = _OFF_TOL * max(np.linalg.norm(A), np.finfo(float).tiny)

    converged = False
    for _ in range(sweep_budget):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= norm_target:
            converged = True
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0.0 else 1.0
                t /= abs(theta) + np.sqrt(1.0 + theta * theta)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- J.T A J on columns then rows, J the (p,q) rotation.
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                vec_p = V[:, p].copy()
                vec_q = V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    else:
        converged = np.linalg.norm(A - np.diag(A.diagonal())) <= norm_target
    if not converged:
        raise RuntimeError(
            f"Jacobi sweep budget of {sweep_budget} exhausted without convergence"
        )

    order = np.argsort(A.diagonal(), kind="stable")
    return SymEigen(values=A.diagonal()[order].copy(), vectors=V[:, order].T.copy())


def shifted_diag_solve(eig: SymEigen, shift: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(H + shift * I) x = rhs`` from a cached eigendecomposition.

    Raises ``numpy.linalg.LinAlgError`` when the shifted spectrum is not
    strictly positive.
    """
    shifted = eig.values + shift
    if shifted[0] <= 0.0:
        raise np.linalg.LinAlgError(
            f"shifted matrix is singular or indefinite (min eigenvalue {shifted[0]:g})"
        )
    rhs = np.asarray(rhs, dtype=float)
    return eig.vectors.T @ (eig.vectors @ rhs / shifted)


def finite_diff_gradient(fun, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return g


def finite_diff_hessian(fun, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Symmetric four-point central-difference Hessian."""
    x = np.asarray(x, dtype=float)
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = step
        for j in range(i, d):
            ej = np.zeros(d)
            ej[j] = step
            val = (
                fun(x + ei + ej)
                - fun(x + ei - ej)
                - fun(x - ei + ej)
                + fun(x - ei - ej)
            ) / (4.0 * step * step)
            H[i, j] = val
            H[j, i] = val
    return H
