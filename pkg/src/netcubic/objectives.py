"""Local objective oracles and data handling.

Each agent holds one local function with value/gradient/Hessian access and
two curvature constants: a bound on the Hessian norm (``grad_lip``) and a
Lipschitz constant of the Hessian map (``hess_lip``).  The logistic loss
normalizes by the GLOBAL sample count so that the sum of the local values
over all agents equals the usual average loss over the pooled data set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LogisticLocal",
    "QuadraticLocal",
    "StackedObjective",
    "load_libsvm",
    "split_shards",
    "synth_classification",
    "LOGISTIC_CURV3",
]

# Peak of |third derivative| of log(1 + exp(-t)); attained at
# sigmoid(t) = 1/2 + 1/(2*sqrt(3)).  Checked numerically in the tests.
LOGISTIC_CURV3 = 1.0 / (6.0 * np.sqrt(3.0))


class LogisticLocal:
    """Logistic loss over one shard, normalized by the global sample count.

    value(x)   = (1/d) sum_r log(1 + exp(-y_r <a_r, x>))
    gradient   = (1/d) sum_r -y_r sigmoid(-y_r <a_r, x>) a_r
    hessian    = (1/d) sum_r s_r (1 - s_r) a_r a_r^T,  s_r = sigmoid(<a_r, x>-ish)

    with d the global count, a_r the feature rows and y_r in {-1, +1}.
    """

    def __init__(self, features: np.ndarray, labels: np.ndarray, d_global: int):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must be 1-D and match the feature rows")
        if not np.all(np.abs(labels) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if d_global < features.shape[0]:
            raise ValueError("global sample count smaller than the shard")
        self.features = features
        self.labels = labels
        self.d_global = int(d_global)
        row_sq = np.einsum("ij,ij->i", features, features)
        self.grad_lip = float(row_sq.sum()) / (4.0 * d_global)
        self.hess_lip = float(LOGISTIC_CURV3 * (row_sq**1.5).sum() / d_global)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def _margins(self, x: np.ndarray) -> np.ndarray:
        return self.labels * (self.features @ x)

    def value(self, x: np.ndarray) -> float:
        return float(np.logaddexp(0.0, -self._margins(x)).sum() / self.d_global)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        t = self._margins(x)
        # sigmoid(-t) without overflow for large |t|
        w = 0.5 * (1.0 - np.tanh(0.5 * t))
        return -(self.features.T @ (self.labels * w)) / self.d_global

    def hessian(self, x: np.ndarray) -> np.ndarray:
        t = self._margins(x)
        s = 0.5 * (1.0 + np.tanh(0.5 * t))
        w = s * (1.0 - s)
        return (self.features.T * w) @ self.features / self.d_global


class QuadraticLocal:
    """Convex quadratic 0.5 x^T A x - b^T x with positive semidefinite A."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ValueError("need square A and matching b")
        if not np.all(np.abs(A - A.T) <= 1e-10):
            raise ValueError("A must be symmetric")
        eigvals = np.linalg.eigvalsh(A)
        if eigvals[0] < -1e-10 * max(1.0, abs(eigvals[-1])):
            raise ValueError("A must be positive semidefinite")
        self.A = 0.5 * (A + A.T)
        self.b = b
        self.grad_lip = float(max(eigvals[-1], 0.0))
        self.hess_lip = 0.0

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.A.copy()


@dataclass
class StackedObjective:
    """Finite sum of per-agent locals viewed as one function of a stacked point.

    Curvature constants are the per-agent maxima.  The counters tally
    stacked oracle calls so methods can be compared on evaluations rather
    than wall time; one stacked call touches every local once.
    """

    locals: list
    value_evals: int = field(default=0, compare=False)
    grad_evals: int = field(default=0, compare=False)
    hess_evals: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.locals:
            raise ValueError("need at least one local objective")
        dims = {f.dim for f in self.locals}
        if len(dims) != 1:
            raise ValueError(f"locals disagree on dimension: {sorted(dims)}")
        self.n = dims.pop()
        self.m = len(self.locals)
        self.grad_lip = max(f.grad_lip for f in self.locals)
        self.hess_lip = max(f.hess_lip for f in self.locals)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.n):
            raise ValueError(f"stacked point must have shape ({self.m}, {self.n})")
        return X

    def stacked_value(self, X: np.ndarray) -> float:
        X = self._check(X)
        self.value_evals += 1
        return float(sum(f.value(X[i]) for i, f in enumerate(self.locals)))

    def stacked_gradient(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        self.grad_evals += 1
        return np.stack([f.gradient(X[i]) for i, f in enumerate(self.locals)])

    def hessian_blocks(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        self.hess_evals += 1
        return np.stack([f.hessian(X[i]) for i, f in enumerate(self.locals)])

    # Aggregate views at a common point, used by centralized references.
    def aggregate_value(self, x: np.ndarray) -> float:
        self.value_evals += 1
        return float(sum(f.value(x) for f in self.locals))

    def aggregate_gradient(self, x: np.ndarray) -> np.ndarray:
        self.grad_evals += 1
        out = np.zeros(self.n)
        for f in self.locals:
            out += f.gradient(x)
        return out

    @property
    def oracle_calls(self) -> int:
        return self.grad_evals + self.hess_evals


def load_libsvm(text: str) -> tuple:
    """Parse LIBSVM-format lines into a dense feature matrix and +-1 labels.

    Accepts labels in {-1, +1} or {0, 1} (the latter maps to -1/+1).
    Feature indices are 1-based; the dimension is the largest index seen.
    Raises ``ValueError`` naming the offending line on malformed input.
    """
    rows = []
    labels = []
    max_idx = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            y = float(parts[0])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad label {parts[0]!r}") from exc
        if y in (0.0, -1.0):
            y = -1.0
        elif y == 1.0:
            y = 1.0
        else:
            raise ValueError(f"line {lineno}: label must be 0/1 or -1/+1, got {y:g}")
        feats = {}
        for tok in parts[1:]:
            try:
                idx_s, val_s = tok.split(":")
                idx = int(idx_s)
                val = float(val_s)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad feature token {tok!r}") from exc
            if idx < 1:
                raise ValueError(f"line {lineno}: feature index {idx} is not 1-based")
            if idx in feats:
                raise ValueError(f"line {lineno}: duplicate feature index {idx}")
            feats[idx] = val
            max_idx = max(max_idx, idx)
        rows.append(feats)
        labels.append(y)
    if not rows:
        raise ValueError("no samples found")
    X = np.zeros((len(rows), max_idx))
    for r, feats in enumerate(rows):
        for idx, val in feats.items():
            X[r, idx - 1] = val
    return X, np.asarray(labels)


def split_shards(
    features: np.ndarray,
    labels: np.ndarray,
    m: int,
    policy: str = "uniform",
    seed: int = 0,
) -> list:
    """Partition a data set into m shards, each row used exactly once.

    ``uniform`` deals a seeded shuffle round-robin; ``contiguous`` slices
    consecutive blocks of near-equal size.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    d = features.shape[0]
    if labels.shape != (d,):
        raise ValueError("labels must match feature rows")
    if m < 1 or m > d:
        raise ValueError(f"cannot split {d} samples into {m} shards")
    if policy == "uniform":
        order = np.random.default_rng(seed).permutation(d)
        parts = [order[i::m] for i in range(m)]
    elif policy == "contiguous":
        bounds = np.linspace(0, d, m + 1).astype(int)
        parts = [np.arange(bounds[i], bounds[i + 1]) for i in range(m)]
    else:
        raise ValueError(f"unknown split policy {policy!r}")
    return [(features[np.sort(idx)], labels[np.sort(idx)]) for idx in parts]


def synth_classification(
    m: int,
    n: int,
    d_per_agent: int,
    seed: int = 0,
    scale: float = 1.0,
) -> StackedObjective:
    """Deterministic synthetic binary classification problem, pre-sharded.

    Gaussian features (scaled), labels drawn with logistic noise around a
    random ground-truth hyperplane.  Same seed, same problem.
    """
    rng = np.random.default_rng(seed)
    d = m * d_per_agent
    truth = rng.standard_normal(n)
    truth *= 2.0 / np.linalg.norm(truth)
    features = scale * rng.standard_normal((d, n))
    prob = 1.0 / (1.0 + np.exp(-features @ truth))
    labels = np.where(rng.random(d) < prob, 1.0, -1.0)
    # Guard against degenerate one-class shards on tiny draws.
    if np.all(labels == labels[0]):
        labels[0] = -labels[0]
    shards = split_shards(features, labels, m, policy="uniform", seed=seed + 1)
    return StackedObjective([LogisticLocal(f, y, d) for f, y in shards])
