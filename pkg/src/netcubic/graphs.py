"""Communication graphs and their gossip matrices.

Agents sit on a connected undirected graph and may only exchange payloads
along its edges.  The gossip matrix is the unnormalized graph Laplacian
(degree minus adjacency); its null space is the consensus subspace, and the
ratio of its extreme nonzero eigenvalues drives every communication bound
in the package.  The block form (Laplacian tensor identity) is never
materialized: all stacked operations act on (m, n) arrays row by row.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .linalg import SymEigen, sym_eigendecompose

__all__ = [
    "Graph",
    "LaplacianSpec",
    "generate_graph",
    "build_laplacian",
    "apply_laplacian_block",
    "consensus_gap",
    "graph_to_edgelist",
    "graph_from_edgelist",
]

_KINDS = ("complete", "cycle", "path", "star", "erdos_renyi")
_ER_MAX_RETRIES = 1000
# Eigenvalues below this fraction of lambda_max count as zero.
_ZERO_EIG_REL = 1e-9


def _is_connected(m: int, edges) -> bool:
    adj = [[] for _ in range(m)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * m
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == m


@dataclass(frozen=True)
class Graph:
    """Validated connected undirected graph on agents 0..m-1.

    Edges are stored as sorted (i, j) pairs with i < j, in lexicographic
    order.  Construction rejects self loops, duplicate or out-of-range
    edges, fewer than two nodes, and disconnected topologies.
    """

    m: int
    edges: tuple

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"need at least 2 agents, got m={self.m}")
        seen = set()
        for e in self.edges:
            if len(e) != 2:
                raise ValueError(f"malformed edge {e!r}")
            i, j = e
            if i == j:
                raise ValueError(f"self loop on node {i}")
            if not (0 <= i < j < self.m):
                raise ValueError(f"edge {e!r} out of range or not sorted for m={self.m}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge {(i, j)}")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple(sorted(seen)))
        if not _is_connected(self.m, self.edges):
            raise ValueError("graph is disconnected")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> frozenset:
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return frozenset(out)


def generate_graph(kind: str, m: int, p: float = 0.5, seed: int = 0) -> Graph:
    """Build one of the named topologies.

    ``erdos_renyi`` samples each edge independently with probability ``p``
    and rejects disconnected draws, retrying up to 1000 times with a
    deterministic seeded stream before giving up.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown graph kind {kind!r}, expected one of {_KINDS}")
    if kind == "complete":
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    elif kind == "cycle":
        if m < 3:
            raise ValueError("cycle needs m >= 3")
        edges = [(i, i + 1) for i in range(m - 1)] + [(0, m - 1)]
    elif kind == "path":
        edges = [(i, i + 1) for i in range(m - 1)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, m)]
    else:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"edge probability must lie in (0, 1], got {p}")
        rng = np.random.default_rng(seed)
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        for _ in range(_ER_MAX_RETRIES):
            mask = rng.random(len(pairs)) < p
            edges = [e for e, keep in zip(pairs, mask) if keep]
            if _is_connected(m, edges):
                break
        else:
            raise ValueError(
                f"no connected Erdos-Renyi draw in {_ER_MAX_RETRIES} tries "
                f"(m={m}, p={p}); increase p"
            )
    return Graph(m=m, edges=tuple(edges))


@dataclass(frozen=True)
class LaplacianSpec:
    """Gossip matrix of a graph together with its spectral statistics.

    ``lambda_min_pos`` is the smallest eigenvalue above the zero threshold
    (1e-9 times ``lambda_max``); ``chi`` is lambda_max / lambda_min_pos.
    """

    graph: Graph
    W: np.ndarray
    eig: SymEigen = field(repr=False)
    lambda_max: float
    lambda_min_pos: float
    chi: float

    @property
    def m(self) -> int:
        return self.graph.m


def build_laplacian(graph: Graph) -> LaplacianSpec:
    """Assemble the dense Laplacian and its spectrum.

    The spectrum comes from the package's own Jacobi eigensolver.  A
    connected graph must show exactly one numerically zero eigenvalue;
    anything else is reported as an internal error.
    """
    m = graph.m
    W = np.zeros((m, m))
    for i, j in graph.edges:
        W[i, j] = -1.0
        W[j, i] = -1.0
        W[i, i] += 1.0
        W[j, j] += 1.0
    eig = sym_eigendecompose(W)
    lam_max = float(eig.values[-1])
    zero_tol = _ZERO_EIG_REL * lam_max
    positive = eig.values[eig.values > zero_tol]
    if positive.size != m - 1:
        raise RuntimeError(
            f"expected one zero Laplacian eigenvalue, found {m - positive.size}"
        )
    lam_min_pos = float(positive[0])
    return LaplacianSpec(
        graph=graph,
        W=W,
        eig=eig,
        lambda_max=lam_max,
        lambda_min_pos=lam_min_pos,
        chi=lam_max / lam_min_pos,
    )


def apply_laplacian_block(lap: LaplacianSpec, X: np.ndarray) -> np.ndarray:
    """Apply the block gossip operator to a stacked (m, n) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != lap.m:
        raise ValueError(f"stacked array must have shape (m, n) with m={lap.m}")
    return lap.W @ X


def consensus_gap(lap: LaplacianSpec, X: np.ndarray) -> float:
    """Disagreement seminorm sqrt(<X, W X>) of a stacked point.

    Zero exactly on consensus.  Round-off can push the quadratic form a
    hair negative; magnitudes at or below 1e-12 times ||X||^2 clamp to 0,
    anything more negative raises.
    """
    X = np.asarray(X, dtype=float)
    q = float(np.sum(X * apply_laplacian_block(lap, X)))
    if q < 0.0:
        if -q <= 1e-12 * max(float(np.sum(X * X)), 1.0):
            return 0.0
        raise ArithmeticError(f"quadratic form came out negative: {q:g}")
    return float(np.sqrt(q))


def graph_to_edgelist(graph: Graph) -> str:
    """Serialize as text: node count on the first line, then one edge per line."""
    buf = io.StringIO()
    buf.write(f"{graph.m}\n")
    for i, j in graph.edges:
        buf.write(f"{i} {j}\n")
    return buf.getvalue()


def graph_from_edgelist(text: str) -> Graph:
    """Parse the edge-list format written by :func:`graph_to_edgelist`."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [(k + 1, ln) for k, ln in enumerate(lines) if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty edge list")
    lineno, head = lines[0]
    try:
        m = int(head)
    except ValueError as exc:
        raise ValueError(f"line {lineno}: expected node count, got {head!r}") from exc
    edges = []
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-integer edge {ln!r}") from exc
        edges.append((min(i, j), max(i, j)))
    return Graph(m=m, edges=tuple(edges))
