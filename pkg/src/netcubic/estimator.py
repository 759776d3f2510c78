"""Scikit-learn facade over the decentralized solver.

One estimator class for binary logistic regression trained as if the data
lived on ``n_agents`` machines that only talk to graph neighbors.  This is
a convenience wrapper; the solver modules remain the primary API.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_X_y, check_array, check_is_fitted

from .graphs import generate_graph, build_laplacian, consensus_gap
from .inner import InnerSettings
from .objectives import LogisticLocal, StackedObjective, split_shards
from .outer import OuterConfig, run_outer

__all__ = ["DistributedCubicClassifier"]


class DistributedCubicClassifier(ClassifierMixin, BaseEstimator):
    """Binary logistic regression fitted by the accelerated cubic scheme.

    Parameters
    ----------
    n_agents : number of simulated machines the data is sharded across.
    topology : graph kind ("complete", "cycle", "path", "star", "erdos_renyi").
    edge_prob : edge probability when topology is "erdos_renyi".
    epsilon : target accuracy on the aggregate loss.
    max_outer : cap on outer iterations.
    shard_policy : "uniform" (seeded shuffle) or "contiguous".
    fit_intercept : append a constant feature column before sharding.
    random_state : seed for the shard shuffle and random topologies.

    After ``fit`` the learned hyperplane is the across-agent mean of the
    final stacked iterate; ``consensus_gap_`` reports how far the agents
    still disagreed under the graph metric.
    """

    def __init__(
        self,
        n_agents: int = 4,
        topology: str = "complete",
        edge_prob: float = 0.5,
        epsilon: float = 1e-3,
        max_outer: int = 30,
        shard_policy: str = "uniform",
        fit_intercept: bool = True,
        random_state: int = 0,
    ):
        self.n_agents = n_agents
        self.topology = topology
        self.edge_prob = edge_prob
        self.epsilon = epsilon
        self.max_outer = max_outer
        self.shard_policy = shard_policy
        self.fit_intercept = fit_intercept
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(
                f"binary classifier, got {self.classes_.shape[0]} classes"
            )
        y_pm = np.where(y == self.classes_[1], 1.0, -1.0)
        self.n_features_in_ = X.shape[1]
        Xa = np.hstack([X, np.ones((X.shape[0], 1))]) if self.fit_intercept else X

        shards = split_shards(
            Xa, y_pm, self.n_agents, policy=self.shard_policy, seed=self.random_state
        )
        objective = StackedObjective(
            [LogisticLocal(f, t, Xa.shape[0]) for f, t in shards]
        )
        if self.n_agents > 1:
            graph = generate_graph(
                self.topology, self.n_agents, p=self.edge_prob, seed=self.random_state
            )
            lap = build_laplacian(graph)
        else:
            lap = None
        cfg = OuterConfig(
            epsilon=self.epsilon,
            k_override=self.max_outer,
            acc_relax=1e-10,
            acc_relax_phi=1e-4,
            acc_progress=1e-2,
            adaptive_radius=True,
            warm_dual=True,
            stall_window=5,
            inner=InnerSettings(stop_when_stable=True, round_cap=4000),
        )
        stacked, trace = run_outer(objective, lap, cfg)
        mean = stacked.mean(axis=0)
        if self.fit_intercept:
            self.coef_ = mean[np.newaxis, :-1].copy()
            self.intercept_ = mean[-1:].copy()
        else:
            self.coef_ = mean[np.newaxis, :].copy()
            self.intercept_ = np.zeros(1)
        self.consensus_gap_ = consensus_gap(lap, stacked) if lap is not None else 0.0
        self.n_iter_ = len(trace.k) - 1
        self.trace_ = trace
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.coef_[0] + self.intercept_[0]

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores >= 0.0, self.classes_[1], self.classes_[0])

    def predict_proba(self, X):
        scores = self.decision_function(X)
        p1 = 1.0 / (1.0 + np.exp(-scores))
        return np.column_stack([1.0 - p1, p1])
