"""Scikit-learn style classifier trained by simulated decentralized agents."""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .algorithms import AgentStreams, HyperParams, SwarmState, advance, canonical_kind
from .analysis import consensus_error
from .objectives import LogisticObjective
from .partition import make_partition
from .topology import build_graph, make_interaction_matrix

__all__ = ["ConsensusSGDClassifier"]


class ConsensusSGDClassifier(ClassifierMixin, BaseEstimator):
    """Binary L2-regularised logistic regression fitted by ``n_agents`` agents.

    The training set is split across agents, each agent runs the chosen
    consensus algorithm on its shard, and predictions use the agents' average
    parameters.

    Parameters
    ----------
    algorithm : str
        One of ``sgd, cdsgd, icdsgd, gcdsgd, cdmsgd, icdmsgd, gcdmsgd``.
    n_agents : int
    topology : {"ring", "complete", "star"}
    weights : str
        Interaction-matrix scheme passed to :func:`make_interaction_matrix`.
    alpha, omega, tau, mu : float
        Step size, generalized-consensus weight, consensus sweeps, momentum.
    batch_size : int or None
        Minibatch size per agent; ``None`` uses full-batch gradients.
    n_iter : int
    partition : {"balanced", "unbalanced", "class_biased"}
    rho : float
        L2 regularisation strength per agent.
    random_state : int
    """

    def __init__(
        self,
        algorithm="gcdsgd",
        n_agents=5,
        topology="ring",
        weights="metropolis",
        alpha=1e-3,
        omega=0.5,
        tau=1,
        mu=0.0,
        batch_size=None,
        n_iter=500,
        partition="balanced",
        rho=1e-2,
        random_state=0,
    ):
        self.algorithm = algorithm
        self.n_agents = n_agents
        self.topology = topology
        self.weights = weights
        self.alpha = alpha
        self.omega = omega
        self.tau = tau
        self.mu = mu
        self.batch_size = batch_size
        self.n_iter = n_iter
        self.partition = partition
        self.rho = rho
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self._encoder = LabelEncoder().fit(y)
        self.classes_ = self._encoder.classes_
        if len(self.classes_) != 2:
            raise ValueError(f"only binary classification is supported, got {len(self.classes_)} classes")
        if not (isinstance(self.n_iter, (int, np.integer)) and self.n_iter >= 0):
            raise ValueError("n_iter must be a nonnegative integer")
        kind = canonical_kind(self.algorithm)
        y01 = self._encoder.transform(y)
        matrix = make_interaction_matrix(build_graph(self.topology, self.n_agents), self.weights)
        plan = make_partition(len(y01), self.n_agents, self.partition, self.random_state, labels=y01)
        Xb = np.hstack([X, np.ones((len(X), 1))])
        obj = LogisticObjective([Xb[plan.indices(j)] for j in range(self.n_agents)], [y01[plan.indices(j)] for j in range(self.n_agents)], rho=self.rho)
        mode = "deterministic" if self.batch_size is None else "stochastic"
        hp = HyperParams(alpha=self.alpha, omega=self.omega, tau=self.tau, mu=self.mu, batch_size=self.batch_size, mode=mode)
        streams = AgentStreams(self.random_state)
        state = SwarmState.zeros(self.n_agents, obj.dim)
        for _ in range(self.n_iter):
            state, _ = advance(kind, state, matrix, obj, hp, streams)
        theta = np.asarray(state.theta)
        self.agent_coefs_ = theta[:, :-1].copy()
        self.agent_intercepts_ = theta[:, -1].copy()
        mean = theta.mean(axis=0)
        self.coef_ = mean[None, :-1].copy()
        self.intercept_ = mean[-1:].copy()
        self.consensus_error_ = consensus_error(theta)
        self.n_iter_ = self.n_iter
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_[0] + self.intercept_[0]

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores > 0).astype(int)]
