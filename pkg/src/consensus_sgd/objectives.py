"""Per-agent objectives with exact and minibatch gradients.

Agent ``j`` owns samples ``D_j`` and its loss is the SUM of per-sample losses
plus an optional agent-level L2 term.  A minibatch gradient over ``b`` of the
``n_j`` samples is rescaled by ``n_j / b`` so that its expectation under
uniform sampling without replacement equals the full-batch gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "NonconvexError",
    "GradientSample",
    "ObjectiveConstants",
    "Objective",
    "QuadraticObjective",
    "LogisticObjective",
    "MLPObjective",
    "random_quadratic_objective",
    "H_MARGIN",
]

# Trajectory-local bounds (Lipschitz h, gradient bound G) get this safety factor.
H_MARGIN = 1.1


class NonconvexError(ValueError):
    """A strong-convexity constant was requested for a nonconvex objective."""


@dataclass(frozen=True)
class GradientSample:
    value: np.ndarray
    batch_indices: np.ndarray
    is_full_batch: bool


@dataclass(frozen=True)
class ObjectiveConstants:
    """Analytic (or empirical) constants consumed by the convergence bounds.

    ``H_m`` is ``None`` for nonconvex objectives; use
    :meth:`require_strongly_convex` where a bound needs it.  ``h`` is always a
    trajectory-local estimate (``None`` until a trajectory is supplied).
    """

    H_m: float | None
    gamma_m: float | None
    h: float | None = None
    H: tuple[float, ...] | None = None
    gamma: tuple[float, ...] | None = None
    empirical_gamma: bool = False

    def require_strongly_convex(self) -> "ObjectiveConstants":
        if self.H_m is None:
            raise NonconvexError("strong convexity constant H_m is undefined for a nonconvex objective")
        if self.gamma_m is None:
            raise NonconvexError("smoothness constant gamma_m is unavailable")
        return self

    def require_h(self) -> float:
        if self.h is None:
            raise ValueError("Lipschitz bound h needs a recorded trajectory")
        return self.h


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters contain non-finite values")
    return theta


class Objective:
    """Collection of ``n_agents`` local losses sharing a parameter dimension.

    Subclasses implement ``_sample_losses`` and ``_sample_grad_sum``; the
    regulariser ``rho/2 * ||theta||^2`` is added once per agent.
    """

    kind = "abstract"
    rho = 0.0

    n_agents: int
    dim: int

    def n_samples(self, j: int) -> int:
        raise NotImplementedError

    def _sample_losses(self, j, theta, idx) -> float:
        raise NotImplementedError

    def _sample_grad_sum(self, j, theta, idx) -> np.ndarray:
        raise NotImplementedError

    def eval(self, j: int, theta) -> float:
        theta = _check_theta(theta)
        idx = np.arange(self.n_samples(j))
        return float(self._sample_losses(j, theta, idx) + 0.5 * self.rho * (theta @ theta))

    def grad(self, j: int, theta) -> GradientSample:
        theta = _check_theta(theta)
        idx = np.arange(self.n_samples(j))
        return GradientSample(self.batch_grad(j, theta, idx), idx, True)

    def batch_grad(self, j: int, theta, idx) -> np.ndarray:
        """Unbiased gradient estimate from the sample indices ``idx``."""
        idx = np.asarray(idx, dtype=int)
        n_j = self.n_samples(j)
        g = self._sample_grad_sum(j, theta, idx)
        if len(idx) != n_j:
            g = g * (n_j / len(idx))
        return g + self.rho * theta

    def sample_batch(self, j: int, batch_size: int | None, rng: np.random.Generator) -> np.ndarray:
        n_j = self.n_samples(j)
        if batch_size is None or batch_size == n_j:
            return np.arange(n_j)
        if not 1 <= batch_size <= n_j:
            raise ValueError(f"batch size {batch_size} outside [1, {n_j}] for agent {j}")
        return np.sort(rng.choice(n_j, size=batch_size, replace=False))

    def stochastic_grad(self, j: int, theta, batch_size: int, rng: np.random.Generator) -> GradientSample:
        theta = _check_theta(theta)
        idx = self.sample_batch(j, batch_size, rng)
        return GradientSample(self.batch_grad(j, theta, idx), idx, len(idx) == self.n_samples(j))

    # Stacked helpers over all agents: ``theta`` has shape (N, d).

    def total_loss(self, theta) -> float:
        return float(sum(self.eval(j, theta[j]) for j in range(self.n_agents)))

    def full_gradients(self, theta) -> np.ndarray:
        return np.stack([self.grad(j, theta[j]).value for j in range(self.n_agents)])

    def analytic_constants(self) -> tuple[list[float] | None, list[float] | None]:
        """Per-agent (H_j, gamma_j), or ``None`` where no closed form exists."""
        return None, None

    def constants(self, trajectory=None, observed_grad_norm: float | None = None) -> ObjectiveConstants:
        """Constants ``(H_m, gamma_m, h)``.

        ``h`` is the largest per-agent gradient norm seen along ``trajectory``
        (a sequence of ``(N, d)`` iterates) or ``observed_grad_norm``, times
        :data:`H_MARGIN`.
        """
        H, gamma = self.analytic_constants()
        empirical_gamma = False
        if gamma is None and trajectory is not None:
            gamma = [estimate_smoothness(self, j, trajectory) for j in range(self.n_agents)]
            empirical_gamma = True
        h = None
        if trajectory is not None or observed_grad_norm is not None:
            h_obs = 0.0 if observed_grad_norm is None else float(observed_grad_norm)
            for theta in trajectory if trajectory is not None else ():
                h_obs = max(h_obs, float(np.max(np.linalg.norm(self.full_gradients(theta), axis=1))))
            h = H_MARGIN * h_obs
        return ObjectiveConstants(
            H_m=None if H is None else float(min(H)),
            gamma_m=None if gamma is None else float(max(gamma)),
            h=h,
            H=None if H is None else tuple(float(x) for x in H),
            gamma=None if gamma is None else tuple(float(x) for x in gamma),
            empirical_gamma=empirical_gamma,
        )


def estimate_smoothness(objective: Objective, j: int, trajectory) -> float:
    """Largest gradient difference quotient of agent ``j`` between consecutive iterates."""
    best = 0.0
    prev_theta, prev_grad = None, None
    for theta in trajectory:
        t = np.asarray(theta)[j]
        g = objective.grad(j, t).value
        if prev_theta is not None:
            step = np.linalg.norm(t - prev_theta)
            if step > 0:
                best = max(best, np.linalg.norm(g - prev_grad) / step)
        prev_theta, prev_grad = t, g
    return float(best)


class QuadraticObjective(Objective):
    """``f_j(theta) = sum_i 1/2 theta' A_ji theta + b_ji' theta + c_ji``.

    Each agent holds ``n_j`` quadratic terms; only their sums must be positive
    definite.  Use :meth:`from_matrices` for single-term agents.
    """

    kind = "quadratic"

    def __init__(self, A_terms, b_terms, c_terms=None):
        self.A_terms = [np.asarray(a, dtype=float) for a in A_terms]
        self.b_terms = [np.asarray(b, dtype=float) for b in b_terms]
        if c_terms is None:
            c_terms = [np.zeros(len(b)) for b in self.b_terms]
        self.c_terms = [np.asarray(c, dtype=float) for c in c_terms]
        self.n_agents = len(self.A_terms)
        self.dim = self.A_terms[0].shape[-1]
        self.A = []
        self.b = []
        self.c = []
        for j, (a, b, c) in enumerate(zip(self.A_terms, self.b_terms, self.c_terms)):
            if a.ndim != 3 or a.shape[1:] != (self.dim, self.dim) or b.shape != (len(a), self.dim) or c.shape != (len(a),):
                raise ValueError(f"agent {j}: inconsistent quadratic term shapes")
            total = a.sum(axis=0)
            if not np.allclose(total, total.T, atol=1e-12):
                raise ValueError(f"agent {j}: Hessian is not symmetric")
            if np.linalg.eigvalsh(total)[0] <= 0:
                raise ValueError(f"agent {j}: Hessian is not positive definite")
            self.A.append(total)
            self.b.append(b.sum(axis=0))
            self.c.append(float(c.sum()))

    @classmethod
    def from_matrices(cls, A, b, c=None) -> "QuadraticObjective":
        A = [np.asarray(a, dtype=float)[None] for a in A]
        b = [np.asarray(v, dtype=float)[None] for v in b]
        c = None if c is None else [np.array([float(v)]) for v in c]
        return cls(A, b, c)

    def n_samples(self, j):
        return len(self.A_terms[j])

    def _sample_losses(self, j, theta, idx):
        if len(idx) == self.n_samples(j):
            return 0.5 * theta @ self.A[j] @ theta + self.b[j] @ theta + self.c[j]
        a = self.A_terms[j][idx].sum(axis=0)
        return 0.5 * theta @ a @ theta + self.b_terms[j][idx].sum(axis=0) @ theta + self.c_terms[j][idx].sum()

    def _sample_grad_sum(self, j, theta, idx):
        if len(idx) == self.n_samples(j):
            return self.A[j] @ theta + self.b[j]
        return self.A_terms[j][idx].sum(axis=0) @ theta + self.b_terms[j][idx].sum(axis=0)

    def analytic_constants(self):
        eig = [np.linalg.eigvalsh(a) for a in self.A]
        return [float(e[0]) for e in eig], [float(e[-1]) for e in eig]

    def minimizers(self) -> np.ndarray:
        """Each agent's own minimiser ``-A_j^{-1} b_j``, stacked as (N, d)."""
        return np.stack([-np.linalg.solve(a, b) for a, b in zip(self.A, self.b)])


def random_quadratic_objective(
    n_agents: int,
    dim: int,
    *,
    eig_range: tuple[float, float] = (1.0, 10.0),
    n_terms: int = 1,
    offset_scale: float = 1.0,
    seed: int = 0,
) -> QuadraticObjective:
    """Random strongly convex quadratics.

    Every agent's Hessian has eigenvalues spread evenly over ``eig_range`` (so
    its condition number is exactly ``hi/lo`` when ``dim >= 2``) in a random
    orthonormal basis.  With ``n_terms > 1`` the Hessian and linear term are
    split into zero-sum perturbed pieces so that minibatches are noisy.
    """
    rng = np.random.default_rng(seed)
    lo, hi = eig_range
    eigs = np.linspace(lo, hi, dim) if dim > 1 else np.array([lo])
    A_terms, b_terms = [], []
    for _ in range(n_agents):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        a = (q * eigs) @ q.T
        a = 0.5 * (a + a.T)
        b = offset_scale * rng.standard_normal(dim)
        if n_terms == 1:
            A_terms.append(a[None])
            b_terms.append(b[None])
            continue
        pert = rng.standard_normal((n_terms, dim, dim)) * (lo / (2 * n_terms))
        pert = 0.5 * (pert + pert.transpose(0, 2, 1))
        pert -= pert.mean(axis=0)
        bp = rng.standard_normal((n_terms, dim)) * offset_scale
        bp -= bp.mean(axis=0)
        A_terms.append(a / n_terms + pert)
        b_terms.append(b / n_terms + bp)
    return QuadraticObjective(A_terms, b_terms)


def _split_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.all(np.isin(y, (-1.0, 1.0))):
        return y
    if np.all(np.isin(y, (0.0, 1.0))):
        return 2.0 * y - 1.0
    raise ValueError("binary labels must be in {-1, +1} or {0, 1}")


class LogisticObjective(Objective):
    """L2-regularised logistic loss: ``sum_i log(1 + exp(-y_i x_i' theta)) + rho/2 ||theta||^2``.

    ``Xs[j]`` and ``ys[j]`` are agent ``j``'s features and binary labels.
    """

    kind = "logistic"

    def __init__(self, Xs, ys, rho: float = 1e-2):
        if rho <= 0:
            raise ValueError("logistic objective needs rho > 0 for strong convexity")
        self.Xs = [np.asarray(x, dtype=float) for x in Xs]
        self.ys = [_split_labels(y) for y in ys]
        self.rho = float(rho)
        self.n_agents = len(self.Xs)
        self.dim = self.Xs[0].shape[1]
        for j, (x, y) in enumerate(zip(self.Xs, self.ys)):
            if x.ndim != 2 or x.shape[1] != self.dim or len(y) != len(x) or len(x) == 0:
                raise ValueError(f"agent {j}: bad data shapes {x.shape}, {y.shape}")

    def n_samples(self, j):
        return len(self.ys[j])

    def _sample_losses(self, j, theta, idx):
        margins = self.ys[j][idx] * (self.Xs[j][idx] @ theta)
        return float(np.sum(np.logaddexp(0.0, -margins)))

    def _sample_grad_sum(self, j, theta, idx):
        x, y = self.Xs[j][idx], self.ys[j][idx]
        return -(x.T @ (y * expit(-y * (x @ theta))))

    def analytic_constants(self):
        # Sum-of-samples convention: the loss Hessian is bounded by X'X / 4.
        gamma = [self.rho + 0.25 * float(np.linalg.eigvalsh(x.T @ x)[-1]) for x in self.Xs]
        return [self.rho] * self.n_agents, gamma

    def decision(self, theta, X) -> np.ndarray:
        return np.asarray(X) @ theta

    def accuracy(self, theta, X, y) -> float:
        return float(np.mean(np.sign(self.decision(theta, X)) == _split_labels(y)))


class MLPObjective(Objective):
    """One-hidden-layer tanh network with logistic output loss.

    Parameters are packed as ``[W1 (hidden x p), b1 (hidden), w2 (hidden), b2]``.
    """

    kind = "mlp"

    def __init__(self, Xs, ys, hidden: int = 8, rho: float = 1e-4):
        if not 1 <= hidden <= 32:
            raise ValueError("hidden layer width must be between 1 and 32")
        self.Xs = [np.asarray(x, dtype=float) for x in Xs]
        self.ys = [_split_labels(y) for y in ys]
        self.hidden = int(hidden)
        self.rho = float(rho)
        self.n_agents = len(self.Xs)
        self.n_features = self.Xs[0].shape[1]
        self.dim = self.hidden * self.n_features + 2 * self.hidden + 1

    def n_samples(self, j):
        return len(self.ys[j])

    def unpack(self, theta):
        h, p = self.hidden, self.n_features
        W1 = theta[: h * p].reshape(h, p)
        b1 = theta[h * p : h * p + h]
        w2 = theta[h * p + h : h * p + 2 * h]
        b2 = theta[-1]
        return W1, b1, w2, b2

    def decision(self, theta, X) -> np.ndarray:
        W1, b1, w2, b2 = self.unpack(theta)
        return np.tanh(np.asarray(X) @ W1.T + b1) @ w2 + b2

    def accuracy(self, theta, X, y) -> float:
        return float(np.mean(np.sign(self.decision(theta, X)) == _split_labels(y)))

    def _sample_losses(self, j, theta, idx):
        out = self.decision(theta, self.Xs[j][idx])
        return float(np.sum(np.logaddexp(0.0, -self.ys[j][idx] * out)))

    def _sample_grad_sum(self, j, theta, idx):
        x, y = self.Xs[j][idx], self.ys[j][idx]
        W1, b1, w2, _ = self.unpack(theta)
        act = np.tanh(x @ W1.T + b1)
        out = act @ w2 + theta[-1]
        dout = -y * expit(-y * out)
        dz = np.outer(dout, w2) * (1.0 - act**2)
        return np.concatenate([(dz.T @ x).ravel(), dz.sum(axis=0), act.T @ dout, [dout.sum()]])
