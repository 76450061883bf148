"""Synchronous consensus-SGD update rules as pure state transitions.

Every step reads only the iteration-``k`` state.  Per-agent minibatches come
from independent random streams keyed by ``(seed, agent, k)``, so different
algorithms run with the same seed see identical batch draws and the agent
evaluation order cannot change the result.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .objectives import Objective, ObjectiveConstants
from .topology import InteractionMatrix

__all__ = [
    "ALGORITHMS",
    "DivergenceError",
    "NoAdmissibleStepSize",
    "HyperParams",
    "SwarmState",
    "AgentStreams",
    "canonical_kind",
    "local_gradients",
    "mix",
    "sgd_step",
    "cdsgd_step",
    "icdsgd_step",
    "gcdsgd_step",
    "cdmsgd_step",
    "icdmsgd_step",
    "gcdmsgd_step",
    "step",
    "max_step_size",
    "lyapunov_family",
]

DIVERGENCE_NORM = 1e12

ALGORITHMS = ("sgd", "cdsgd", "icdsgd", "gcdsgd", "cdmsgd", "icdmsgd", "gcdmsgd")
MOMENTUM_KINDS = ("cdmsgd", "icdmsgd", "gcdmsgd")

_DISPLAY = {
    "sgd": "SGD",
    "cdsgd": "CDSGD",
    "icdsgd": "i-CDSGD",
    "gcdsgd": "g-CDSGD",
    "cdmsgd": "CDMSGD",
    "icdmsgd": "i-CDMSGD",
    "gcdmsgd": "g-CDMSGD",
}


def canonical_kind(kind: str) -> str:
    key = kind.lower().replace("-", "").replace("_", "")
    if key not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {kind!r}; expected one of {', '.join(_DISPLAY.values())}")
    return key


def display_name(kind: str) -> str:
    return _DISPLAY[canonical_kind(kind)]


class DivergenceError(RuntimeError):
    """Iterates became non-finite or exceeded the divergence norm."""

    def __init__(self, iteration: int, theta: np.ndarray, grad_norm: float):
        self.iteration = iteration
        self.theta = theta
        self.grad_norm = grad_norm
        super().__init__(
            f"diverged at iteration {iteration}: |Theta| = {np.linalg.norm(theta):.3e}, |g| = {grad_norm:.3e}"
        )


class NoAdmissibleStepSize(ValueError):
    """The step-size condition has a non-positive right-hand side."""

    def __init__(self, kind: str, bound: float):
        self.kind = kind
        self.bound = bound
        super().__init__(f"no admissible step size for {display_name(kind)}: upper bound {bound:.6g} <= 0")


@dataclass(frozen=True)
class HyperParams:
    """Step size, trade-off knobs and gradient-noise constants.

    In ``deterministic`` mode gradients are full-batch and the noise constants
    are pinned to ``B = B_V = 0`` and ``r1 = r2 = 1``.
    """

    alpha: float
    omega: float = 1.0
    tau: int = 1
    mu: float = 0.0
    batch_size: int | None = None
    r1: float = 1.0
    r2: float = 1.0
    B: float = 0.0
    B_V: float = 0.0
    mode: str = "stochastic"
    lambda_n_power: bool = False

    def __post_init__(self):
        if self.mode not in ("deterministic", "stochastic"):
            raise ValueError(f"mode must be 'deterministic' or 'stochastic', got {self.mode!r}")
        if self.mode == "deterministic":
            for name, value in (("B", 0.0), ("B_V", 0.0), ("r1", 1.0), ("r2", 1.0), ("batch_size", None)):
                object.__setattr__(self, name, value)
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"step size alpha must be positive, got {self.alpha}")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        object.__setattr__(self, "tau", int(self.tau))
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"momentum mu must lie in [0, 1), got {self.mu}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if not self.r2 >= self.r1 > 0:
            raise ValueError(f"noise constants need r2 >= r1 > 0, got r1={self.r1}, r2={self.r2}")
        if self.B < 0 or self.B_V < 0:
            raise ValueError("noise constants B and B_V must be nonnegative")

    @property
    def B_m(self) -> float:
        return self.B_V + self.r2**2

    def with_(self, **changes) -> "HyperParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SwarmState:
    """Stacked agent parameters ``theta`` (row j is agent j) and momentum ``v``."""

    theta: np.ndarray
    v: np.ndarray = field(default=None)
    k: int = 0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2:
            raise ValueError("theta must have shape (n_agents, dim)")
        v = np.zeros_like(theta) if self.v is None else np.array(self.v, dtype=float)
        if v.shape != theta.shape:
            raise ValueError("momentum buffer shape must match theta")
        theta.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, n_agents: int, dim: int) -> "SwarmState":
        return cls(np.zeros((n_agents, dim)))


class AgentStreams:
    """Independent random generator per ``(agent, iteration)`` derived from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, agent: int, k: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, int(agent), int(k)]))


def _pi(pi) -> np.ndarray:
    return pi.pi if isinstance(pi, InteractionMatrix) else np.asarray(pi, dtype=float)


def mix(pi, x: np.ndarray, times: int = 1) -> np.ndarray:
    """Apply ``times`` consensus sweeps ``x <- Pi x`` across agents."""
    p = _pi(pi)
    for _ in range(times):
        x = p @ x
    return x


def local_gradients(
    objective: Objective,
    points: np.ndarray,
    hp: HyperParams,
    streams: AgentStreams | None,
    k: int,
    order=None,
    workers: int = 1,
):
    """Per-agent gradients at ``points`` (row j evaluated by agent j).

    Returns ``(grads, batches)``.  ``order`` only changes the evaluation order;
    results are merged by agent index, so it never changes the output.
    """
    n = objective.n_agents
    order = range(n) if order is None else list(order)
    full = hp.mode == "deterministic" or hp.batch_size is None

    def one(j):
        if full:
            idx = np.arange(objective.n_samples(j))
        else:
            if streams is None:
                raise ValueError("stochastic mode needs agent random streams")
            idx = objective.sample_batch(j, hp.batch_size, streams.generator(j, k))
        return j, objective.batch_grad(j, points[j], idx), idx

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, order))
    else:
        results = [one(j) for j in order]
    grads = np.empty_like(points, dtype=float)
    batches: list = [None] * n
    for j, g, idx in results:
        grads[j] = g
        batches[j] = idx
    return grads, batches


def _guard(theta: np.ndarray, grads: np.ndarray, k: int):
    if not np.all(np.isfinite(theta)) or np.linalg.norm(theta) > DIVERGENCE_NORM:
        gn = float(np.max(np.linalg.norm(grads, axis=1))) if np.all(np.isfinite(grads)) else float("inf")
        raise DivergenceError(k, theta, gn)


def advance(kind, state: SwarmState, pi, objective: Objective, hp: HyperParams, streams=None, workers: int = 1):
    """One synchronous round of ``kind``.  Returns ``(new_state, gradients_used)``."""
    kind = canonical_kind(kind)
    theta, v, k = state.theta, state.v, state.k
    alpha = hp.alpha
    new_v = v
    if kind == "sgd":
        g, _ = local_gradients(objective, theta, hp, streams, k, workers=workers)
        new_theta = theta - alpha * g
    elif kind in ("cdsgd", "icdsgd"):
        tau = 1 if kind == "cdsgd" else hp.tau
        g, _ = local_gradients(objective, theta, hp, streams, k, workers=workers)
        new_theta = mix(pi, theta, tau) - alpha * g
    elif kind == "gcdsgd":
        w = hp.omega
        g, _ = local_gradients(objective, theta, hp, streams, k, workers=workers)
        new_theta = (1.0 - w) * mix(pi, theta) + w * (theta - alpha * g)
    elif kind in ("cdmsgd", "icdmsgd"):
        tau = 1 if kind == "cdmsgd" else hp.tau
        g, _ = local_gradients(objective, theta, hp, streams, k, workers=workers)
        theta_hat = mix(pi, theta, tau)
        v_hat = mix(pi, v, tau)
        new_v = theta_hat - theta + hp.mu * v_hat - alpha * g
        new_theta = theta + new_v
    else:  # gcdmsgd
        w, mu = hp.omega, hp.mu
        g, _ = local_gradients(objective, theta + mu * v, hp, streams, k, workers=workers)
        theta_hat = mix(pi, theta)
        v_hat = mix(pi, v)
        new_v = (1.0 - w) * (theta_hat - theta + mu * v_hat) + w * mu * v - w * alpha * g
        new_theta = theta + new_v
    _guard(new_theta, g, k + 1)
    return SwarmState(new_theta, new_v, k + 1), g


def step(kind, state, pi, objective, hp, streams=None, workers: int = 1) -> SwarmState:
    return advance(kind, state, pi, objective, hp, streams, workers)[0]


def sgd_step(state, pi, objective, hp, streams=None):
    """Independent per-agent SGD: ``theta_j <- theta_j - alpha g_j(theta_j)``."""
    return step("sgd", state, pi, objective, hp, streams)


def cdsgd_step(state, pi, objective, hp, streams=None):
    """``theta_j <- sum_l pi_jl theta_l - alpha g_j(theta_j)``."""
    return step("cdsgd", state, pi, objective, hp, streams)


def icdsgd_step(state, pi, objective, hp, streams=None):
    """``tau`` consensus sweeps, then a gradient step evaluated at the pre-consensus iterate."""
    return step("icdsgd", state, pi, objective, hp, streams)


def gcdsgd_step(state, pi, objective, hp, streams=None):
    """``theta_j <- (1-w) sum_l pi_jl theta_l + w (theta_j - alpha g_j(theta_j))``."""
    return step("gcdsgd", state, pi, objective, hp, streams)


def cdmsgd_step(state, pi, objective, hp, streams=None):
    return step("cdmsgd", state, pi, objective, hp, streams)


def icdmsgd_step(state, pi, objective, hp, streams=None):
    """Momentum variant of i-CDSGD.

    Both the parameters and the momentum buffers go through ``tau`` consensus
    sweeps; then ``v <- theta_hat - theta + mu v_hat - alpha g(theta)`` and
    ``theta <- theta + v``.
    """
    return step("icdmsgd", state, pi, objective, hp, streams)


def gcdmsgd_step(state, pi, objective, hp, streams=None):
    """Momentum variant of g-CDSGD with the look-ahead gradient at ``theta + mu v``.

    ``v <- (1-w)(theta_hat - theta + mu v_hat) + w mu v - w alpha g(theta + mu v)``,
    then ``theta <- theta + v``.
    """
    return step("gcdmsgd", state, pi, objective, hp, streams)


def lyapunov_family(kind) -> str:
    """Which Lyapunov function tracks ``kind``: ``"g"`` (omega-weighted) or ``"i"`` (Pi^tau)."""
    kind = canonical_kind(kind)
    return "g" if kind in ("sgd", "gcdsgd", "gcdmsgd") else "i"


def effective_hp(kind, hp: HyperParams) -> HyperParams:
    """Hyperparameters as seen by the analysis (CDSGD is tau=1, SGD is omega=1)."""
    kind = canonical_kind(kind)
    if kind in ("cdsgd", "cdmsgd"):
        return hp.with_(tau=1)
    if kind == "sgd":
        return hp.with_(omega=1.0)
    return hp


def _lambdas(topology) -> tuple[float, float]:
    if isinstance(topology, InteractionMatrix):
        return topology.lambda2, topology.lambdaN
    lam2, lamN = topology
    return float(lam2), float(lamN)


def max_step_size(kind, topology, constants: ObjectiveConstants, hp: HyperParams) -> float:
    """Largest admissible step size for ``kind``.

    g-CDSGD: ``(r1 - (1-w)(1-lamN) B_m) / (w B_m gamma_m)``; with
    ``hp.lambda_n_power`` the ``lamN`` is raised to ``tau``.
    i-CDSGD (CDSGD is ``tau=1``): ``(r1 - (1-lamN^tau) B_m) / (gamma_m B_m)``.
    Momentum variants additionally require ``alpha <= 1/H_hat`` and
    ``alpha <= 1/(2 gamma_hat)``; since ``H_hat`` and ``gamma_hat`` depend on
    ``alpha`` these are solved as linear inequalities in ``alpha``.

    Raises
    ------
    NoAdmissibleStepSize
        When the bound is not positive.
    """
    kind = canonical_kind(kind)
    hp = effective_hp(kind, hp)
    lam2, lamN = _lambdas(topology)
    if constants.gamma_m is None:
        raise ValueError("step-size bound needs the smoothness constant gamma_m")
    gamma_m = constants.gamma_m
    r1, B_m, tau, w = hp.r1, hp.B_m, hp.tau, hp.omega
    family = lyapunov_family(kind)

    if family == "g":
        lam_pow = lamN**tau if hp.lambda_n_power else lamN
        bound = (r1 - (1.0 - w) * (1.0 - lam_pow) * B_m) / (w * B_m * gamma_m)
    else:
        bound = (r1 - (1.0 - lamN**tau) * B_m) / (gamma_m * B_m)

    if kind in MOMENTUM_KINDS:
        constants.require_strongly_convex()
        H_m = constants.H_m
        if family == "g":
            spread_2, spread_N, weight = (1.0 - w) * (1.0 - lam2), (1.0 - w) * (1.0 - lamN), w
        else:
            spread_2, spread_N, weight = 1.0 - lam2**tau, 1.0 - lamN**tau, 1.0
        # alpha * H_hat = weight*H_m*alpha + spread_2/2 <= 1
        inv_H = (1.0 - 0.5 * spread_2) / (weight * H_m)
        # 2 alpha * gamma_hat = 2 weight*gamma_m*alpha + 2 spread_N <= 1
        inv_2gamma = (1.0 - 2.0 * spread_N) / (2.0 * weight * gamma_m)
        bound = min(bound, inv_H, inv_2gamma)

    if not bound > 0:
        raise NoAdmissibleStepSize(kind, bound)
    return float(bound)
