"""Lyapunov functions, consensus/optimality bounds and reference oracles.

Two Lyapunov families are used:

* ``g`` (generalized consensus, weight ``omega``)::

      V(Theta) = omega F(Theta) + (1 - omega) / (2 alpha) * Theta' (I - P) Theta

* ``i`` (incremental consensus, ``tau`` sweeps)::

      V(Theta) = F(Theta) + 1 / (2 alpha) * Theta' (I - P^tau) Theta

where ``P`` applies the interaction matrix across agents.  A gradient step of
size ``alpha`` on ``V`` is exactly one g-CDSGD (respectively i-CDSGD) round.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from .algorithms import (
    AgentStreams,
    HyperParams,
    canonical_kind,
    display_name,
    effective_hp,
    lyapunov_family,
    mix,
    _lambdas,
    max_step_size,
    NoAdmissibleStepSize,
)
from .objectives import Objective, ObjectiveConstants, QuadraticObjective
from .topology import InteractionMatrix

__all__ = [
    "LyapunovSpec",
    "BoundReport",
    "OmegaThresholds",
    "ConvergenceConstants",
    "lyapunov_value",
    "lyapunov_gradient",
    "stochastic_lyapunov_gradient",
    "consensus_error",
    "consensus_bound",
    "convergence_constants",
    "optimality_radius",
    "nonconvex_stationarity_bound",
    "momentum_bound",
    "omega_thresholds",
    "omega_crossover_vs_icdsgd",
    "lyapunov_minimizer_oracle",
    "numerical_lyapunov_minimum",
    "collect_noise_samples",
    "empirical_noise_constants",
    "bound_report",
]

MIN_NOISE_DRAWS = 30


@dataclass(frozen=True)
class LyapunovSpec:
    """Which Lyapunov function to evaluate, with its curvature constants.

    ``H_hat`` and ``gamma_hat`` are ``None`` when the objective constants are
    unknown (e.g. nonconvex objectives).
    """

    family: str
    alpha: float
    pi: np.ndarray = field(repr=False)
    lambda2: float
    lambdaN: float
    omega: float = 1.0
    tau: int = 1
    H_hat: float | None = None
    gamma_hat: float | None = None

    @classmethod
    def generalized(cls, matrix: InteractionMatrix, alpha: float, omega: float, constants: ObjectiveConstants | None = None):
        if not 0.0 < omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {omega}")
        lam2, lamN = matrix.lambda2, matrix.lambdaN
        H_hat = gamma_hat = None
        if constants is not None and constants.H_m is not None:
            H_hat = omega * constants.H_m + (1.0 - omega) / (2.0 * alpha) * (1.0 - lam2)
        if constants is not None and constants.gamma_m is not None:
            gamma_hat = omega * constants.gamma_m + (1.0 - omega) / alpha * (1.0 - lamN)
        return cls("g", alpha, matrix.pi, lam2, lamN, omega=omega, tau=1, H_hat=H_hat, gamma_hat=gamma_hat)

    @classmethod
    def incremental(cls, matrix: InteractionMatrix, alpha: float, tau: int, constants: ObjectiveConstants | None = None):
        lam2, lamN = matrix.lambda2, matrix.lambdaN
        H_hat = gamma_hat = None
        if constants is not None and constants.H_m is not None:
            H_hat = constants.H_m + (1.0 - lam2**tau) / (2.0 * alpha)
        if constants is not None and constants.gamma_m is not None:
            gamma_hat = constants.gamma_m + (1.0 - lamN**tau) / alpha
        return cls("i", alpha, matrix.pi, lam2, lamN, omega=1.0, tau=int(tau), H_hat=H_hat, gamma_hat=gamma_hat)

    @classmethod
    def for_algorithm(cls, kind, matrix: InteractionMatrix, hp: HyperParams, constants=None):
        hp = effective_hp(kind, hp)
        if lyapunov_family(kind) == "g":
            return cls.generalized(matrix, hp.alpha, hp.omega, constants)
        return cls.incremental(matrix, hp.alpha, hp.tau, constants)

    @property
    def objective_weight(self) -> float:
        return self.omega if self.family == "g" else 1.0

    @property
    def penalty_weight(self) -> float:
        """Coefficient ``c`` in ``c/2 * Theta'(I - M)Theta``."""
        return (1.0 - self.omega) / self.alpha if self.family == "g" else 1.0 / self.alpha

    @property
    def sweeps(self) -> int:
        return 1 if self.family == "g" else self.tau

    def disagreement(self, theta: np.ndarray) -> np.ndarray:
        """``(I - M) Theta`` with ``M = Pi`` or ``Pi^tau`` applied per agent."""
        return theta - mix(self.pi, theta, self.sweeps)


def _check_dims(theta, spec: LyapunovSpec, objective: Objective | None):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != spec.pi.shape[0]:
        raise ValueError(f"state shape {theta.shape} does not match {spec.pi.shape[0]} agents")
    if objective is not None and (theta.shape[0] != objective.n_agents or theta.shape[1] != objective.dim):
        raise ValueError(f"state shape {theta.shape} does not match objective ({objective.n_agents}, {objective.dim})")
    return theta


def lyapunov_value(theta, spec: LyapunovSpec, objective: Objective) -> float:
    theta = _check_dims(theta, spec, objective)
    penalty = 0.5 * spec.penalty_weight * float(np.sum(theta * spec.disagreement(theta)))
    if spec.objective_weight == 0.0:
        return penalty
    return spec.objective_weight * objective.total_loss(theta) + penalty


def lyapunov_gradient(theta, spec: LyapunovSpec, objective: Objective) -> np.ndarray:
    theta = _check_dims(theta, spec, objective)
    return spec.objective_weight * objective.full_gradients(theta) + spec.penalty_weight * spec.disagreement(theta)


def stochastic_lyapunov_gradient(theta, spec: LyapunovSpec, objective: Objective, batches) -> np.ndarray:
    """Lyapunov gradient with agent ``j``'s loss gradient taken on ``batches[j]``
    (``None`` means full batch)."""
    theta = _check_dims(theta, spec, objective)
    g = np.empty_like(theta)
    for j in range(objective.n_agents):
        idx = np.arange(objective.n_samples(j)) if batches[j] is None else batches[j]
        g[j] = objective.batch_grad(j, theta[j], idx)
    return spec.objective_weight * g + spec.penalty_weight * spec.disagreement(theta)


def consensus_error(theta) -> float:
    """``max_j || theta_j - mean_l theta_l ||``."""
    theta = np.asarray(theta, dtype=float)
    return float(np.max(np.linalg.norm(theta - theta.mean(axis=0), axis=1)))


def consensus_bound(kind: str, topology, h: float, hp: HyperParams) -> float:
    """Closed-form bound on the expected consensus error.

    ``kind="g"``: ``omega alpha h / (1 - lambda2_hat)`` with
    ``lambda2_hat = (1-omega) lambda2 + omega``; infinite when ``omega = 1``.
    ``kind="i"``: ``alpha h / (1 - lambda2^tau)``.
    """
    lam2, _ = _lambdas(topology)
    if kind == "g":
        gap = 1.0 - ((1.0 - hp.omega) * lam2 + hp.omega)
        return math.inf if gap <= 0.0 else hp.omega * hp.alpha * h / gap
    if kind == "i":
        return hp.alpha * h / (1.0 - lam2**hp.tau)
    raise ValueError(f"consensus bound kind must be 'g' or 'i', got {kind!r}")


@dataclass(frozen=True)
class ConvergenceConstants:
    rate: float
    offset: float
    names: tuple[str, str]
    in_unit_interval: bool


def convergence_constants(kind: str, topology, constants: ObjectiveConstants, hp: HyperParams) -> ConvergenceConstants:
    """Linear-rate constants of the strongly convex optimality bound.

    ``g``: ``C1 = 1 - (w alpha H_m + (1-w)/2 (1-lam2)) r1`` and
    ``C2 = (alpha^2 gamma_m w + alpha (1-w)(1-lamN)) B / 2``.
    ``i``: ``C3 = 1 - (alpha H_m + (1-lam2^tau)/2) r1`` and
    ``C4 = (alpha^2 gamma_m + alpha (1-lamN^tau)) B / 2``.
    """
    constants.require_strongly_convex()
    lam2, lamN = _lambdas(topology)
    a, w, r1, B = hp.alpha, hp.omega, hp.r1, hp.B
    H, gam = constants.H_m, constants.gamma_m
    if kind == "g":
        rate = 1.0 - (w * a * H + 0.5 * (1.0 - w) * (1.0 - lam2)) * r1
        offset = (a * a * gam * w + a * (1.0 - w) * (1.0 - lamN)) * B / 2.0
        names = ("C1", "C2")
    elif kind == "i":
        t = hp.tau
        rate = 1.0 - (a * H + 0.5 * (1.0 - lam2**t)) * r1
        offset = (a * a * gam + a * (1.0 - lamN**t)) * B / 2.0
        names = ("C3", "C4")
    else:
        raise ValueError(f"kind must be 'g' or 'i', got {kind!r}")
    return ConvergenceConstants(rate, offset, names, 0.0 < rate < 1.0)


RADIUS_KINDS = ("g", "i", "g-momentum", "i-momentum", "nonconvex-g", "nonconvex-i")


def optimality_radius(kind: str, topology, constants: ObjectiveConstants, hp: HyperParams, G: float | None = None) -> float:
    """Asymptotic radius of the optimality bound.

    ``g``: ``B[w a gam + (1-w)(1-lamN)] / (2 r1 (w H + (1-w)(1-lam2)/a))``
    ``i``: ``B(a gam + 1 - lamN^tau) / (2 r1 (H + (1-lam2^tau)/a))``
    ``nonconvex-g``: ``(w gam a + (1-w)(1-lamN)) B / r1``
    ``nonconvex-i``: ``(gam a + 1 - lamN^tau) B / r1``
    ``g-momentum`` / ``i-momentum``: ``sqrt(a / H_hat) (B + B_V G^2)``
    """
    if kind not in RADIUS_KINDS:
        raise ValueError(f"unknown radius kind {kind!r}")
    lam2, lamN = _lambdas(topology)
    a, w, r1, B, t = hp.alpha, hp.omega, hp.r1, hp.B, hp.tau
    if constants.gamma_m is None:
        raise ValueError("optimality radius needs gamma_m")
    gam = constants.gamma_m
    if kind == "nonconvex-g":
        return (w * gam * a + (1.0 - w) * (1.0 - lamN)) * B / r1
    if kind == "nonconvex-i":
        return (gam * a + 1.0 - lamN**t) * B / r1
    constants.require_strongly_convex()
    H = constants.H_m
    if kind == "g":
        return B * (w * a * gam + (1.0 - w) * (1.0 - lamN)) / (2.0 * r1 * (w * H + (1.0 - w) * (1.0 - lam2) / a))
    if kind == "i":
        return B * (a * gam + 1.0 - lamN**t) / (2.0 * r1 * (H + (1.0 - lam2**t) / a))
    noise = B + hp.B_V * (G**2 if G is not None else 0.0)
    if hp.B_V > 0 and G is None:
        raise ValueError("momentum radius with B_V > 0 needs the gradient bound G")
    if noise == 0.0:
        return 0.0
    H_hat = _momentum_H_hat(kind, lam2, H, hp)
    return math.sqrt(a / H_hat) * noise


def _momentum_H_hat(kind, lam2, H, hp):
    if kind.startswith("g"):
        return hp.omega * H + (1.0 - hp.omega) / (2.0 * hp.alpha) * (1.0 - lam2)
    return H + (1.0 - lam2**hp.tau) / (2.0 * hp.alpha)


def nonconvex_stationarity_bound(kind: str, topology, constants, hp: HyperParams, V1: float, V_inf: float, K: int) -> float:
    """Bound on the running mean of ``||grad V||^2`` over ``K`` iterations:
    the nonconvex radius plus ``2 (V1 - V_inf) / (K r1 alpha)``."""
    radius = optimality_radius(f"nonconvex-{kind}", topology, constants, hp)
    return radius + 2.0 * (V1 - V_inf) / (K * hp.r1 * hp.alpha)


def momentum_bound(k: int, H_hat: float, alpha: float, V1: float, V_star: float, B: float = 0.0, B_V: float = 0.0, G: float = 0.0) -> float:
    """``(1 - sqrt(H_hat alpha))^(k-1) (phi_1* - V*) + sqrt(alpha/H_hat)(B + B_V G^2)``
    with ``phi_1* = V(Theta_1)``."""
    q = 1.0 - math.sqrt(H_hat * alpha)
    return q ** (k - 1) * (V1 - V_star) + math.sqrt(alpha / H_hat) * (B + B_V * G * G)


@dataclass(frozen=True)
class OmegaThresholds:
    lower_vs_icdsgd: float
    lower_vs_cdsgd: float
    consensus_upper: float
    A1: float
    A2: float
    valid: bool

    @property
    def lower(self) -> float:
        return max(self.lower_vs_cdsgd, self.lower_vs_icdsgd)


def omega_thresholds(topology, constants: ObjectiveConstants, alpha: float, tau: int) -> OmegaThresholds:
    """Thresholds on omega comparing g-CDSGD with i-CDSGD and CDSGD.

    With ``a = 1-lamN, b = 1-lam2, e = 1-lamN^tau, d = 1-lam2^tau``:

    * ``lower_vs_icdsgd = A1 / A2`` where
      ``A1 = 2 H a - b gam + (b e - d a)/alpha`` and
      ``A2 = 2 H (a + e) + (a d - b e)/alpha - gam (b + d)``; it is only
      meaningful (``valid``) when ``A1 > 0``, ``A2 > 0`` and ``A1 < A2``.
    * ``lower_vs_cdsgd = 1/2``.
    * ``consensus_upper = b / (b + d)``: below it g-CDSGD has the smaller
      consensus bound.
    """
    constants.require_strongly_convex()
    lam2, lamN = _lambdas(topology)
    H, gam = constants.H_m, constants.gamma_m
    a, b = 1.0 - lamN, 1.0 - lam2
    e, d = 1.0 - lamN**tau, 1.0 - lam2**tau
    A1 = 2.0 * H * a - b * gam + (b * e - d * a) / alpha
    A2 = 2.0 * H * (a + e) + (a * d - b * e) / alpha - gam * (b + d)
    valid = A1 > 0 and A2 > 0 and A1 < A2
    lower = A1 / A2 if A2 != 0 else math.nan
    return OmegaThresholds(lower, 0.5, b / (b + d), A1, A2, valid)


def omega_crossover_vs_icdsgd(topology, constants: ObjectiveConstants, alpha: float, tau: int) -> tuple[float, str]:
    """Direct solution of ``radius_g(omega) <= radius_i(tau)`` for omega.

    Both radii share ``B / (2 r1)``; cross-multiplying the remaining fractions
    gives a linear inequality ``omega * K <= R``.  Returns ``(threshold,
    direction)`` with direction ``">="`` or ``"<="`` (``"all"``/``"none"``
    when ``K == 0``).
    """
    constants.require_strongly_convex()
    lam2, lamN = _lambdas(topology)
    H, gam = constants.H_m, constants.gamma_m
    a, b = 1.0 - lamN, 1.0 - lam2
    e, d = 1.0 - lamN**tau, 1.0 - lam2**tau
    K = gam * (b + d) - H * (a + e) + (e * b - a * d) / alpha
    R = gam * b - a * H + (b * e - a * d) / alpha
    if K == 0:
        return math.nan, "all" if R >= 0 else "none"
    return R / K, "<=" if K > 0 else ">="


def lyapunov_minimizer_oracle(objective: QuadraticObjective, spec: LyapunovSpec):
    """Exact minimiser of the Lyapunov function for quadratic agents.

    Solves the dense ``(N d) x (N d)`` system
    ``w A_j theta_j + w b_j + c sum_l (I - M)_jl theta_l = 0``.
    Returns ``(theta_star, V_star)``.
    """
    if not isinstance(objective, QuadraticObjective):
        raise TypeError("the linear-system oracle only handles quadratic objectives")
    if spec.H_hat is not None and spec.H_hat <= 0:
        raise ValueError("Lyapunov function is not strongly convex (H_hat <= 0)")
    n, d = objective.n_agents, objective.dim
    w, c = spec.objective_weight, spec.penalty_weight
    M = np.linalg.matrix_power(spec.pi, spec.sweeps)
    system = c * np.kron(np.eye(n) - M, np.eye(d))
    for j in range(n):
        system[j * d : (j + 1) * d, j * d : (j + 1) * d] += w * objective.A[j]
    rhs = -w * np.concatenate(objective.b)
    try:
        sol = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Lyapunov stationarity system is singular") from exc
    theta_star = sol.reshape(n, d)
    return theta_star, lyapunov_value(theta_star, spec, objective)


def numerical_lyapunov_minimum(objective: Objective, spec: LyapunovSpec, theta0=None, tol: float = 1e-10, max_iter: int = 20000):
    """Minimise the Lyapunov function with L-BFGS for objectives without a closed form.

    Returns ``(theta_star, V_star, grad_norm)``.
    """
    n, d = objective.n_agents, objective.dim
    x0 = np.zeros(n * d) if theta0 is None else np.asarray(theta0, dtype=float).ravel()

    def fun(x):
        theta = x.reshape(n, d)
        return lyapunov_value(theta, spec, objective), lyapunov_gradient(theta, spec, objective).ravel()

    x, gnorm = x0, np.inf
    # Restarts discard stale curvature pairs, which lets L-BFGS get past late stalls.
    for _ in range(5):
        res = minimize(fun, x, jac=True, method="L-BFGS-B", options={"gtol": tol, "ftol": 0.0, "maxiter": max_iter, "maxcor": 30})
        x = res.x
        gnorm = float(np.linalg.norm(res.jac))
        if gnorm <= tol:
            break
    theta = x.reshape(n, d)
    gnorm = float(np.linalg.norm(lyapunov_gradient(theta, spec, objective)))
    return theta, lyapunov_value(theta, spec, objective), gnorm


def collect_noise_samples(objective: Objective, spec: LyapunovSpec, thetas, batch_size: int, n_draws: int = MIN_NOISE_DRAWS, seed: int = 0):
    """Repeated stochastic Lyapunov gradients at each iterate in ``thetas``.

    Returns a list of ``(grad_V, draws)`` with ``draws`` of shape ``(n_draws, N, d)``.
    """
    streams = AgentStreams(seed)
    out = []
    for k, theta in enumerate(thetas):
        theta = np.asarray(theta, dtype=float)
        draws = []
        for s in range(n_draws):
            batches = [objective.sample_batch(j, batch_size, streams.generator(j, k * n_draws + s)) for j in range(objective.n_agents)]
            draws.append(stochastic_lyapunov_gradient(theta, spec, objective, batches))
        out.append((lyapunov_gradient(theta, spec, objective), np.stack(draws)))
    return out


def empirical_noise_constants(samples) -> tuple[float, float, float, float]:
    """Estimate ``(B, B_V, r1, r2)`` from repeated stochastic gradients.

    ``samples`` is a list of ``(grad_V, draws)``.  The per-iterate variance
    ``E||S||^2 - ||E S||^2`` is regressed on ``||grad V||^2`` with a
    nonnegative least-squares fit; ``r1`` and ``r2`` are the extreme observed
    ratios ``grad_V' mean(S) / ||grad_V||^2`` and ``||mean(S)|| / ||grad_V||``.
    These are estimates, not certified constants.
    """
    rows, variances, ratios1, ratios2 = [], [], [], []
    for grad_v, draws in samples:
        draws = np.asarray(draws, dtype=float)
        if draws.shape[0] < MIN_NOISE_DRAWS:
            raise ValueError(f"need at least {MIN_NOISE_DRAWS} draws per iterate, got {draws.shape[0]}")
        mean = draws.mean(axis=0)
        var = float(np.sum((draws - mean) ** 2) / (draws.shape[0] - 1))
        gsq = float(np.sum(grad_v * grad_v))
        rows.append([1.0, gsq])
        variances.append(var)
        if gsq > 0:
            ratios1.append(float(np.sum(grad_v * mean)) / gsq)
            ratios2.append(float(np.linalg.norm(mean)) / math.sqrt(gsq))
    if not rows:
        raise ValueError("no samples")
    variances = np.asarray(variances)
    if np.all(variances == 0.0):
        B, B_V = 0.0, 0.0
    else:
        (B, B_V), _ = nnls(np.asarray(rows), variances)
    r1 = min(ratios1) if ratios1 else 1.0
    r2 = max(ratios2) if ratios2 else 1.0
    return float(B), float(B_V), float(r1), float(r2)


@dataclass
class BoundReport:
    """Every closed-form quantity for one configuration.

    ``provenance`` maps each field to the formula it was evaluated from;
    ``flags`` records quantities that are infinite, undefined, or whose
    contraction constant falls outside (0, 1).
    """

    algorithm: str
    consensus_bound: float | None
    optimality_radius: float | None
    C1: float | None
    C2: float | None
    C3: float | None
    C4: float | None
    momentum_radius: float | None
    admissible_alpha_max: float | None
    h: float | None = None
    G: float | None = None
    lambda2: float | None = None
    lambdaN: float | None = None
    provenance: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, float) and math.isinf(val):
                out[key] = "inf"
        out["table"] = [{k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in row.items()} for row in self.table]
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)

    def render_table(self) -> str:
        header = ("Method", "f", "Con.Bou.", "Opt.Bou.", "Rate")
        marked = [r.get("alpha_admissible") is False for r in self.table]
        lines = [header] + [
            (r["method"] + (" *" if m else ""), r["f"], _fmt(r["consensus_bound"]), _fmt(r["optimality_bound"]), _fmt(r["rate"]))
            for r, m in zip(self.table, marked)
        ]
        widths = [max(len(str(row[i])) for row in lines) for i in range(len(header))]
        rule = "-+-".join("-" * w for w in widths)
        rendered = [" | ".join(str(c).ljust(w) for c, w in zip(row, widths)) for row in lines]
        footer = ["* alpha exceeds this method's admissible step size"] if any(marked) else []
        return "\n".join([rendered[0], rule] + rendered[1:] + footer)


def _fmt(x) -> str:
    if x is None:
        return "N/A"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.4g}"


PROVENANCE = {
    "consensus_bound_g": "omega*alpha*h / (1 - lambda2_hat), lambda2_hat = (1-omega)*lambda2 + omega",
    "consensus_bound_i": "alpha*h / (1 - lambda2**tau)",
    "C1": "1 - (omega*alpha*H_m + (1-omega)/2*(1-lambda2))*r1",
    "C2": "(alpha**2*gamma_m*omega + alpha*(1-omega)*(1-lambdaN))*B/2",
    "C3": "1 - (alpha*H_m + (1-lambda2**tau)/2)*r1",
    "C4": "(alpha**2*gamma_m + alpha*(1-lambdaN**tau))*B/2",
    "radius_g": "B*(omega*alpha*gamma_m + (1-omega)*(1-lambdaN)) / (2*r1*(omega*H_m + (1-omega)*(1-lambda2)/alpha))",
    "radius_i": "B*(alpha*gamma_m + 1 - lambdaN**tau) / (2*r1*(H_m + (1-lambda2**tau)/alpha))",
    "radius_nonconvex_g": "(omega*gamma_m*alpha + (1-omega)*(1-lambdaN))*B / r1",
    "radius_nonconvex_i": "(gamma_m*alpha + 1 - lambdaN**tau)*B / r1",
    "momentum_radius": "sqrt(alpha/H_hat)*(B + B_V*G**2)",
    "alpha_max_g": "(r1 - (1-omega)*(1-lambdaN)*B_m) / (omega*B_m*gamma_m), B_m = B_V + r2**2",
    "alpha_max_i": "(r1 - (1-lambdaN**tau)*B_m) / (gamma_m*B_m), B_m = B_V + r2**2",
    "alpha_max_momentum": "min(alpha_max, 1/H_hat, 1/(2*gamma_hat))",
}


def bound_report(kind, matrix: InteractionMatrix, constants: ObjectiveConstants, hp: HyperParams, G: float | None = None) -> BoundReport:
    """Evaluate all bounds for algorithm ``kind`` under ``hp``.

    Strongly convex quantities are left as ``None`` (and flagged) when the
    objective is nonconvex.
    """
    kind = canonical_kind(kind)
    ehp = effective_hp(kind, hp)
    family = lyapunov_family(kind)
    flags, prov = [], {}
    convex = constants.H_m is not None and constants.gamma_m is not None
    h = constants.h

    cons = None
    if h is not None:
        cons = consensus_bound(family, matrix, h, ehp)
        prov["consensus_bound"] = PROVENANCE[f"consensus_bound_{family}"]
        if math.isinf(cons):
            flags.append("consensus_bound: infinite (omega = 1 gives no consensus guarantee)")
    else:
        flags.append("consensus_bound: needs trajectory-local h")

    C = {"C1": None, "C2": None, "C3": None, "C4": None}
    radius = momentum_radius = None
    if convex:
        g_hp = ehp.with_(omega=hp.omega if family == "g" else ehp.omega)
        for fam, hps in (("g", g_hp), ("i", ehp.with_(tau=ehp.tau))):
            cc = convergence_constants(fam, matrix, constants, hps)
            C[cc.names[0]], C[cc.names[1]] = cc.rate, cc.offset
            prov[cc.names[0]], prov[cc.names[1]] = PROVENANCE[cc.names[0]], PROVENANCE[cc.names[1]]
            if not cc.in_unit_interval:
                flags.append(f"{cc.names[0]} = {cc.rate:.6g} lies outside (0, 1)")
        radius = optimality_radius(family, matrix, constants, ehp)
        prov["optimality_radius"] = PROVENANCE[f"radius_{family}"]
        if kind in ("cdmsgd", "icdmsgd", "gcdmsgd"):
            try:
                momentum_radius = optimality_radius(f"{family}-momentum", matrix, constants, ehp, G)
                prov["momentum_radius"] = PROVENANCE["momentum_radius"]
            except ValueError as exc:
                flags.append(f"momentum_radius: {exc}")
    else:
        flags.append("strongly convex constants undefined for this objective")
        if constants.gamma_m is not None:
            radius = optimality_radius(f"nonconvex-{family}", matrix, constants, ehp)
            prov["optimality_radius"] = PROVENANCE[f"radius_nonconvex_{family}"]

    alpha_max = None
    if constants.gamma_m is not None:
        try:
            alpha_max = max_step_size(kind, matrix, constants, hp)
            prov["admissible_alpha_max"] = PROVENANCE["alpha_max_momentum" if kind.endswith("msgd") else f"alpha_max_{family}"]
            if hp.alpha > alpha_max:
                flags.append(f"alpha = {hp.alpha:.6g} exceeds the admissible bound {alpha_max:.6g}")
        except NoAdmissibleStepSize as exc:
            flags.append(str(exc))
        except ValueError as exc:
            flags.append(f"admissible_alpha_max: {exc}")

    report = BoundReport(
        algorithm=display_name(kind),
        consensus_bound=cons,
        optimality_radius=radius,
        momentum_radius=momentum_radius,
        admissible_alpha_max=alpha_max,
        h=h,
        G=G,
        lambda2=matrix.lambda2,
        lambdaN=matrix.lambdaN,
        provenance=prov,
        flags=flags,
        **C,
    )
    report.table = _comparison_rows(matrix, constants, hp)
    return report


def _comparison_rows(matrix, constants, hp):
    """Numeric counterpart of the method-comparison table for CDSGD, i-CDSGD, g-CDSGD."""
    rows = []
    h = constants.h
    convex = constants.H_m is not None and constants.gamma_m is not None
    for name, kind, fam, hps in (
        ("CDSGD", "cdsgd", "i", hp.with_(tau=1)),
        (f"i-CDSGD (tau={hp.tau})", "icdsgd", "i", hp),
        (f"g-CDSGD (omega={hp.omega:g})", "gcdsgd", "g", hp),
    ):
        admissible = None
        if constants.gamma_m is not None:
            try:
                admissible = hps.alpha <= max_step_size(kind, matrix, constants, hps)
            except NoAdmissibleStepSize:
                admissible = False
        cons = consensus_bound(fam, matrix, h, hps) if h is not None else None
        if convex:
            rate = convergence_constants(fam, matrix, constants, hps).rate
            opt = optimality_radius(fam, matrix, constants, hps)
            rows.append({"method": name, "f": "Str-con", "consensus_bound": cons, "optimality_bound": opt, "rate": rate, "alpha_admissible": admissible})
        if constants.gamma_m is not None:
            opt_nc = optimality_radius(f"nonconvex-{fam}", matrix, constants, hps)
            rows.append({"method": name, "f": "Nonconvex", "consensus_bound": cons, "optimality_bound": opt_nc, "rate": None, "alpha_admissible": admissible})
    return rows
