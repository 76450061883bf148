"""Experiment configuration, trajectory recording, comparisons and exports.

A run is fully described by a :class:`RunConfig` (loadable from YAML).  The
same config and seed always produce byte-identical ``metrics.csv`` files,
whatever the number of worker threads.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .algorithms import (
    ALGORITHMS,
    AgentStreams,
    DivergenceError,
    HyperParams,
    NoAdmissibleStepSize,
    SwarmState,
    advance,
    canonical_kind,
    display_name,
    local_gradients,
    lyapunov_family,
    max_step_size,
)
from .analysis import (
    BoundReport,
    LyapunovSpec,
    bound_report,
    consensus_bound,
    consensus_error,
    lyapunov_gradient,
    lyapunov_minimizer_oracle,
    lyapunov_value,
    numerical_lyapunov_minimum,
    optimality_radius,
)
from .datasets import Dataset, load_idx_pair, synthetic_classification
from .objectives import (
    H_MARGIN,
    LogisticObjective,
    MLPObjective,
    Objective,
    ObjectiveConstants,
    QuadraticObjective,
    random_quadratic_objective,
)
from .partition import PartitionPlan, make_partition
from .topology import InteractionMatrix, build_graph, make_interaction_matrix, read_edge_list

__all__ = [
    "ConfigError",
    "RunDivergedError",
    "TopologyConfig",
    "ObjectiveConfig",
    "PartitionConfig",
    "AlgorithmConfig",
    "RunSettings",
    "RunConfig",
    "Experiment",
    "DegreeOfConsensus",
    "RunRecord",
    "build_experiment",
    "run",
    "run_replicas",
    "compare",
    "sweep",
    "bounds",
    "write_outputs",
    "degree_of_consensus",
    "METRIC_COLUMNS",
]

METRIC_COLUMNS = ("k", "V", "F", "consensus_error", "max_grad_norm", "lyap_grad_norm")
CHECKPOINT_EVERY = 50
MAX_WINDOW = 100
WINDOW_FRACTION = 0.2


class ConfigError(ValueError):
    """The run configuration is invalid; raised before any computation."""


class RunDivergedError(RuntimeError):
    """A trajectory blew up; ``record`` holds every row recorded before that."""

    def __init__(self, record: "RunRecord", cause: DivergenceError):
        super().__init__(f"run diverged at iteration {cause.iteration}")
        self.record = record
        self.cause = cause


# --------------------------------------------------------------------------- config


def _from_mapping(cls, data, section):
    data = {} if data is None else dict(data)
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {sorted(unknown)}")
    return cls(**data)


@dataclass
class TopologyConfig:
    """``kind`` is ring/complete/star/custom; ``weights`` names the matrix scheme."""

    kind: str = "ring"
    n_agents: int = 5
    weights: str = "metropolis"
    laziness: float = 0.5
    edges: list | None = None
    edge_file: str | None = None


@dataclass
class ObjectiveConfig:
    """Objective family and its data source.

    ``quadratic`` uses ``dim``, ``eig_range``, ``n_terms`` and ``offset_scale``.
    ``logistic``/``mlp`` read ``data`` (``source: synthetic`` with generator
    keys, or ``source: idx`` with ``images``/``labels`` paths).
    """

    kind: str = "logistic"
    rho: float | None = None
    hidden: int = 8
    fit_intercept: bool = True
    dim: int = 2
    eig_range: list = field(default_factory=lambda: [1.0, 10.0])
    n_terms: int = 1
    offset_scale: float = 1.0
    seed: int = 0
    data: dict = field(default_factory=dict)


@dataclass
class PartitionConfig:
    scheme: str = "balanced"
    fraction: float = 0.2
    concentration: float = 1.0
    seed: int | None = None


@dataclass
class AlgorithmConfig:
    """``alpha`` may be ``"max"`` (largest admissible step) and ``mu`` may be
    ``"nesterov"`` (``(1 - sqrt(H_hat alpha)) / (1 + sqrt(H_hat alpha))``)."""

    kind: str = "gcdsgd"
    alpha: float | str = 0.01
    omega: float = 1.0
    tau: int = 1
    mu: float | str = 0.0
    batch_size: int | None = None
    mode: str = "stochastic"
    r1: float = 1.0
    r2: float = 1.0
    B: float = 0.0
    B_V: float = 0.0
    lambda_n_power: bool = False


@dataclass
class RunSettings:
    iterations: int = 100
    seed: int = 0
    replicas: int = 1
    record_every: int = 1
    checkpoint_every: int = CHECKPOINT_EVERY
    init: str = "zeros"
    init_scale: float = 0.1
    metric: str = "auto"
    out_dir: str | None = None
    workers: int = 1


_SECTIONS = {
    "topology": TopologyConfig,
    "objective": ObjectiveConfig,
    "partition": PartitionConfig,
    "algorithm": AlgorithmConfig,
    "run": RunSettings,
}

# Settings that never change results and are left out of the config hash.
_HASH_EXCLUDED = {("run", "out_dir"), ("run", "workers")}


@dataclass
class RunConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    run: RunSettings = field(default_factory=RunSettings)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = {} if data is None else dict(data)
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        return cls(**{name: _from_mapping(kls, data.get(name), name) for name, kls in _SECTIONS.items()})

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        try:
            data = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_overrides(self, overrides=None, **sections) -> "RunConfig":
        """Copy with ``"section.key=value"`` strings (YAML-parsed values) or
        ``section={key: value}`` keyword dictionaries applied."""
        data = self.to_dict()
        for item in overrides or ():
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            path, raw = item.split("=", 1)
            section, key = path.split(".", 1)
            data.setdefault(section, {})[key] = yaml.safe_load(raw)
        for section, values in sections.items():
            data.setdefault(section, {}).update(values)
        return RunConfig.from_dict(data)

    def config_hash(self) -> str:
        data = self.to_dict()
        for section, key in _HASH_EXCLUDED:
            data[section].pop(key, None)
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# --------------------------------------------------------------------------- building


@dataclass
class Experiment:
    """Everything a run needs, validated and built from a :class:`RunConfig`."""

    config: RunConfig
    matrix: InteractionMatrix
    objective: Objective
    hp: HyperParams
    kind: str
    constants: ObjectiveConstants
    plan: PartitionPlan | None = None
    dataset: Dataset | None = None
    test_X: list | None = None

    @property
    def spec(self) -> LyapunovSpec:
        return LyapunovSpec.for_algorithm(self.kind, self.matrix, self.hp, _maybe_convex(self.constants))


def _maybe_convex(constants):
    return constants if constants.H_m is not None else None


def _build_matrix(cfg: TopologyConfig) -> InteractionMatrix:
    if cfg.edge_file is not None:
        graph = read_edge_list(cfg.edge_file)
    else:
        graph = build_graph(cfg.kind, cfg.n_agents, cfg.edges)
    return make_interaction_matrix(graph, cfg.weights, cfg.laziness)


def _load_dataset(cfg: ObjectiveConfig, seed: int) -> Dataset:
    data = dict(cfg.data)
    source = data.pop("source", "synthetic")
    if source == "synthetic":
        allowed = {"n_samples", "n_features", "class_sep", "flip_y", "test_fraction", "seed"}
        bad = set(data) - allowed
        if bad:
            raise ConfigError(f"[objective.data] unknown synthetic key(s): {sorted(bad)}")
        data.setdefault("seed", seed)
        return synthetic_classification(n_classes=2, **data)
    if source == "idx":
        try:
            images, labels = data.pop("images"), data.pop("labels")
        except KeyError as exc:
            raise ConfigError("[objective.data] idx source needs 'images' and 'labels'") from exc
        classes = data.pop("classes", None)
        if classes is None or len(classes) != 2:
            raise ConfigError("[objective.data] idx source needs exactly two 'classes' for a binary task")
        ds = load_idx_pair(images, labels, classes=classes, seed=data.pop("seed", seed), **data)
        remap = lambda y: (y == classes[1]).astype(int)  # noqa: E731
        return Dataset(ds.X_train, remap(ds.y_train), ds.X_test, remap(ds.y_test))
    raise ConfigError(f"[objective.data] unknown source {source!r}")


def _with_intercept(X, fit_intercept):
    return np.hstack([X, np.ones((len(X), 1))]) if fit_intercept else X


def _resolve_hp(kind, cfg: AlgorithmConfig, matrix, constants) -> HyperParams:
    base = dict(
        omega=cfg.omega, tau=cfg.tau, batch_size=cfg.batch_size, r1=cfg.r1, r2=cfg.r2,
        B=cfg.B, B_V=cfg.B_V, mode=cfg.mode, lambda_n_power=cfg.lambda_n_power,
    )
    alpha = cfg.alpha
    try:
        if isinstance(alpha, str):
            if alpha != "max":
                raise ConfigError(f"[algorithm] alpha must be a number or 'max', got {alpha!r}")
            if constants.gamma_m is None:
                raise ConfigError("[algorithm] alpha: max needs an analytic smoothness constant")
            alpha = max_step_size(kind, matrix, constants, HyperParams(alpha=1.0, mu=0.0, **base))
        hp = HyperParams(alpha=float(alpha), mu=0.0, **base)
        mu = cfg.mu
        if isinstance(mu, str):
            if mu != "nesterov":
                raise ConfigError(f"[algorithm] mu must be a number or 'nesterov', got {mu!r}")
            if constants.H_m is None:
                raise ConfigError("[algorithm] mu: nesterov needs strongly convex constants")
            spec = LyapunovSpec.for_algorithm(kind, matrix, hp, constants)
            q = math.sqrt(min(1.0, spec.H_hat * hp.alpha))
            mu = (1.0 - q) / (1.0 + q)
        return hp.with_(mu=float(mu))
    except NoAdmissibleStepSize as exc:
        raise ConfigError(f"[algorithm] {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[algorithm] {exc}") from exc


def build_experiment(config: RunConfig) -> Experiment:
    """Validate every section and build the topology, data split and objective."""
    try:
        kind = canonical_kind(config.algorithm.kind)
    except ValueError as exc:
        raise ConfigError(f"[algorithm] {exc}") from exc
    rs = config.run
    if rs.iterations < 0 or rs.record_every < 1 or rs.checkpoint_every < 1 or rs.replicas < 1 or rs.workers < 1:
        raise ConfigError("[run] iterations must be >= 0; record_every, checkpoint_every, replicas and workers >= 1")
    if rs.init not in ("zeros", "gaussian"):
        raise ConfigError(f"[run] init must be 'zeros' or 'gaussian', got {rs.init!r}")
    if rs.metric not in ("auto", "test_accuracy", "train_accuracy", "loss"):
        raise ConfigError(f"[run] unknown metric {rs.metric!r}")
    if config.objective.kind == "mlp" and rs.init == "zeros":
        raise ConfigError("[run] init: zeros leaves every MLP hidden unit identical; use init: gaussian")
    try:
        matrix = _build_matrix(config.topology)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[topology] {exc}") from exc
    n = matrix.n_agents

    oc = config.objective
    plan = dataset = test_X = None
    try:
        if oc.kind == "quadratic":
            objective = random_quadratic_objective(
                n, oc.dim, eig_range=tuple(oc.eig_range), n_terms=oc.n_terms, offset_scale=oc.offset_scale, seed=oc.seed
            )
        elif oc.kind in ("logistic", "mlp"):
            dataset = _load_dataset(oc, oc.seed)
            pc = config.partition
            pseed = rs.seed if pc.seed is None else pc.seed
            plan = make_partition(
                len(dataset.y_train), n, pc.scheme, pseed, labels=dataset.y_train,
                fraction=pc.fraction, concentration=pc.concentration,
            )
            Xtr = dataset.X_train
            if oc.kind == "logistic":
                Xtr = _with_intercept(Xtr, oc.fit_intercept)
                test_X = _with_intercept(dataset.X_test, oc.fit_intercept)
            else:
                test_X = dataset.X_test
            Xs = [Xtr[plan.indices(j)] for j in range(n)]
            ys = [dataset.y_train[plan.indices(j)] for j in range(n)]
            if oc.kind == "logistic":
                objective = LogisticObjective(Xs, ys, rho=1e-2 if oc.rho is None else oc.rho)
            else:
                objective = MLPObjective(Xs, ys, hidden=oc.hidden, rho=1e-4 if oc.rho is None else oc.rho)
        else:
            raise ConfigError(f"[objective] unknown kind {oc.kind!r}")
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"[objective/partition] {exc}") from exc

    ac = config.algorithm
    if ac.batch_size is not None and ac.mode == "stochastic":
        smallest = min(objective.n_samples(j) for j in range(n))
        if not 1 <= ac.batch_size <= smallest:
            raise ConfigError(f"[algorithm] batch_size {ac.batch_size} outside [1, {smallest}] (smallest agent shard)")
    constants = objective.constants()
    hp = _resolve_hp(kind, ac, matrix, constants)
    return Experiment(config, matrix, objective, hp, kind, constants, plan, dataset, test_X)


# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class DegreeOfConsensus:
    """Best and worst per-agent metric over the trailing window and their gap."""

    best_agent_metric: float
    worst_agent_metric: float
    gap: float
    window: int
    metric: str
    window_std: float

    def __post_init__(self):
        if self.gap < 0:
            raise ValueError("degree-of-consensus gap must be nonnegative")


def degree_of_consensus(agent_metric: np.ndarray, metric: str, higher_is_better: bool = True, window: int | None = None) -> DegreeOfConsensus:
    """Gap between the best and worst agent, each averaged over the last ``window`` rows.

    The default window is ``min(100, 20% of the recorded rows)`` (at least one).
    ``window_std`` is the mean over agents of each agent's metric standard
    deviation in that window.
    """
    agent_metric = np.asarray(agent_metric, dtype=float)
    rows = agent_metric.shape[0]
    if window is None:
        window = max(1, min(MAX_WINDOW, int(WINDOW_FRACTION * rows)))
    tail = agent_metric[-window:]
    means = tail.mean(axis=0)
    best, worst = (means.max(), means.min()) if higher_is_better else (means.min(), means.max())
    return DegreeOfConsensus(float(best), float(worst), float(abs(best - worst)), int(window), metric, float(tail.std(axis=0).mean()))


@dataclass
class RunRecord:
    """Recorded trajectory of one run.

    ``rows`` has one entry per recorded iteration with the values named in
    :data:`METRIC_COLUMNS`; ``agent_metric`` holds the per-agent metric at the
    same iterations.
    """

    config: RunConfig
    config_hash: str
    kind: str
    rows: list
    agent_metric: np.ndarray
    metric_name: str
    checkpoints: dict
    final_state: SwarmState
    final_agent_loss: list
    final_agent_accuracy: list | None
    h_empirical: float
    G_empirical: float
    wall_clock: float
    status: str = "completed"
    error: str | None = None
    hp: HyperParams | None = None

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=int)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[METRIC_COLUMNS.index(name)] for r in self.rows], dtype=float)

    @property
    def degree_of_consensus(self) -> DegreeOfConsensus:
        higher = self.metric_name != "loss"
        return degree_of_consensus(self.agent_metric, self.metric_name, higher)

    def metrics_csv(self) -> str:
        lines = [",".join(METRIC_COLUMNS)]
        for row in self.rows:
            lines.append(",".join([str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]]))
        return "\n".join(lines) + "\n"


def _metric_name(exp: Experiment) -> str:
    metric = exp.config.run.metric
    if metric == "auto":
        return "loss" if exp.dataset is None else "test_accuracy"
    if metric != "loss" and exp.dataset is None:
        raise ConfigError(f"[run] metric {metric!r} needs a labelled dataset")
    return metric


def _agent_metric(exp: Experiment, theta: np.ndarray, metric: str) -> np.ndarray:
    obj = exp.objective
    if metric == "loss":
        return np.array([obj.eval(j, theta[j]) for j in range(obj.n_agents)])
    if metric == "test_accuracy":
        return np.array([obj.accuracy(theta[j], exp.test_X, exp.dataset.y_test) for j in range(obj.n_agents)])
    return np.array([obj.accuracy(theta[j], obj.Xs[j], obj.ys[j]) for j in range(obj.n_agents)])


def _initial_state(exp: Experiment, seed: int) -> SwarmState:
    n, d = exp.objective.n_agents, exp.objective.dim
    if exp.config.run.init == "zeros":
        return SwarmState.zeros(n, d)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A17]))
    return SwarmState(exp.config.run.init_scale * rng.standard_normal((n, d)))


def _gradient_point(kind, state: SwarmState, hp: HyperParams):
    return state.theta + hp.mu * state.v if kind == "gcdmsgd" else state.theta


def run(config: RunConfig | Experiment, seed: int | None = None) -> RunRecord:
    """Simulate one trajectory.

    Raises
    ------
    ConfigError
        Before any computation when the config is invalid.
    RunDivergedError
        On divergence; its ``record`` carries the rows recorded so far.
    """
    exp = config if isinstance(config, Experiment) else build_experiment(config)
    cfg = exp.config
    seed = cfg.run.seed if seed is None else int(seed)
    kind, hp, obj, matrix = exp.kind, exp.hp, exp.objective, exp.matrix
    spec = LyapunovSpec.for_algorithm(kind, matrix, hp)
    streams = AgentStreams(seed)
    metric = _metric_name(exp)
    workers = cfg.run.workers
    record_every, ck_every = cfg.run.record_every, cfg.run.checkpoint_every
    m = cfg.run.iterations

    state = _initial_state(exp, seed)
    rows, agent_rows, checkpoints = [], [], {}
    h_obs = G_obs = 0.0
    start = time.perf_counter()
    error = None

    def record(state, g):
        theta = state.theta
        grad_v = lyapunov_gradient(theta, spec, obj)
        rows.append(
            (
                state.k,
                lyapunov_value(theta, spec, obj),
                obj.total_loss(theta),
                consensus_error(theta),
                float(np.max(np.linalg.norm(g, axis=1))),
                float(np.linalg.norm(grad_v)),
            )
        )
        agent_rows.append(_agent_metric(exp, theta, metric))

    for k in range(m + 1):
        if k % ck_every == 0 or k == m:
            checkpoints[k] = (state.theta.copy(), state.v.copy())
        if k == m:
            g, _ = local_gradients(obj, _gradient_point(kind, state, hp), hp, streams, k, workers=workers)
            new_state = None
        else:
            try:
                new_state, g = advance(kind, state, matrix, obj, hp, streams, workers)
            except DivergenceError as exc:
                error = exc
                g, _ = local_gradients(obj, _gradient_point(kind, state, hp), hp, streams, k, workers=workers)
        h_obs = max(h_obs, float(np.max(np.linalg.norm(g, axis=1))))
        if k % record_every == 0 or k == m or error is not None:
            record(state, g)
            G_obs = max(G_obs, rows[-1][5])
        if error is not None or new_state is None:
            break
        state = new_state

    final_loss = [obj.eval(j, state.theta[j]) for j in range(obj.n_agents)]
    final_acc = None
    if exp.dataset is not None:
        final_acc = list(_agent_metric(exp, state.theta, "test_accuracy"))
    rec = RunRecord(
        config=cfg,
        config_hash=cfg.config_hash(),
        kind=kind,
        rows=rows,
        agent_metric=np.array(agent_rows),
        metric_name=metric,
        checkpoints=checkpoints,
        final_state=state,
        final_agent_loss=final_loss,
        final_agent_accuracy=final_acc,
        h_empirical=H_MARGIN * h_obs,
        G_empirical=H_MARGIN * G_obs,
        wall_clock=time.perf_counter() - start,
        status="diverged" if error is not None else "completed",
        error=None if error is None else str(error),
        hp=hp,
    )
    if error is not None:
        raise RunDivergedError(rec, error)
    return rec


def replica_seeds(master_seed: int, count: int) -> list[int]:
    """Independent per-replica seeds derived from the master seed."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(count)]


def _run_seed(args):
    config, seed = args
    return run(config, seed)


def run_replicas(config: RunConfig, count: int | None = None, processes: int = 1) -> list[RunRecord]:
    """Run ``count`` (default ``config.run.replicas``) seeded replicas, optionally in parallel processes."""
    count = config.run.replicas if count is None else count
    build_experiment(config)
    jobs = [(config, s) for s in replica_seeds(config.run.seed, count)]
    if processes > 1:
        with ProcessPoolExecutor(max_workers=processes) as pool:
            return list(pool.map(_run_seed, jobs))
    return [_run_seed(j) for j in jobs]


# --------------------------------------------------------------------------- reference values


def reference_minimum(exp: Experiment):
    """``(V*, label)`` for the run's Lyapunov function, or ``(None, reason)``."""
    if exp.constants.H_m is None:
        return None, "undefined for nonconvex objectives"
    spec = LyapunovSpec.for_algorithm(exp.kind, exp.matrix, exp.hp, exp.constants)
    if isinstance(exp.objective, QuadraticObjective):
        return lyapunov_minimizer_oracle(exp.objective, spec)[1], "exact V* (linear solve)"
    _, v_star, gnorm = numerical_lyapunov_minimum(exp.objective, spec)
    return v_star, f"numerical V* (L-BFGS, final gradient norm {gnorm:.2e})"


# --------------------------------------------------------------------------- bounds


def bounds(config: RunConfig, record: RunRecord | None = None) -> BoundReport:
    """Bound report for ``config`` using trajectory-local ``h`` and ``G``.

    When ``record`` is omitted the config is run once to measure them.  For
    nonconvex objectives the smoothness constant is estimated from the
    recorded checkpoints.
    """
    exp = build_experiment(config)
    if record is None:
        record = run(exp)
    constants = exp.constants
    if constants.gamma_m is None:
        traj = [record.checkpoints[k][0] for k in sorted(record.checkpoints)]
        constants = exp.objective.constants(trajectory=traj)
    constants = ObjectiveConstants(constants.H_m, constants.gamma_m, record.h_empirical, constants.H, constants.gamma, constants.empirical_gamma)
    report = bound_report(exp.kind, exp.matrix, constants, exp.hp, G=record.G_empirical)
    report.flags.append("h and G are trajectory-local estimates (max observed norm + 10%)")
    if constants.empirical_gamma:
        report.flags.append("gamma_m estimated from the recorded trajectory")
    return report


def _bound_comparison(exp: Experiment, record: RunRecord) -> dict:
    out = {"h_empirical": record.h_empirical, "G_empirical": record.G_empirical}
    cons = record.column("consensus_error")
    out["max_consensus_error"] = float(cons.max())
    fam = lyapunov_family(exp.kind)
    if exp.kind not in ("cdmsgd", "icdmsgd", "gcdmsgd"):
        bound = consensus_bound(fam, exp.matrix, record.h_empirical, exp.hp.with_(omega=1.0) if exp.kind == "sgd" else exp.hp)
        out["consensus_bound"] = "inf" if math.isinf(bound) else bound
        out["consensus_within_bound"] = bool(cons.max() <= bound)
    if exp.constants.H_m is not None and exp.constants.gamma_m is not None:
        v_star, label = reference_minimum(exp)
        final_gap = record.rows[-1][1] - v_star
        out["V_star"] = v_star
        out["V_star_source"] = label
        out["final_optimality_gap"] = final_gap
        rad_kind = fam if exp.kind not in ("cdmsgd", "icdmsgd", "gcdmsgd") else f"{fam}-momentum"
        try:
            out["optimality_radius"] = optimality_radius(rad_kind, exp.matrix, exp.constants, exp.hp, record.G_empirical)
        except ValueError as exc:
            out["optimality_radius"] = f"unavailable: {exc}"
    return out


# --------------------------------------------------------------------------- outputs


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _write_dat(path: Path, xs, ys):
    path.write_text("".join(f"{int(x)} {y:.17g}\n" for x, y in zip(xs, ys)))


def summary_dict(record: RunRecord, exp: Experiment | None = None) -> dict:
    doc = record.degree_of_consensus
    out = {
        "algorithm": display_name(record.kind),
        "config_hash": record.config_hash,
        "status": record.status,
        "error": record.error,
        "iterations": int(record.rows[-1][0]) if record.rows else 0,
        "hyperparameters": asdict(record.hp) if record.hp else None,
        "final": dict(zip(METRIC_COLUMNS[1:], record.rows[-1][1:])) if record.rows else {},
        "final_agent_loss": record.final_agent_loss,
        "final_agent_accuracy": record.final_agent_accuracy,
        "degree_of_consensus": asdict(doc),
        "wall_clock_seconds": record.wall_clock,
    }
    if exp is not None and record.status == "completed":
        out["bound_comparison"] = _bound_comparison(exp, record)
    return out


def write_outputs(record: RunRecord, out_dir, exp: Experiment | None = None, report: BoundReport | None = None) -> Path:
    """Write ``metrics.csv``, ``summary.json``, ``.dat`` curves, checkpoints and
    (when given) ``bounds.json`` / ``bounds.txt`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(record.metrics_csv())
    (out / "summary.json").write_text(json.dumps(summary_dict(record, exp), indent=2, default=_json_default))
    (out / "config.yaml").write_text(record.config.to_yaml())
    ks = record.iterations
    for name in METRIC_COLUMNS[1:]:
        _write_dat(out / f"{name}.dat", ks, record.column(name))
    _write_dat(out / "agent_metric_mean.dat", ks, record.agent_metric.mean(axis=1))
    _write_dat(out / "agent_metric_gap.dat", ks, record.agent_metric.max(axis=1) - record.agent_metric.min(axis=1))
    ck = sorted(record.checkpoints)
    np.savez(
        out / "checkpoints.npz",
        k=np.array(ck),
        theta=np.stack([record.checkpoints[k][0] for k in ck]),
        v=np.stack([record.checkpoints[k][1] for k in ck]),
    )
    if report is not None:
        (out / "bounds.json").write_text(report.to_json(default=_json_default))
        (out / "bounds.txt").write_text(report.render_table() + "\n")
    return out


# --------------------------------------------------------------------------- compare / sweep


def parse_algorithm_spec(text: str) -> dict:
    """``"icdmsgd:tau=2,mu=0.9"`` -> ``{"kind": "icdmsgd", "tau": 2, "mu": 0.9}``."""
    kind, _, rest = text.partition(":")
    out = {"kind": kind.strip()}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        if "=" not in item:
            raise ConfigError(f"algorithm parameter {item!r} is not key=value")
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


# Parameters that only affect some algorithm kinds.
_KIND_PARAMS = {
    "omega": ("gcdsgd", "gcdmsgd"),
    "tau": ("icdsgd", "icdmsgd"),
    "mu": ("cdmsgd", "icdmsgd", "gcdmsgd"),
}
# Always shown in labels: they define the variant.
_DEFINING_PARAMS = {("omega", "gcdsgd"), ("omega", "gcdmsgd"), ("tau", "icdsgd"), ("tau", "icdmsgd")}


def _label(alg: dict) -> str:
    extras = ",".join(f"{k}={v}" for k, v in alg.items() if k != "kind")
    return display_name(alg["kind"]) + (f"({extras})" if extras else "")


@dataclass
class Comparison:
    labels: list
    records: list
    table: np.ndarray
    columns: list
    degree_of_consensus: dict

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.table:
            lines.append(",".join([str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]]))
        return "\n".join(lines) + "\n"


def _without_algorithm(config: RunConfig) -> dict:
    data = config.to_dict()
    data.pop("algorithm")
    for section, key in _HASH_EXCLUDED:
        data[section].pop(key, None)
    return data


def compare(configs, metrics=("V", "consensus_error")) -> Comparison:
    """Run configs that differ only in their algorithm section and align their metrics.

    ``configs`` is a sequence of :class:`RunConfig`.  Rows are aligned on the
    iteration index.
    """
    configs = list(configs)
    if not configs:
        raise ConfigError("compare needs at least one configuration")
    ref = _without_algorithm(configs[0])
    for c in configs[1:]:
        if _without_algorithm(c) != ref:
            raise ConfigError("compared configs must differ only in the algorithm section")
    exps = [build_experiment(c) for c in configs]
    records = [run(e) for e in exps]
    algs = [asdict(c.algorithm) for c in configs]
    varying = {k for k in algs[0] if k != "kind" and len({repr(a[k]) for a in algs}) > 1}
    def shown(a, k):
        kind = canonical_kind(a["kind"])
        if k == "kind" or (k, kind) in _DEFINING_PARAMS:
            return True
        return k in varying and kind in _KIND_PARAMS.get(k, (kind,))

    labels = [_label({k: v for k, v in a.items() if shown(a, k)}) for a in algs]
    if len(set(labels)) != len(labels):
        labels = [f"{label}#{i}" for i, label in enumerate(labels)]
    ks = records[0].iterations
    columns = ["k"]
    cols = [ks.astype(float)]
    for label, rec in zip(labels, records):
        if not np.array_equal(rec.iterations, ks):
            raise ConfigError("recorded iterations are misaligned across configs")
        for m in metrics:
            columns.append(f"{label}:{m}")
            cols.append(rec.column(m))
    return Comparison(labels, records, np.column_stack(cols), columns, {l: r.degree_of_consensus for l, r in zip(labels, records)})


SWEEP_PARAMS = ("omega", "tau", "alpha")


@dataclass
class SweepReport:
    param: str
    values: list
    records: list
    flags: list
    alpha_max: float | None

    def summary(self) -> list[dict]:
        rows = []
        for value, rec, flag in zip(self.values, self.records, self.flags):
            doc = rec.degree_of_consensus
            rows.append({
                self.param: value,
                "status": rec.status,
                "final_F": rec.rows[-1][2],
                "final_V": rec.rows[-1][1],
                "consensus_gap": doc.gap,
                "flag": flag,
            })
        return rows

    def ordering(self, key: str = "consensus_gap") -> list:
        """Swept values sorted by ``key`` (ascending)."""
        rows = self.summary()
        return [r[self.param] for r in sorted(rows, key=lambda r: r[key])]


def sweep(config: RunConfig, param: str, values) -> SweepReport:
    """One run per value of ``omega``, ``tau`` or ``alpha``.

    Every value is validated before anything runs; a single invalid value
    rejects the whole sweep.  Step sizes above the admissible bound are run
    but flagged.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {param!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    exps = []
    for v in values:
        try:
            exps.append(build_experiment(config.with_overrides(algorithm={param: v})))
        except ConfigError as exc:
            raise ConfigError(f"sweep rejected: {param}={v!r} is invalid ({exc})") from exc
    alpha_max = None
    flags = []
    for exp in exps:
        flag = None
        if param == "alpha":
            if exp.constants.gamma_m is None:
                flag = "admissible bound unknown (no smoothness constant)"
            else:
                try:
                    alpha_max = max_step_size(exp.kind, exp.matrix, exp.constants, exp.hp)
                    if exp.hp.alpha > alpha_max:
                        flag = f"alpha above admissible bound {alpha_max:.6g}"
                except NoAdmissibleStepSize as exc:
                    flag = str(exc)
        flags.append(flag)
    records = []
    for exp in exps:
        try:
            records.append(run(exp))
        except RunDivergedError as exc:
            records.append(exc.record)
    return SweepReport(param, values, records, flags, alpha_max)
