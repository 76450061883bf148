import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from consensus_sgd.algorithms import AgentStreams, HyperParams, SwarmState, gcdsgd_step, local_gradients, max_step_size, step
from consensus_sgd.analysis import (
    LyapunovSpec,
    bound_report,
    collect_noise_samples,
    consensus_bound,
    consensus_error,
    convergence_constants,
    empirical_noise_constants,
    lyapunov_gradient,
    lyapunov_minimizer_oracle,
    lyapunov_value,
    momentum_bound,
    nonconvex_stationarity_bound,
    numerical_lyapunov_minimum,
    omega_crossover_vs_icdsgd,
    omega_thresholds,
    optimality_radius,
    stochastic_lyapunov_gradient,
)
from consensus_sgd.objectives import LogisticObjective, MLPObjective, ObjectiveConstants, QuadraticObjective, random_quadratic_objective
from consensus_sgd.topology import InteractionMatrix, build_graph, make_interaction_matrix
import oracles

RING = make_interaction_matrix(build_graph("ring", 5), "example-ring")
LAZY = make_interaction_matrix(build_graph("ring", 5), "lazy-metropolis", 0.8)
K2 = InteractionMatrix.from_array(np.full((2, 2), 0.5))
LAMS = (oracles.EXAMPLE_LAMBDA2, oracles.EXAMPLE_LAMBDAN)


def _quad(seed=0, n=5, d=2, **kw):
    return random_quadratic_objective(n, d, seed=seed, **kw)


class Zero:
    n_agents, dim = 2, 1

    def total_loss(self, theta):
        return 0.0

    def full_gradients(self, theta):
        return np.zeros_like(theta)


# ----------------------------------------------------------------- Lyapunov spec


@given(
    st.floats(0.01, 1.0), st.floats(1e-3, 1.0), st.floats(0.0, 0.99), st.floats(-0.99, 0.99),
    st.floats(0.1, 5.0), st.floats(0.0, 5.0),
)
def test_curvature_ordering(omega, alpha, lam2, lamN, H, extra):
    lamN = min(lamN, lam2)
    pi = np.eye(2)
    c = ObjectiveConstants(H, H + extra)
    fake = InteractionMatrix(pi, np.array([1.0, lam2, lamN]))
    spec = LyapunovSpec.generalized(fake, alpha, omega, c)
    assert spec.gamma_hat == pytest.approx(omega * (H + extra) + (1 - omega) / alpha * (1 - lamN))
    assert spec.H_hat == pytest.approx(omega * H + (1 - omega) / (2 * alpha) * (1 - lam2))
    assert spec.H_hat <= spec.gamma_hat * (1 + 1e-12)


def test_incremental_spec_constants():
    c = ObjectiveConstants(1.0, 10.0)
    spec = LyapunovSpec.incremental(LAZY, 0.05, 3, c)
    assert spec.H_hat == pytest.approx(1.0 + (1 - LAZY.lambda2**3) / 0.1)
    assert spec.gamma_hat == pytest.approx(10.0 + (1 - LAZY.lambdaN**3) / 0.05)


# ----------------------------------------------------------------- value / gradient


def test_value_on_consensus_state_is_weighted_loss():
    obj = _quad()
    theta = np.tile([0.3, -1.1], (5, 1))
    spec = LyapunovSpec.generalized(RING, 0.1, 0.4)
    assert lyapunov_value(theta, spec, obj) == pytest.approx(0.4 * obj.total_loss(theta), rel=1e-13)
    spec1 = LyapunovSpec.generalized(RING, 0.1, 1.0)
    theta = np.random.default_rng(0).standard_normal((5, 2))
    assert lyapunov_value(theta, spec1, obj) == obj.total_loss(theta)


def test_value_two_agent_penalty():
    spec = LyapunovSpec.generalized(K2, 0.1, 0.5)
    assert lyapunov_value(np.array([[1.0], [-1.0]]), spec, Zero()) == pytest.approx(5.0)


@pytest.mark.parametrize("omega", [0.2, 0.7])
def test_value_matches_explicit_kronecker(omega):
    obj = _quad(d=3)
    theta = np.random.default_rng(1).standard_normal((5, 3))
    spec = LyapunovSpec.generalized(RING, 0.07, omega)
    expected = oracles.lyapunov_g(theta, RING.pi, omega, 0.07, obj.total_loss(theta))
    assert lyapunov_value(theta, spec, obj) == pytest.approx(expected, rel=1e-12)


def test_incremental_value_uses_matrix_power():
    obj = _quad()
    theta = np.random.default_rng(2).standard_normal((5, 2))
    spec = LyapunovSpec.incremental(RING, 0.1, 3)
    p3 = np.linalg.matrix_power(RING.pi, 3)
    x = theta.reshape(-1)
    expected = obj.total_loss(theta) + x @ np.kron(np.eye(5) - p3, np.eye(2)) @ x / 0.2
    assert lyapunov_value(theta, spec, obj) == pytest.approx(expected, rel=1e-12)


def test_dimension_mismatch_rejected():
    spec = LyapunovSpec.generalized(RING, 0.1, 0.5)
    with pytest.raises(ValueError, match="does not match"):
        lyapunov_value(np.zeros((4, 2)), spec, _quad())
    with pytest.raises(ValueError, match="does not match"):
        lyapunov_value(np.zeros((5, 3)), spec, _quad())


def _objectives():
    rng = np.random.default_rng(0)
    Xs = [rng.standard_normal((4, 3)) for _ in range(5)]
    ys = [rng.integers(0, 2, 4) for _ in range(5)]
    return [_quad(d=3, n_terms=3), LogisticObjective(Xs, ys), MLPObjective(Xs, ys, hidden=2)]


@pytest.mark.parametrize("which", [0, 1, 2])
@pytest.mark.parametrize("family", ["g", "i"])
def test_gradient_matches_finite_differences(which, family):
    obj = _objectives()[which]
    spec = LyapunovSpec.generalized(RING, 0.2, 0.6) if family == "g" else LyapunovSpec.incremental(RING, 0.2, 2)
    rng = np.random.default_rng(5)
    for _ in range(10):
        theta = rng.standard_normal((5, obj.dim))
        fd = oracles.central_difference(lambda t: lyapunov_value(t, spec, obj), theta)
        g = lyapunov_gradient(theta, spec, obj)
        assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_gradient_vanishes_on_consensus_in_small_omega_limit():
    obj = _quad()
    spec = LyapunovSpec.generalized(RING, 0.1, 1e-12)
    theta = np.tile([2.0, -3.0], (5, 1))
    assert np.linalg.norm(lyapunov_gradient(theta, spec, obj)) < 1e-9


def test_deterministic_step_is_lyapunov_gradient_step():
    obj = _quad()
    theta = np.random.default_rng(3).standard_normal((5, 2))
    hp = HyperParams(alpha=0.05, omega=0.3, mode="deterministic")
    out = gcdsgd_step(SwarmState(theta), RING, obj, hp)
    spec = LyapunovSpec.generalized(RING, 0.05, 0.3)
    np.testing.assert_allclose(out.theta, theta - 0.05 * lyapunov_gradient(theta, spec, obj), rtol=1e-12, atol=1e-14)


def test_stochastic_step_is_stochastic_lyapunov_step():
    obj = _quad(n_terms=5)
    theta = np.random.default_rng(4).standard_normal((5, 2))
    hp = HyperParams(alpha=0.05, omega=0.3, batch_size=2)
    streams = AgentStreams(11)
    out = gcdsgd_step(SwarmState(theta), RING, obj, hp, streams)
    _, batches = local_gradients(obj, theta, hp, streams, 0)
    spec = LyapunovSpec.generalized(RING, 0.05, 0.3)
    s = stochastic_lyapunov_gradient(theta, spec, obj, batches)
    np.testing.assert_allclose(out.theta, theta - 0.05 * s, rtol=1e-12, atol=1e-14)


def test_stochastic_gradient_full_batch_and_enumeration():
    obj = _quad(n=2, d=2, n_terms=4)
    pi = InteractionMatrix.from_array(np.full((2, 2), 0.5))
    spec = LyapunovSpec.generalized(pi, 0.1, 0.4)
    theta = np.random.default_rng(6).standard_normal((2, 2))
    exact = lyapunov_gradient(theta, spec, obj)
    np.testing.assert_allclose(stochastic_lyapunov_gradient(theta, spec, obj, [None, None]), exact, atol=1e-14)
    combos = list(itertools.combinations(range(4), 2))
    total = np.zeros_like(theta)
    for c0 in combos:
        for c1 in combos:
            total += stochastic_lyapunov_gradient(theta, spec, obj, [np.array(c0), np.array(c1)])
    np.testing.assert_allclose(total / len(combos) ** 2, exact, atol=1e-12)


# ----------------------------------------------------------------- consensus


def test_consensus_error_examples():
    assert consensus_error(np.tile([1.0, 2.0], (4, 1))) == 0.0
    assert consensus_error(np.array([[1.0], [-1.0]])) == 1.0
    theta = np.random.default_rng(0).standard_normal((5, 3))
    mean = theta.sum(axis=0) / 5
    assert consensus_error(theta) == pytest.approx(max(math.dist(row, mean) for row in theta), rel=1e-14)


def test_consensus_bounds():
    hp = HyperParams(alpha=0.01, omega=1.0, tau=1)
    assert math.isinf(consensus_bound("g", RING, 3.0, hp))
    assert consensus_bound("i", RING, 3.0, hp) == pytest.approx(0.01 * 3.0 / (1 - oracles.EXAMPLE_LAMBDA2))
    hp = hp.with_(omega=0.1)
    lam_hat = 0.9 * oracles.EXAMPLE_LAMBDA2 + 0.1
    assert consensus_bound("g", RING, 7.5, hp) == pytest.approx(0.1 * 0.01 * 7.5 / (1 - lam_hat), rel=1e-12)
    assert consensus_bound("i", RING, 7.5, hp.with_(tau=3)) == pytest.approx(0.075 / (1 - oracles.EXAMPLE_LAMBDA2**3))
    with pytest.raises(ValueError):
        consensus_bound("x", RING, 1.0, hp)


# ----------------------------------------------------------------- rates and radii

C = ObjectiveConstants(H_m=1.5, gamma_m=8.0)
STOCH = HyperParams(alpha=0.03, omega=0.4, tau=2, r1=0.7, r2=1.2, B=2.5, B_V=0.1)


def test_deterministic_offsets_vanish():
    det = HyperParams(alpha=0.03, omega=0.4, tau=2, mode="deterministic")
    assert convergence_constants("g", RING, C, det).offset == 0.0
    assert convergence_constants("i", RING, C, det).offset == 0.0
    for kind in ("g", "i", "g-momentum", "i-momentum"):
        assert optimality_radius(kind, RING, C, det) == 0.0


def test_rate_omega_one():
    hp = STOCH.with_(omega=1.0)
    assert convergence_constants("g", RING, C, hp).rate == pytest.approx(1 - 0.03 * 1.5 * 0.7)


def test_rates_match_independent_formulas():
    g = convergence_constants("g", RING, C, STOCH)
    i = convergence_constants("i", RING, C, STOCH)
    assert (g.rate, g.offset) == pytest.approx(oracles.c1_c2(*LAMS, 0.4, 0.03, 1.5, 8.0, 0.7, 2.5), rel=1e-12)
    assert (i.rate, i.offset) == pytest.approx(oracles.c3_c4(*LAMS, 2, 0.03, 1.5, 8.0, 0.7, 2.5), rel=1e-12)
    assert g.names == ("C1", "C2") and i.names == ("C3", "C4")


def test_rate_outside_unit_interval_flagged():
    big = convergence_constants("i", RING, ObjectiveConstants(50.0, 60.0), HyperParams(alpha=1.0, r1=1.0))
    assert not big.in_unit_interval


def test_nonconvex_constants_rejected():
    with pytest.raises(ValueError, match="undefined"):
        convergence_constants("g", RING, ObjectiveConstants(None, 3.0), STOCH)


def test_radius_omega_one_condition_number_form():
    hp = STOCH.with_(omega=1.0)
    expected = 0.03 * 2.5 / (2 * 0.7) * (8.0 / 1.5)
    assert optimality_radius("g", RING, C, hp) == pytest.approx(expected, rel=1e-12)


def test_radii_match_independent_formulas():
    assert optimality_radius("g", RING, C, STOCH) == pytest.approx(oracles.radius_g(*LAMS, 0.4, 0.03, 1.5, 8.0, 0.7, 2.5), rel=1e-12)
    assert optimality_radius("i", RING, C, STOCH) == pytest.approx(oracles.radius_i(*LAMS, 2, 0.03, 1.5, 8.0, 0.7, 2.5), rel=1e-12)
    lam2, lamN = LAMS
    assert optimality_radius("nonconvex-g", RING, C, STOCH) == pytest.approx((0.4 * 8 * 0.03 + 0.6 * (1 - lamN)) * 2.5 / 0.7)
    assert optimality_radius("nonconvex-i", RING, C, STOCH) == pytest.approx((8 * 0.03 + 1 - lamN**2) * 2.5 / 0.7)
    h_hat = 0.4 * 1.5 + 0.6 / 0.06 * (1 - lam2)
    assert optimality_radius("g-momentum", RING, C, STOCH, G=3.0) == pytest.approx(math.sqrt(0.03 / h_hat) * (2.5 + 0.1 * 9))


def test_radius_missing_inputs():
    with pytest.raises(ValueError, match="G"):
        optimality_radius("i-momentum", RING, C, STOCH)
    with pytest.raises(ValueError):
        optimality_radius("g", RING, ObjectiveConstants(None, 2.0), STOCH)
    with pytest.raises(ValueError, match="unknown"):
        optimality_radius("h", RING, C, STOCH)
    assert optimality_radius("nonconvex-g", RING, ObjectiveConstants(None, 2.0), STOCH) > 0


def test_nonconvex_and_momentum_bound_formulas():
    v = nonconvex_stationarity_bound("g", RING, C, STOCH, V1=10.0, V_inf=0.0, K=200)
    assert v == pytest.approx(optimality_radius("nonconvex-g", RING, C, STOCH) + 20.0 / (200 * 0.7 * 0.03))
    assert momentum_bound(3, 4.0, 0.01, 5.0, 1.0) == pytest.approx(0.8**2 * 4.0)
    assert momentum_bound(1, 4.0, 0.01, 5.0, 1.0, B=1.0, B_V=2.0, G=3.0) == pytest.approx(4.0 + 0.05 * 19)


# ----------------------------------------------------------------- omega thresholds


def test_thresholds_reduce_at_single_sweep():
    t = omega_thresholds(RING, C, 0.05, 1)
    assert t.consensus_upper == 0.5
    assert t.lower_vs_cdsgd == 0.5


def test_thresholds_example_ring_two_sweeps():
    t = omega_thresholds(RING, C, 0.05, 2)
    num, den = oracles.omega_lower_vs_icdsgd(*LAMS, 2, 0.05, 1.5, 8.0)
    assert (t.A1, t.A2) == pytest.approx((num, den), rel=1e-12)
    assert t.lower_vs_icdsgd == pytest.approx(num / den, rel=1e-12)
    b, d = 1 - LAMS[0], 1 - LAMS[0] ** 2
    assert t.consensus_upper == pytest.approx(b / (b + d), rel=1e-14)
    assert t.valid == (num > 0 and den > 0 and num < den)


def test_crossover_matches_brute_force_radius_comparison():
    c = ObjectiveConstants(2.0, 3.0)
    alpha, tau = 0.2, 2
    threshold, direction = omega_crossover_vs_icdsgd(LAZY, c, alpha, tau)
    hp = HyperParams(alpha=alpha, tau=tau, B=1.0)
    r_i = optimality_radius("i", LAZY, c, hp)
    for omega in np.linspace(0.01, 1.0, 100):
        better = optimality_radius("g", LAZY, c, hp.with_(omega=omega)) <= r_i
        predicted = omega >= threshold if direction == ">=" else omega <= threshold
        if abs(omega - threshold) > 1e-6:
            assert better == predicted


# ----------------------------------------------------------------- minimiser oracle


def test_oracle_decouples_at_omega_one():
    obj = _quad()
    spec = LyapunovSpec.generalized(RING, 0.1, 1.0, obj.constants())
    theta, v = lyapunov_minimizer_oracle(obj, spec)
    np.testing.assert_allclose(theta, obj.minimizers(), atol=1e-12)
    assert v == pytest.approx(obj.total_loss(theta))


def test_oracle_identical_agents_reach_common_minimiser():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -2.0])
    obj = QuadraticObjective.from_matrices([a] * 5, [b] * 5)
    spec = LyapunovSpec.generalized(RING, 0.1, 1e-3, obj.constants())
    theta, _ = lyapunov_minimizer_oracle(obj, spec)
    np.testing.assert_allclose(theta, np.tile(-np.linalg.solve(a, b), (5, 1)), atol=1e-10)


def test_oracle_two_agent_hand_solution():
    obj = QuadraticObjective.from_matrices([np.eye(1), 3 * np.eye(1)], [np.array([-1.0]), np.array([0.0])])
    spec = LyapunovSpec.generalized(K2, 0.5, 0.5, obj.constants())
    theta, v = lyapunov_minimizer_oracle(obj, spec)
    np.testing.assert_allclose(theta, [[4 / 7], [1 / 7]], atol=1e-14)
    assert v == pytest.approx(lyapunov_value(theta, spec, obj))


@pytest.mark.parametrize("family", ["g", "i"])
def test_oracle_residual(family):
    obj = _quad(d=3, eig_range=(1, 100))
    c = obj.constants()
    spec = LyapunovSpec.generalized(RING, 0.01, 0.3, c) if family == "g" else LyapunovSpec.incremental(RING, 0.01, 3, c)
    theta, _ = lyapunov_minimizer_oracle(obj, spec)
    assert np.linalg.norm(lyapunov_gradient(theta, spec, obj)) < 1e-8


def test_oracle_rejects_non_quadratic():
    with pytest.raises(TypeError):
        lyapunov_minimizer_oracle(_objectives()[1], LyapunovSpec.generalized(RING, 0.1, 0.5))


def test_numerical_minimum_agrees_with_oracle():
    obj = _quad()
    spec = LyapunovSpec.generalized(RING, 0.1, 0.5, obj.constants())
    _, v_exact = lyapunov_minimizer_oracle(obj, spec)
    _, v_num, gnorm = numerical_lyapunov_minimum(obj, spec)
    assert gnorm < 1e-8
    assert v_num == pytest.approx(v_exact, abs=1e-10)


def test_numerical_minimum_logistic():
    obj = _objectives()[1]
    spec = LyapunovSpec.incremental(RING, 0.1, 2, obj.constants())
    theta, v, gnorm = numerical_lyapunov_minimum(obj, spec)
    # Float64 floor for the gradient norm is about sqrt(eps * V * gamma_hat).
    assert gnorm < 10 * math.sqrt(np.finfo(float).eps * v * spec.gamma_hat)
    _, v2, _ = numerical_lyapunov_minimum(obj, spec, theta0=theta + 0.5)
    assert v2 == pytest.approx(v, rel=1e-13)


# ----------------------------------------------------------------- noise constants


def test_full_batch_noise_is_zero():
    obj = _quad(n_terms=4)
    spec = LyapunovSpec.generalized(RING, 0.1, 0.5)
    thetas = np.random.default_rng(0).standard_normal((5, 5, 2))
    samples = collect_noise_samples(obj, spec, thetas, batch_size=4, n_draws=30)
    B, B_V, r1, r2 = empirical_noise_constants(samples)
    assert B < 1e-20 and B_V < 1e-20
    assert r1 == pytest.approx(1.0, abs=1e-10) and r2 == pytest.approx(1.0, abs=1e-10)


def test_additive_noise_variance_recovered():
    rng = np.random.default_rng(1)
    sigma, n, d = 0.3, 5, 2
    samples = []
    for scale in np.linspace(0.1, 3.0, 20):
        grad = rng.standard_normal((n, d)) * scale
        draws = grad + sigma * rng.standard_normal((200, n, d))
        samples.append((grad, draws))
    B, B_V, r1, r2 = empirical_noise_constants(samples)
    assert B == pytest.approx(sigma**2 * n * d, rel=0.2)
    assert B_V >= 0 and 0 < r1 <= r2


def test_noise_estimation_needs_enough_draws():
    with pytest.raises(ValueError, match="at least 30"):
        empirical_noise_constants([(np.ones((2, 1)), np.ones((10, 2, 1)))])


@given(st.integers(0, 10_000))
def test_noise_estimates_nonnegative(seed):
    rng = np.random.default_rng(seed)
    samples = [(rng.standard_normal((3, 2)), rng.standard_normal((30, 3, 2)) * rng.uniform(0, 2)) for _ in range(4)]
    B, B_V, _, _ = empirical_noise_constants(samples)
    assert B >= 0 and B_V >= 0


def test_minibatch_noise_positive():
    obj = _quad(n_terms=6)
    spec = LyapunovSpec.generalized(RING, 0.1, 0.5)
    thetas = np.random.default_rng(2).standard_normal((6, 5, 2))
    B, B_V, r1, r2 = empirical_noise_constants(collect_noise_samples(obj, spec, thetas, 2, 40))
    assert B + B_V > 0 and r2 >= r1 > 0


# ----------------------------------------------------------------- reports


def test_report_deterministic_quadratic():
    c = ObjectiveConstants(1.0, 4.0, h=2.0)
    hp = HyperParams(alpha=0.05, omega=0.5, tau=2, mode="deterministic")
    rep = bound_report("gcdsgd", RING, c, hp)
    assert rep.C2 == 0.0 and rep.C4 == 0.0
    assert rep.optimality_radius == 0.0
    assert rep.admissible_alpha_max == pytest.approx(oracles.alpha_max_g(LAMS[1], 0.5, 4.0))
    data = json.loads(rep.to_json())
    assert set(data["provenance"]) >= {"C1", "C2", "C3", "C4", "consensus_bound", "optimality_radius"}
    assert "Method" in rep.render_table()
    rows = {(r["method"], r["f"]): r["alpha_admissible"] for r in rep.table}
    # One sweep has no admissible step on this matrix; two sweeps allow only alpha <= lamN**2 / gamma.
    assert rows[("CDSGD", "Str-con")] is False and rows[("i-CDSGD (tau=2)", "Str-con")] is False
    assert rows[("g-CDSGD (omega=0.5)", "Str-con")] is True
    table = rep.render_table()
    assert "CDSGD *" in table and "g-CDSGD (omega=0.5) *" not in table
    assert table.endswith("admissible step size")


def test_report_flags_infinite_consensus_bound():
    rep = bound_report("gcdsgd", RING, ObjectiveConstants(1.0, 4.0, h=2.0), HyperParams(alpha=0.05, omega=1.0))
    assert math.isinf(rep.consensus_bound)
    assert any("infinite" in f for f in rep.flags)
    assert json.loads(rep.to_json())["consensus_bound"] == "inf"


def test_report_flags_large_step():
    rep = bound_report("icdsgd", LAZY, ObjectiveConstants(1.0, 4.0, h=2.0), HyperParams(alpha=5.0, mode="deterministic"))
    assert any("exceeds the admissible bound" in f for f in rep.flags)


def test_report_nonconvex():
    rep = bound_report("gcdsgd", RING, ObjectiveConstants(None, 4.0, h=1.0), STOCH)
    assert rep.C1 is None and rep.optimality_radius is not None
    assert any("strongly convex constants undefined" in f for f in rep.flags)


# ----------------------------------------------------------------- measured invariants


def _d_sequence(kind, matrix, obj, hp, iters=500):
    c = obj.constants()
    spec = LyapunovSpec.for_algorithm(kind, matrix, hp, c)
    _, v_star = lyapunov_minimizer_oracle(obj, spec)
    s = SwarmState.zeros(obj.n_agents, obj.dim)
    vals = [lyapunov_value(s.theta, spec, obj)]
    for _ in range(iters):
        s = step(kind, s, matrix, obj, hp)
        vals.append(lyapunov_value(s.theta, spec, obj))
    return np.array(vals), v_star


@pytest.mark.parametrize("matrix", [RING, LAZY], ids=["example-ring", "lazy-ring"])
@pytest.mark.parametrize("omega", [0.5, 0.9])
def test_monotone_descent_at_admissible_step(matrix, omega):
    obj = _quad(eig_range=(1, 10))
    hp0 = HyperParams(alpha=1.0, omega=omega, mode="deterministic")
    hp = hp0.with_(alpha=max_step_size("gcdsgd", matrix, obj.constants(), hp0))
    vals, _ = _d_sequence("gcdsgd", matrix, obj, hp)
    assert np.all(np.diff(vals) <= 1e-12)


def test_deterministic_consensus_within_bound():
    obj = _quad()
    for kind, hp in (("gcdsgd", HyperParams(alpha=0.05, omega=0.3, mode="deterministic")),
                     ("icdsgd", HyperParams(alpha=0.05, tau=2, mode="deterministic"))):
        s = SwarmState.zeros(5, 2)
        errs, h = [], 0.0
        for _ in range(300):
            h = max(h, np.max(np.linalg.norm(obj.full_gradients(s.theta), axis=1)))
            s = step(kind, s, RING, obj, hp)
            errs.append(consensus_error(s.theta))
        fam = "g" if kind == "gcdsgd" else "i"
        assert max(errs) <= consensus_bound(fam, RING, 1.1 * h, hp)


def test_contraction_constant_is_optimistic_for_heterogeneous_agents():
    # Documented counterexample: the rate constant assumes curvature H_hat in every
    # direction, but along the consensus direction V only has curvature about H_m.
    obj = _quad(seed=1, eig_range=(1, 10))
    hp0 = HyperParams(alpha=1.0, tau=3, mode="deterministic")
    hp = hp0.with_(alpha=max_step_size("icdsgd", LAZY, obj.constants(), hp0))
    vals, v_star = _d_sequence("icdsgd", LAZY, obj, hp, iters=100)
    d = vals - v_star
    c3 = convergence_constants("i", LAZY, obj.constants(), hp).rate
    assert np.max(d[1:] / d[:-1]) > c3


def test_nonconvex_stationarity_bound_holds_on_mlp():
    rng = np.random.default_rng(0)
    Xs = [rng.standard_normal((20, 3)) for _ in range(5)]
    ys = [(x[:, 0] * x[:, 1] > 0).astype(int) for x in Xs]
    obj = MLPObjective(Xs, ys, hidden=4, rho=1e-3)
    hp = HyperParams(alpha=0.01, omega=0.5, batch_size=5)
    spec = LyapunovSpec.generalized(RING, hp.alpha, hp.omega)
    s = SwarmState(0.1 * rng.standard_normal((5, obj.dim)))
    streams = AgentStreams(3)
    traj, sq = [], []
    for _ in range(200):
        traj.append(s.theta)
        sq.append(np.sum(lyapunov_gradient(s.theta, spec, obj) ** 2))
        s = step("gcdsgd", s, RING, obj, hp, streams)
    B, B_V, r1, r2 = empirical_noise_constants(collect_noise_samples(obj, spec, traj[::20], 5, 30))
    c = obj.constants(trajectory=traj)
    est = hp.with_(r1=r1, r2=max(r2, r1), B=B, B_V=B_V)
    v1 = lyapunov_value(traj[0], spec, obj)
    assert np.mean(sq) <= nonconvex_stationarity_bound("g", RING, c, est, v1, 0.0, len(sq))
