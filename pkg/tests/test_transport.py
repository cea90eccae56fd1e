import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereot import sphere
from sphereot.errors import (CutLocusError, DegenerateNeighborhood, Infeasible, NoConvergence,
                             SizeLimit, ValidationError)
from sphereot.fields import generate_nodes, nodes_from_arrays, normalize_density, uniform_density
from sphereot.transport import (DiscreteMap, Potentials, SolverConfig, TransportPlan, build_cost,
                                duality_gap, exact_plan, extract_map, identity_map, ma_residual,
                                map_from_potential, sinkhorn, solve)


@pytest.fixture(scope="module")
def fib64():
    return generate_nodes(2, 64)


def smooth_density(nodes, seed=1, amp=0.3):
    rng = np.random.default_rng(seed)
    X = nodes.points
    a = rng.normal(size=3)
    B = rng.normal(size=(3, 3))
    return normalize_density(1 + amp * np.tanh(X @ a + np.einsum("mi,ij,mj->m", X, B, X)), nodes)


@pytest.fixture(scope="module")
def random64(fib64):
    """Uniform -> random smooth density on 64 nodes, entropic and exact."""
    f2 = smooth_density(fib64)
    cost = build_cost(fib64, fib64)
    mu = fib64.weights.copy()
    nu = fib64.weights * f2.values
    plan, pot = sinkhorn(cost, mu, nu, SolverConfig(eps_final=1e-4), weights=fib64.weights)
    return cost, mu, nu, plan, pot, exact_plan(cost, mu, nu)


# --------------------------------------------------------------------------
# cost matrix and config
# --------------------------------------------------------------------------

def test_build_cost(fib64):
    c = build_cost(fib64, fib64)
    assert np.all(np.diag(c.entries) == 0.0)
    assert np.array_equal(c.entries, c.entries.T)
    assert np.all(c.entries >= 0)
    x = fib64.points[5]
    assert c.entries[5, 9] == pytest.approx(0.5 * sphere.dist(x, fib64.points[9]) ** 2, abs=1e-12)


def test_build_cost_flags_antipodes():
    nodes = nodes_from_arrays(2, [[0, 0, 1], [0, 0, -1], [1, 0, 0]], np.full(3, 4 * np.pi / 3),
                              "custom", 0, k_neighbors=2)
    c = build_cost(nodes, nodes)
    assert c.cut_flags[0, 1] and c.cut_flags[1, 0]
    assert c.cut_flags.sum() == 2
    assert c.entries[0, 1] == pytest.approx(np.pi ** 2 / 2)


def test_solver_config_validation():
    with pytest.raises(ValidationError):
        SolverConfig(tol_marginal=0)
    with pytest.raises(ValidationError):
        SolverConfig(eps_schedule=(0.1, 0.2))
    with pytest.raises(ValidationError):
        SolverConfig(eps_final=2.0)
    sched = SolverConfig(eps_final=1e-3).schedule(2.0)
    assert sched[0] == 2.0 and sched[-1] == pytest.approx(2e-3)
    assert all(b < a for a, b in zip(sched, sched[1:]))
    assert SolverConfig(eps_schedule=[0.5, 0.1]).schedule(7.0) == [0.5, 0.1]


# --------------------------------------------------------------------------
# sinkhorn
# --------------------------------------------------------------------------

def test_sinkhorn_identical_marginals_dominant_diagonal():
    nodes = generate_nodes(2, 200)
    cost = build_cost(nodes, nodes)
    plan, pot = sinkhorn(cost, nodes.weights, nodes.weights, SolverConfig(eps_final=1e-3))
    assert np.trace(plan.coupling) >= 0.9 * plan.mass
    assert plan.mass == pytest.approx(4 * np.pi, rel=1e-8)
    assert abs(np.dot(nodes.weights, pot.u)) < 1e-10


def test_sinkhorn_two_points_all_mass_to_first():
    nodes = nodes_from_arrays(2, [[1, 0, 0], [0, 1, 0]], [2 * np.pi, 2 * np.pi], "custom", 0,
                              k_neighbors=1)
    cost = build_cost(nodes, nodes)
    mu = np.array([0.5, 0.5]) * 4 * np.pi
    nu = np.array([1.0, 0.0]) * 4 * np.pi
    plan, _ = sinkhorn(cost, mu, nu)
    assert np.allclose(plan.coupling[:, 1], 0.0)
    assert np.allclose(plan.coupling[:, 0], mu)
    T = extract_map(plan, nodes, nodes)
    assert np.allclose(T.images, [[1, 0, 0], [1, 0, 0]], atol=1e-12)


def test_sinkhorn_marginals_and_gauge(random64, fib64):
    cost, mu, nu, plan, pot, _ = random64
    assert plan.row_error <= 1e-7 and plan.col_error <= 1e-7
    assert np.max(np.abs(plan.coupling.sum(1) - mu)) <= 1e-7
    assert np.max(np.abs(plan.coupling.sum(0) - nu)) <= 1e-7
    assert abs(np.dot(fib64.weights, pot.u)) < 1e-10
    assert plan.mass == pytest.approx(mu.sum(), rel=1e-8)


def test_sinkhorn_matches_exact_plan(random64):
    cost, mu, nu, plan, _, ex = random64
    assert np.max(np.abs(plan.coupling - ex.coupling)) <= 1e-3 * mu.sum()
    assert ex.objective(cost) <= plan.objective(cost) + 1e-12


def test_sinkhorn_plan_formula(random64):
    # pi_ij = mu_i nu_j exp((-u_i + v_j - C_ij) / eps)
    cost, mu, nu, plan, pot, _ = random64
    P = mu[:, None] * nu[None, :] * np.exp((-pot.u[:, None] + pot.v[None, :] - cost.entries) / pot.eps)
    assert np.allclose(P, plan.coupling, rtol=1e-9, atol=1e-300)


def test_duality_gap_nonnegative_and_shrinking(fib64):
    f2 = smooth_density(fib64, seed=3)
    cost = build_cost(fib64, fib64)
    mu, nu = fib64.weights, fib64.weights * f2.values
    gaps = []
    for ef in (1e-1, 1e-2, 1e-3):
        plan, pot = sinkhorn(cost, mu, nu, SolverConfig(eps_final=ef))
        gaps.append(duality_gap(cost, plan, pot, mu, nu))
    assert all(g >= -1e-9 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]


def test_sinkhorn_no_convergence(fib64):
    cost = build_cost(fib64, fib64)
    f2 = smooth_density(fib64)
    with pytest.raises(NoConvergence) as info:
        sinkhorn(cost, fib64.weights, fib64.weights * f2.values,
                 SolverConfig(eps_final=1e-4, max_iters=3))
    assert info.value.iterations > 0 and info.value.residual > 1e-7


def test_sinkhorn_rejects_unbalanced(fib64):
    cost = build_cost(fib64, fib64)
    with pytest.raises(Infeasible):
        sinkhorn(cost, fib64.weights, 2 * fib64.weights)
    with pytest.raises(ValidationError):
        sinkhorn(cost, -fib64.weights, -fib64.weights)


def test_sinkhorn_deterministic(random64, fib64):
    cost, mu, nu, plan, pot, _ = random64
    plan2, pot2 = sinkhorn(cost, mu, nu, SolverConfig(eps_final=1e-4), weights=fib64.weights)
    assert np.array_equal(plan.coupling, plan2.coupling)
    assert np.array_equal(pot.u, pot2.u)


# --------------------------------------------------------------------------
# exact LP
# --------------------------------------------------------------------------

def test_exact_identity(fib64):
    cost = build_cost(fib64, fib64)
    ex = exact_plan(cost, fib64.weights, fib64.weights)
    assert ex.objective(cost) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(ex.coupling, np.diag(fib64.weights))


def test_exact_two_by_two_enumeration():
    nodes = nodes_from_arrays(2, [[1, 0, 0], [0, 1, 0]], [2 * np.pi, 2 * np.pi], "custom", 0, 1)
    tgt = nodes_from_arrays(2, [[0.9, 0.1, 0.4], [0.2, 1.0, -0.3]], [2 * np.pi, 2 * np.pi],
                            "custom", 0, 1)
    tgt = nodes_from_arrays(2, sphere.normalize(tgt.points), tgt.weights, "custom", 0, 1)
    cost = build_cost(nodes, tgt)
    m = 2 * np.pi
    C = cost.entries
    # the two vertices of the 2x2 transport polytope with equal masses
    straight, crossed = m * (C[0, 0] + C[1, 1]), m * (C[0, 1] + C[1, 0])
    ex = exact_plan(cost, np.full(2, m), np.full(2, m))
    assert ex.objective(cost) == pytest.approx(min(straight, crossed), rel=1e-12)
    expected = np.diag([m, m]) if straight < crossed else np.array([[0, m], [m, 0]])
    assert np.allclose(ex.coupling, expected)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_exact_never_worse_than_sinkhorn(seed):
    nodes = generate_nodes(2, 24)
    f2 = smooth_density(nodes, seed=seed, amp=0.5)
    cost = build_cost(nodes, nodes)
    mu, nu = nodes.weights, nodes.weights * f2.values
    plan, _ = sinkhorn(cost, mu, nu, SolverConfig(eps_final=1e-2))
    assert exact_plan(cost, mu, nu).objective(cost) <= plan.objective(cost) + 1e-12


def test_exact_limits(fib64):
    big = generate_nodes(2, 300)
    with pytest.raises(SizeLimit):
        exact_plan(build_cost(big, big), big.weights, big.weights)
    cost = build_cost(fib64, fib64)
    with pytest.raises(Infeasible):
        exact_plan(cost, fib64.weights, 1.5 * fib64.weights)


# --------------------------------------------------------------------------
# map extraction
# --------------------------------------------------------------------------

def test_extract_identity_plan(fib64):
    plan = TransportPlan(np.diag(fib64.weights), 0.0, 0.0)
    T = extract_map(plan, fib64, fib64)
    assert np.allclose(T.images, fib64.points, atol=1e-12)
    assert T.provenance == "barycentric"


def test_extract_single_target(fib64):
    P = np.diag(fib64.weights).copy()
    P[3, 3] = 0.0
    P[3, 10] = fib64.weights[3]
    T = extract_map(TransportPlan(P, 0.0, 0.0), fib64, fib64)
    assert np.allclose(T.images[3], fib64.points[10], atol=1e-12)


def test_extract_rejects_mass_on_cut_locus():
    nodes = nodes_from_arrays(2, [[0, 0, 1], [0, 0, -1], [1, 0, 0]], np.full(3, 4 * np.pi / 3),
                              "custom", 0, k_neighbors=2)
    P = np.diag(nodes.weights)
    P[0, 0], P[0, 1] = 0.5 * nodes.weights[0], 0.5 * nodes.weights[0]
    with pytest.raises(CutLocusError):
        extract_map(TransportPlan(P, 0.0, 0.0), nodes, nodes)


def test_exact_and_entropic_maps_agree(random64, fib64):
    _, _, _, plan, _, ex = random64
    d = sphere.dist(extract_map(plan, fib64, fib64).images, extract_map(ex, fib64, fib64).images)
    assert d.max() <= 0.05


def test_map_from_zero_potential_is_identity(fib64):
    pot = Potentials(u=np.zeros(64), v=np.zeros(64), eps=1.0)
    T = map_from_potential(pot, fib64)
    assert np.allclose(T.images, fib64.points, atol=1e-12)
    assert T.provenance == "potential_gradient"


def test_map_from_coordinate_potential_moves_north():
    nodes = generate_nodes(2, 400)
    X = nodes.points
    u = 0.01 * X[:, 2]
    T = map_from_potential(Potentials(u=u, v=u, eps=1.0), nodes)
    disp = sphere.log(X, T.images)
    grad = 0.01 * (np.array([0, 0, 1.0]) - X[:, 2:3] * X)
    away = np.abs(X[:, 2]) < 0.99
    assert np.all(disp[away, 2] > 0)
    assert np.allclose(disp, grad, atol=2e-4)     # 2% of |grad u|; quadratic fit error O(h^2)


def test_map_from_potential_degenerate():
    nodes = generate_nodes(2, 100, k_neighbors=3)
    pot = Potentials(u=np.zeros(100), v=np.zeros(100), eps=1.0)
    with pytest.raises(DegenerateNeighborhood):
        map_from_potential(pot, nodes)


def test_discrete_map_call(fib64):
    R = sphere.random_rotation(np.random.default_rng(2), 3)
    T = DiscreteMap(images=fib64.points @ R.T, source=fib64)
    assert np.allclose(T(fib64.points), T.images, atol=1e-12)
    assert np.allclose(identity_map(fib64)(np.array([[0.3, 0.4, 0.5]])), sphere.normalize(
        np.array([[0.3, 0.4, 0.5]])))


# --------------------------------------------------------------------------
# Monge-Ampere residual
# --------------------------------------------------------------------------

def test_ma_residual_trivial():
    nodes = generate_nodes(2, 300)
    f = uniform_density(nodes)
    pot = Potentials(u=np.zeros(300), v=np.zeros(300), eps=1.0)
    r = ma_residual(pot, identity_map(nodes), f, f, nodes)
    assert r.sup <= 1e-6


def test_ma_residual_rejects_cut_locus():
    nodes = generate_nodes(2, 300)
    f = uniform_density(nodes)
    pot = Potentials(u=np.zeros(300), v=np.zeros(300), eps=1.0)
    T = DiscreteMap(images=-nodes.points, source=nodes)
    with pytest.raises(CutLocusError):
        ma_residual(pot, T, f, f, nodes)


def test_solve_rescales_target_mass():
    nodes = generate_nodes(2, 100)
    f1 = uniform_density(nodes)
    f2 = smooth_density(nodes)
    cost, plan, pot = solve(nodes, f1, f2, SolverConfig(eps_final=1e-2))
    assert plan.mass == pytest.approx(nodes.volume, rel=1e-8)


# --------------------------------------------------------------------------
# full-resolution uniform baseline (shared session solve)
# --------------------------------------------------------------------------

def test_uniform_baseline_routes_agree(solved):
    s = solved(2000, 0.0)
    assert s.T_bary.displacement.max() <= 0.05
    assert sphere.dist(s.T_pot.images, s.T_bary.images).max() <= 2 * s.nodes.h
    assert ma_residual(s.pot, s.T_pot, s.f1, s.f2, s.nodes).sup <= 0.05
