import numpy as np
import pytest

from sphereot import sphere
from sphereot.errors import DegenerateNeighborhood
from sphereot.fields import generate_nodes
from sphereot.local_fit import interpolate, neighbor_coords, quadratic_fit


@pytest.fixture(scope="module")
def nodes():
    return generate_nodes(2, 1000)


def test_neighbor_coords_are_normal_coordinates(nodes):
    F, idx, S = neighbor_coords(nodes)
    assert S.shape == (nodes.N, nodes.k_neighbors, 2)
    # |s| is the geodesic distance to the neighbour
    D = sphere.dist(nodes.points[:, None, :], nodes.points[idx])
    assert np.allclose(np.linalg.norm(S, axis=-1), D, atol=1e-12)


def test_constant_field(nodes):
    g, H, _ = quadratic_fit(np.full(nodes.N, 3.0), nodes)
    assert np.abs(g).max() < 1e-12 and np.abs(H).max() < 1e-10


def test_coordinate_gradient_and_hessian(nodes):
    X = nodes.points
    grad, H, F = quadratic_fit(X[:, 2], nodes)
    grad_amb = np.einsum("mdn,mn->md", F, grad)
    exact = np.array([0.0, 0.0, 1.0]) - X[:, 2:3] * X
    assert np.abs(grad_amb - exact).max() <= 0.5 * nodes.h ** 2
    # covariant Hessian of x3 on the unit sphere is -x3 * g_can
    H_amb = np.einsum("mdi,mij,mej->mde", F, H, F)
    P = np.eye(3) - X[:, :, None] * X[:, None, :]
    assert np.abs(H_amb + X[:, 2, None, None] * P).max() <= 1.5 * nodes.h ** 2


def test_fit_error_is_second_order():
    errs = []
    for N in (500, 2000):
        nodes = generate_nodes(2, N)
        X = nodes.points
        grad, _, F = quadratic_fit(X[:, 0] * X[:, 1], nodes)
        exact = sphere.project(X, np.stack([X[:, 1], X[:, 0], np.zeros(N)], axis=1))
        errs.append((np.abs(np.einsum("mdn,mn->md", F, grad) - exact).max(), nodes.h))
    (e1, h1), (e2, h2) = errs
    assert e2 < e1
    assert np.log(e1 / e2) / np.log(h1 / h2) > 1.5


def test_too_few_neighbours():
    nodes = generate_nodes(2, 100, k_neighbors=4)
    with pytest.raises(DegenerateNeighborhood):
        quadratic_fit(np.zeros(100), nodes)


def test_interpolate_reproduces_nodes_and_smooth_fields(nodes):
    X = nodes.points
    f = X[:, 2] + 0.5 * X[:, 0] ** 2
    assert np.allclose(interpolate(f, nodes, X[:20]), f[:20], atol=1e-3)
    Q = sphere.random_points(np.random.default_rng(2), 50, 2)
    exact = Q[:, 2] + 0.5 * Q[:, 0] ** 2
    assert np.abs(interpolate(f, nodes, Q) - exact).max() <= nodes.h ** 2
