"""Node sets on S^n, densities, nearly-round metrics and discrete Hoelder norms."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import special, stats
from scipy.spatial import cKDTree

from . import sphere
from .errors import NonPositiveDensity, NonPositiveMetric, UnsupportedScheme, ValidationError

SCHEMES = ("fibonacci", "stratified_random")


def sphere_volume(n: int) -> float:
    """vol(S^n) = 2 pi^{(n+1)/2} / Gamma((n+1)/2)."""
    return float(2.0 * np.pi ** ((n + 1) / 2) / special.gamma((n + 1) / 2))


@dataclass(frozen=True, eq=False)
class NodeSet:
    n: int
    points: np.ndarray          # (N, n+1)
    weights: np.ndarray         # (N,), units of vol_can
    neighbors: np.ndarray       # (N, k) indices, nearest first, self excluded
    h: float                    # max nearest-neighbour geodesic distance
    scheme: str
    seed: int

    @property
    def N(self):
        return self.points.shape[0]

    @property
    def k_neighbors(self):
        return self.neighbors.shape[1]

    @property
    def volume(self):
        return sphere_volume(self.n)

    def point(self, i) -> sphere.SpherePoint:
        return sphere.SpherePoint(self.points[i])

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    def nearest(self, query, k=1):
        """(m, k) indices of the k nearest nodes (chordal = geodesic ordering)."""
        _, idx = self.tree.query(np.atleast_2d(query), k=k)
        return idx.reshape(-1, k)

    def same_nodes(self, other: "NodeSet") -> bool:
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)


def _fibonacci(N):
    i = np.arange(N, dtype=float)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / N
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * np.pi * np.mod(i / golden, 1.0)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _stratified(n, N, rng):
    # The last coordinate t of a uniform point on S^n has (t+1)/2 ~ Beta(n/2, n/2);
    # stratify t by quantiles and draw the remaining direction uniformly on S^{n-1}.
    u = (np.arange(N) + rng.random(N)) / N
    t = 2.0 * stats.beta.ppf(u, n / 2.0, n / 2.0) - 1.0
    rest = rng.standard_normal((N, n))
    rest /= np.linalg.norm(rest, axis=1, keepdims=True)
    pts = np.column_stack([np.sqrt(np.maximum(0.0, 1.0 - t * t))[:, None] * rest, t])
    return sphere.normalize(pts)


def _knn(points, k):
    tree = cKDTree(points)
    chord, idx = tree.query(points, k=k + 1)
    nn = 2.0 * np.arcsin(np.minimum(chord[:, 1] / 2.0, 1.0))
    return idx[:, 1:], float(nn.max())


def generate_nodes(n: int, N: int, scheme: str = "fibonacci", k_neighbors: int = 12,
                   seed: int = 0) -> NodeSet:
    if scheme not in SCHEMES:
        raise UnsupportedScheme(f"unknown scheme {scheme!r}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    if N < n + 2:
        raise ValidationError(f"need N >= n+2 nodes, got {N}")
    if not 1 <= k_neighbors < N:
        raise ValidationError("k_neighbors must lie in [1, N)")
    vol = sphere_volume(n)
    if scheme == "fibonacci":
        if n != 2:
            raise UnsupportedScheme("the Fibonacci lattice is only available on S^2")
        pts = _fibonacci(N)
        weights = np.full(N, vol / N)
    else:
        rng = np.random.default_rng(seed)
        pts = _stratified(n, N, rng)
        # inverse kernel-density weights with a von Mises-Fisher kernel whose
        # width is the mean distance to the k-th neighbour
        chord, _ = cKDTree(pts).query(pts, k=k_neighbors + 1)
        bw = float(np.mean(2.0 * np.arcsin(np.minimum(chord[:, -1] / 2.0, 1.0))))
        kappa = 1.0 / bw ** 2
        dens = np.exp(kappa * (pts @ pts.T - 1.0)).sum(axis=1)
        w = 1.0 / dens
        weights = vol * w / w.sum()
    nbrs, h = _knn(pts, k_neighbors)
    for a in (pts, weights, nbrs):
        a.setflags(write=False)
    return NodeSet(n=n, points=pts, weights=weights, neighbors=nbrs, h=h, scheme=scheme, seed=seed)


def nodes_from_arrays(n, points, weights, scheme, seed, k_neighbors=12) -> NodeSet:
    pts = np.asarray(points, dtype=float)
    w = np.asarray(weights, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != n + 1 or w.shape != (pts.shape[0],):
        raise ValidationError("node arrays have inconsistent shapes")
    nbrs, h = _knn(pts, k_neighbors)
    return NodeSet(n=n, points=pts, weights=w, neighbors=nbrs, h=h, scheme=scheme, seed=seed)


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityField:
    values: np.ndarray
    alpha: float = 0.5

    @property
    def min(self):
        return float(self.values.min())

    @property
    def max(self):
        return float(self.values.max())


def normalize_density(values, nodes: NodeSet, alpha=0.5) -> DensityField:
    """Rescale positive nodal values so their quadrature integral is vol_can(S^n)."""
    v = np.asarray(values, dtype=float)
    if v.shape != (nodes.N,):
        raise ValidationError("density must have one value per node")
    if not np.all(v > 0):
        raise NonPositiveDensity("densities must be strictly positive")
    if np.all(v == v[0]):
        # constant fields normalise to exactly one, free of quadrature round-off
        return DensityField(values=np.ones(nodes.N), alpha=alpha)
    v = v * (nodes.volume / nodes.integrate(v))
    return DensityField(values=v, alpha=alpha)


def uniform_density(nodes: NodeSet, alpha=0.5) -> DensityField:
    return DensityField(values=np.ones(nodes.N), alpha=alpha)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def _projectors(X):
    d = X.shape[-1]
    return np.eye(d) - X[..., :, None] * X[..., None, :]


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric 2-tensor on S^n stored as ambient (n+1)x(n+1) matrices per node.

    A matrix acts on tangent vectors by restriction.  For the round and conformal
    kinds the generating data is kept so the metric can be evaluated exactly away
    from the nodes.
    """
    rho: float
    components: np.ndarray     # (N, n+1, n+1)
    kind: str                  # round | conformal | general
    nodes: NodeSet
    eps: float = 0.0
    profile: Callable | None = field(default=None, repr=False)

    def factor(self, X):
        if self.kind == "round" or self.eps == 0.0:
            return np.ones(X.shape[:-1])
        return 1.0 + self.eps * self.profile(X)

    def at(self, X):
        """Ambient tensors at arbitrary points (nearest node for the general kind)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind in ("round", "conformal"):
            return self.rho ** 2 * self.factor(X)[:, None, None] * _projectors(X)
        return self.components[self.nodes.nearest(X)[:, 0]]

    def in_frames(self, X, F=None):
        """n x n Gram matrices in g_can-orthonormal frames at X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if F is None:
            F = sphere.tangent_frames(X)
        C = self.at(X)
        return np.einsum("mdi,mde,mej->mij", F, C, F)

    def tangent_eigenvalues(self):
        return np.linalg.eigvalsh(self.in_frames(self.nodes.points))


def round_metric(nodes: NodeSet, rho: float) -> MetricField:
    comps = rho ** 2 * _projectors(nodes.points)
    return MetricField(rho=rho, components=comps, kind="round", nodes=nodes)


def conformal_metric(nodes: NodeSet, rho: float, eps: float, phi: Callable) -> MetricField:
    """g = (1 + eps * phi) g_rho, with phi a vectorised function of ambient points."""
    if not 0 < rho <= 1:
        raise ValidationError("rho must lie in (0, 1]")
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    fac = 1.0 + eps * np.asarray(phi(nodes.points), dtype=float)
    if np.any(fac <= 0):
        raise NonPositiveMetric(f"1 + eps*phi reaches {fac.min():.3g} <= 0")
    comps = rho ** 2 * fac[:, None, None] * _projectors(nodes.points)
    kind = "round" if eps == 0 else "conformal"
    return MetricField(rho=rho, components=comps, kind=kind, nodes=nodes, eps=eps, profile=phi)


def volume_density(g: MetricField, nodes: NodeSet):
    """sqrt(det g) relative to g_can at each node (unnormalised)."""
    if g.kind in ("round", "conformal"):
        # det of rho^2 (1 + eps phi) Id_n, without frame round-off
        fac = g.factor(nodes.points)
        if np.any(fac <= 0):
            raise NonPositiveMetric("conformal factor is not positive")
        return g.rho ** nodes.n * fac ** (nodes.n / 2.0)
    G = g.in_frames(nodes.points)
    det = np.linalg.det(G)
    if np.any(det <= 0):
        raise NonPositiveMetric("metric is not positive definite on some tangent space")
    return np.sqrt(det)


def metric_to_density(g: MetricField, nodes: NodeSet, alpha=0.5) -> DensityField:
    return normalize_density(volume_density(g, nodes), nodes, alpha=alpha)


def radius_from_volume(g: MetricField, nodes: NodeSet) -> float:
    vol_g = nodes.integrate(volume_density(g, nodes))
    return float((vol_g / nodes.volume) ** (1.0 / nodes.n))


# --------------------------------------------------------------------------
# Hoelder estimators
# --------------------------------------------------------------------------

def holder_seminorm(values, alpha: float, nodes: NodeSet, chunk=512):
    """max |f_i - f_j| / d_ij^alpha over node pairs with d_ij in [h, pi/2].

    ``values`` may carry trailing component axes; the result is then the max over
    components.  This is a lower bound for the true seminorm.
    """
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    f = np.asarray(values, dtype=float).reshape(nodes.N, -1)
    X = nodes.points
    lo, hi = nodes.h, np.pi / 2
    best = 0.0
    for start in range(0, nodes.N, chunk):
        sl = slice(start, min(start + chunk, nodes.N))
        D = sphere.pairwise_dist(X[sl], X)
        mask = (D >= lo) & (D <= hi)
        if not mask.any():
            continue
        denom = np.where(mask, D, 1.0) ** alpha
        for c in range(f.shape[1]):
            diff = np.abs(f[sl, c][:, None] - f[:, c][None, :])
            q = np.where(mask, diff / denom, 0.0)
            best = max(best, float(q.max()))
    return best


def holder_norm(values, alpha: float, nodes: NodeSet):
    """Discrete C^{0,alpha} norm: sup |f| plus :func:`holder_seminorm`."""
    f = np.asarray(values, dtype=float)
    return float(np.abs(f).max()) + holder_seminorm(f, alpha, nodes)


def metric_holder_distance(g1: MetricField, g2: MetricField, alpha: float, nodes: NodeSet):
    """Max over ambient components (a, b) of holder_norm of (g1 - g2)_{ab}."""
    diff = g1.components - g2.components
    d = diff.shape[-1]
    return max(holder_norm(diff[:, a, b], alpha, nodes) for a in range(d) for b in range(d))


# --------------------------------------------------------------------------
# perturbation profiles
# --------------------------------------------------------------------------

def _p1(X):
    return X[..., 2] ** 2 - 1.0 / 3.0


def _p2(X):
    return X[..., 2]


def _p3(X):
    return X[..., 0] * X[..., 1]


PROFILES = {"p1": _p1, "p2": _p2, "p3": _p3}


def profile(name: str) -> Callable:
    """Registry of smooth perturbation shapes (x3^2 - 1/3, x3, x1 x2)."""
    try:
        return PROFILES[name]
    except KeyError:
        raise ValidationError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def centered_profile(name: str, nodes: NodeSet):
    """Nodal values of a registered profile with zero quadrature mean."""
    v = PROFILES[name](nodes.points) if name in PROFILES else profile(name)(nodes.points)
    return v - nodes.integrate(v) / nodes.volume
