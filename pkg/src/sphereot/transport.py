"""Discrete optimal transport on S^n for the cost d^2/2.

Entropic solver (log-domain Sinkhorn with eps-scaling), an exact LP oracle,
map extraction in the form ``T(x) = exp_x(grad u(x))`` and the Monge-Ampere
residual check.

Sign convention: ``Potentials.u`` is the McCann potential, i.e. minus the
Kantorovich potential of the source, so that ``T = exp(grad u)``.  The plan is
``pi_ij = mu_i nu_j exp((-u_i + v_j - C_ij) / eps)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse

from . import sphere
from .errors import CutLocusError, Infeasible, NoConvergence, SizeLimit, ValidationError
from .fields import DensityField, NodeSet
from .local_fit import interpolate, quadratic_fit

log = logging.getLogger(__name__)

N_MAX_EXACT = 256


@dataclass(frozen=True, eq=False)
class CostMatrix:
    entries: np.ndarray
    cut_flags: np.ndarray
    cut_guard: float = sphere.CUT_GUARD

    @property
    def mean(self):
        return float(self.entries.mean())


def build_cost(src: NodeSet, tgt: NodeSet, cut_guard=sphere.CUT_GUARD) -> CostMatrix:
    D = sphere.pairwise_dist(src.points, tgt.points)
    return CostMatrix(entries=0.5 * D * D, cut_flags=D >= np.pi - cut_guard, cut_guard=cut_guard)


@dataclass(frozen=True)
class SolverConfig:
    """Sinkhorn settings.

    Unless ``eps_schedule`` is given explicitly, the schedule is geometric from
    ``eps_start * mean(C)`` down to ``eps_final * mean(C)`` with ratio ``eps_factor``.
    """
    eps_start: float = 1.0
    eps_final: float = 1e-3
    eps_factor: float = 0.5
    eps_schedule: tuple | None = None
    tol_marginal: float = 1e-7
    max_iters: int = 20000
    cut_guard: float = sphere.CUT_GUARD
    seed: int = 0

    def __post_init__(self):
        if self.tol_marginal <= 0:
            raise ValidationError("tol_marginal must be positive")
        if self.eps_schedule is not None:
            sched = tuple(float(e) for e in self.eps_schedule)
            if not sched or any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
                raise ValidationError("eps_schedule must be a strictly decreasing list of positive reals")
            object.__setattr__(self, "eps_schedule", sched)
        elif not (0 < self.eps_final <= self.eps_start and 0 < self.eps_factor < 1):
            raise ValidationError("need 0 < eps_final <= eps_start and 0 < eps_factor < 1")

    def schedule(self, mean_cost: float) -> list:
        if self.eps_schedule is not None:
            return list(self.eps_schedule)
        eps = [self.eps_start]
        while eps[-1] * self.eps_factor > self.eps_final * (1 + 1e-12):
            eps.append(eps[-1] * self.eps_factor)
        if eps[-1] > self.eps_final:
            eps.append(self.eps_final)
        return [e * mean_cost for e in eps]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    coupling: np.ndarray
    row_error: float
    col_error: float

    @property
    def mass(self):
        return float(self.coupling.sum())

    def objective(self, cost: CostMatrix):
        return float(np.sum(self.coupling * cost.entries))


@dataclass(frozen=True, eq=False)
class Potentials:
    u: np.ndarray
    v: np.ndarray
    eps: float
    iterations: int = 0


def _lse_rows(A):
    m = A.max(axis=1)
    A = A - m[:, None]
    np.exp(A, out=A)
    return np.log(A.sum(axis=1)) + m


def _check_masses(mu, nu):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(mu < 0) or np.any(nu < 0) or mu.sum() <= 0:
        raise ValidationError("marginal weights must be nonnegative with positive total")
    if abs(mu.sum() - nu.sum()) > 1e-10 * mu.sum():
        raise Infeasible(f"unbalanced masses {mu.sum():.17g} vs {nu.sum():.17g}")
    return mu, nu


OMEGA_MAX = 1.95
_WINDOW = 20


def _update_relaxation(omega, rate):
    """Next over-relaxation factor from the error decay observed under ``omega``.

    Young's relation (lam + omega - 1)^2 = lam omega^2 kappa recovers the plain
    Sinkhorn rate kappa from the observed rate lam; the optimum is then
    2 / (1 + sqrt(1 - kappa)).  Non-decreasing errors halve the excess over 1.
    """
    if not np.isfinite(rate) or rate >= 1.0:
        return 1.0 + 0.5 * (omega - 1.0)
    rate = max(rate, 1e-12)
    kappa = min((rate + omega - 1.0) ** 2 / (rate * omega ** 2), 1.0 - 1e-8)
    return min(2.0 / (1.0 + np.sqrt(1.0 - kappa)), OMEGA_MAX)


def sinkhorn(cost: CostMatrix, mu, nu, config: SolverConfig = SolverConfig(), weights=None):
    """Entropic OT by log-domain Sinkhorn with eps-scaling.

    Updates are over-relaxed, ``f <- f + omega (f_sinkhorn - f)``, with omega
    re-tuned every few iterations from the observed error decay.  Intermediate levels stop at
    ``100 * tol_marginal``; the final level must reach ``tol_marginal`` on both
    marginals or NoConvergence is raised.  ``weights`` (source quadrature
    weights) fixes the gauge of u and defaults to ``mu``.
    """
    mu, nu = _check_masses(mu, nu)
    C = cost.entries
    CT = np.ascontiguousarray(C.T)
    with np.errstate(divide="ignore"):
        # zero weights become -inf: their rows / columns carry no mass
        logmu, lognu = np.log(mu), np.log(nu)
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    sched = config.schedule(cost.mean)
    total = 0
    for level, eps in enumerate(sched):
        final = level == len(sched) - 1
        tol = config.tol_marginal if final else 100 * config.tol_marginal
        K = C / -eps
        KT = CT / -eps
        omega = 1.0
        mark = None
        it = 0
        err = np.inf
        while it < config.max_iters:
            a = _lse_rows(KT + (f / eps + logmu)[None, :])
            col_err = float(np.max(np.abs(np.exp(lognu + g / eps + a) - nu)))
            g = g + omega * (-eps * a - g)
            b = _lse_rows(K + (g / eps + lognu)[None, :])
            row_err = float(np.max(np.abs(np.exp(logmu + f / eps + b) - mu)))
            f = f + omega * (-eps * b - f)
            it += 1
            err = max(col_err, row_err)
            if err <= tol / 4:
                break
            if it % _WINDOW == 0:
                if mark is not None:
                    omega = _update_relaxation(omega, (err / mark) ** (1.0 / _WINDOW))
                mark = err
        total += it
        # finish with one plain sweep: rows exact, columns within the last error
        a = _lse_rows(KT + (f / eps + logmu)[None, :])
        g = -eps * a
        f = -eps * _lse_rows(K + (g / eps + lognu)[None, :])
        log.debug("eps=%.3e iterations=%d omega=%.3f marginal error=%.3e", eps, it, omega, err)
    eps = sched[-1]
    P = np.exp((f[:, None] + g[None, :] - C) / eps + logmu[:, None] + lognu[None, :])
    row_err = float(np.max(np.abs(P.sum(axis=1) - mu)))
    col_err = float(np.max(np.abs(P.sum(axis=0) - nu)))
    if max(row_err, col_err) > config.tol_marginal:
        raise NoConvergence(total, max(row_err, col_err))
    w = mu if weights is None else np.asarray(weights, dtype=float)
    u = -f
    shift = float(np.dot(w, u) / w.sum())
    pot = Potentials(u=u - shift, v=g - shift, eps=eps, iterations=total)
    return TransportPlan(P, row_err, col_err), pot


def duality_gap(cost: CostMatrix, plan: TransportPlan, pot: Potentials, mu, nu):
    """Primal cost minus the dual value of the c-transformed (feasible) potentials.

    Nonnegative by weak duality and tends to zero as eps -> 0.
    """
    f = -pot.u
    g = np.min(cost.entries - f[:, None], axis=0)
    return plan.objective(cost) - (float(np.dot(mu, f)) + float(np.dot(nu, g)))


def exact_plan(cost: CostMatrix, mu, nu, n_max=N_MAX_EXACT) -> TransportPlan:
    """Optimal coupling of the discrete Kantorovich LP (HiGHS dual simplex)."""
    C = cost.entries
    N, M = C.shape
    if max(N, M) > n_max:
        raise SizeLimit(f"exact LP limited to {n_max} nodes, got {max(N, M)}")
    mu, nu = _check_masses(mu, nu)
    rows = sparse.kron(sparse.eye(N), np.ones((1, M)))
    cols = sparse.kron(np.ones((1, N)), sparse.eye(M))
    A = sparse.vstack([rows, cols]).tocsr()
    b = np.concatenate([mu, nu])
    res = optimize.linprog(C.ravel(), A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise Infeasible(res.message)
    P = np.maximum(res.x.reshape(N, M), 0.0)
    return TransportPlan(P, float(np.max(np.abs(P.sum(1) - mu))), float(np.max(np.abs(P.sum(0) - nu))))


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMap:
    """Images of the source nodes.  ``__call__`` extends the map off the nodes."""
    images: np.ndarray
    source: NodeSet
    provenance: str = "barycentric"
    meta: dict = field(default_factory=dict)

    @property
    def displacement(self):
        return sphere.dist(self.source.points, self.images)

    def __call__(self, query):
        # displacement of the nearest node, parallel-transported to the query point
        Q = np.atleast_2d(np.asarray(query, dtype=float))
        j = self.source.nearest(Q)[:, 0]
        X = self.source.points[j]
        v = sphere.log(X, self.images[j], cut_guard=None)
        return sphere.exp(Q, sphere.transport(X, Q, v))


def identity_map(nodes: NodeSet) -> DiscreteMap:
    return DiscreteMap(images=nodes.points.copy(), source=nodes, provenance="identity")


def extract_map(plan: TransportPlan, src: NodeSet, tgt: NodeSet,
                cut_guard=sphere.CUT_GUARD, chunk=256) -> DiscreteMap:
    """Barycentric projection in the tangent space at each source node.

    ``T_i = exp_{x_i}(sum_j pi_ij log_{x_i}(y_j) / sum_j pi_ij)``, summing only over
    entries above ``1e-12 * total mass``.
    """
    P = plan.coupling
    floor = 1e-12 * P.sum()
    X, Y = src.points, tgt.points
    images = np.empty_like(X)
    for start in range(0, X.shape[0], chunk):
        sl = slice(start, min(start + chunk, X.shape[0]))
        W = np.where(P[sl] > floor, P[sl], 0.0)
        D = sphere.pairwise_dist(X[sl], Y)
        if np.any((W > 0) & (D >= np.pi - cut_guard)):
            raise CutLocusError("significant plan mass sits on the cut locus")
        # log_x(y) = d / sin d * (y - cos d x)
        with np.errstate(invalid="ignore", divide="ignore"):
            R = np.where(D > 1e-12, D / np.sin(D), 1.0)
        R = np.where(W > 0, R, 0.0)
        WR = W * R
        mean = WR @ Y - np.sum(WR * np.cos(D), axis=1)[:, None] * X[sl]
        mean /= W.sum(axis=1)[:, None]
        mean = sphere.project(X[sl], mean)
        images[sl] = sphere.exp(X[sl], mean)
    return DiscreteMap(images=images, source=src, provenance="barycentric")


def map_from_potential(pot: Potentials, src: NodeSet, k=None) -> DiscreteMap:
    """T_i = exp_{x_i}(grad u(x_i)) with the gradient from a local quadratic fit."""
    grad, _, F = quadratic_fit(pot.u, src, k)
    V = np.einsum("mdn,mn->md", F, grad)
    return DiscreteMap(images=sphere.exp(src.points, V), source=src, provenance="potential_gradient")


@dataclass(frozen=True, eq=False)
class MAResidual:
    residual: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def sup(self):
        return float(np.max(np.abs(self.residual)))

    @property
    def relative(self):
        return self.residual / self.rhs

    @property
    def sup_relative(self):
        return float(np.max(np.abs(self.relative)))


def ma_residual(pot: Potentials, T: DiscreteMap, f1: DensityField, f2: DensityField,
                src: NodeSet, k=None, cut_guard=sphere.CUT_GUARD) -> MAResidual:
    """Pointwise residual of det(Hess u + Hess_x c(x, T x)) = f1 / f2(T) |det D_xy c|.

    Hess u comes from a local quadratic fit of u; f2 is interpolated at the
    images by local quadratic fits on the node set.
    """
    X = src.points
    Y = T.images
    if np.any(sphere.dist(X, Y) >= np.pi - cut_guard):
        raise CutLocusError("map image on the cut locus")
    _, Hu, F = quadratic_fit(pot.u, src, k)
    Hc = sphere.hess_x(X, Y, F, cut_guard=cut_guard)
    lhs = np.linalg.det(Hu + Hc)
    f2T = interpolate(f2.values, src, Y, k)
    rhs = f1.values / f2T * sphere.mixed_det_array(X, Y, cut_guard=cut_guard)
    return MAResidual(residual=lhs - rhs, lhs=lhs, rhs=rhs)


def solve(src: NodeSet, f1: DensityField, f2: DensityField, config: SolverConfig = SolverConfig(),
          tgt: NodeSet | None = None):
    """Convenience: OT from f1 on src to f2 on tgt (default: same nodes)."""
    tgt = src if tgt is None else tgt
    cost = build_cost(src, tgt, config.cut_guard)
    mu = src.weights * f1.values
    nu = tgt.weights * f2.values
    nu = nu * (mu.sum() / nu.sum())
    plan, pot = sinkhorn(cost, mu, nu, config, weights=src.weights)
    return cost, plan, pot
