"""Differential analysis of computed transport maps.

Jacobians are linear maps between g_can-orthonormal frames at x_i and T(x_i).
Lipschitz constants are measured from (S^n, g_can) to (S^n, g); map distances
use the convention ``C^{1,a'} = C0 + C1 + [Jacobian difference]_{a'}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import CutLocusError, InvalidDensityBounds, ValidationError
from .fields import DensityField, MetricField, NodeSet, holder_norm, holder_seminorm, sphere_volume
from .local_fit import _weighted_solve, neighbor_coords, quadratic_fit
from .transport import DiscreteMap, Potentials

# round-off allowance on the 1-Lipschitz verdict (an exact isometry gives 1 + 1e-16)
CONTRACTION_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class JacobianEstimate:
    matrices: np.ndarray        # (N, n, n): source frame -> image frame
    residuals: np.ndarray       # (N,) RMS fit residual
    src_frames: np.ndarray      # (N, d, n)
    img_frames: np.ndarray      # (N, d, n)

    def ambient(self):
        """Jacobians as ambient (d, d) matrices F_T A F_x^T."""
        return np.einsum("mdi,mij,mej->mde", self.img_frames, self.matrices, self.src_frames)


def jacobian(T: DiscreteMap, nodes: NodeSet | None = None, k=None) -> JacobianEstimate:
    """Least-squares fit of A_i : log_{x_i}(x_j) -> log_{T_i}(T_j) over k neighbours."""
    nodes = T.source if nodes is None else nodes
    Fx, idx, S = neighbor_coords(nodes, k)
    Y = T.images
    FT = sphere.tangent_frames(Y)
    try:
        L = sphere.log(Y[:, None, :], Y[idx])
    except CutLocusError as exc:
        raise CutLocusError("neighbouring images are antipodal; Jacobian undefined") from exc
    Z = np.einsum("mdn,mkd->mkn", FT, L)
    # Z_j ~ A S_j  <=>  S A^T ~ Z
    At = _weighted_solve(S, Z, np.ones(S.shape[:2]))
    A = np.swapaxes(At, -1, -2)
    fit = np.einsum("mij,mkj->mki", A, S)
    res = np.sqrt(np.mean(np.sum((fit - Z) ** 2, axis=-1), axis=-1))
    return JacobianEstimate(matrices=A, residuals=res, src_frames=Fx, img_frames=FT)


@dataclass(frozen=True, eq=False)
class LipschitzReport:
    op_norms: np.ndarray
    hs_norms: np.ndarray
    k_rho: float

    @property
    def sup_op(self):
        return float(self.op_norms.max())

    @property
    def sup_hs(self):
        return float(self.hs_norms.max())

    @property
    def contraction(self):
        return self.sup_op <= 1.0 + CONTRACTION_TOL

    @property
    def hs_exceeds(self):
        """Nodes where the HS norm exceeds 1 although the operator norm does not."""
        return np.flatnonzero((self.hs_norms > 1.0 + CONTRACTION_TOL)
                              & (self.op_norms <= 1.0 + CONTRACTION_TOL))

    def summary(self):
        return {"sup_op_norm": self.sup_op, "sup_hs_norm": self.sup_hs,
                "contraction": self.contraction, "k_rho": self.k_rho,
                "hs_gt_1_ge_op_nodes": int(self.hs_exceeds.size)}


def lipschitz_norms(J: JacobianEstimate, T: DiscreteMap, g: MetricField) -> LipschitzReport:
    G = g.in_frames(T.images, J.img_frames)
    M = np.einsum("mki,mkl,mlj->mij", J.matrices, G, J.matrices)
    lam = np.linalg.eigvalsh(M)
    op = np.sqrt(np.maximum(lam[:, -1], 0.0))
    hs = np.sqrt(np.maximum(np.trace(M, axis1=1, axis2=2), 0.0))
    n = G.shape[-1]
    k_rho = float(np.max(n * np.trace(G, axis1=1, axis2=2)))
    return LipschitzReport(op_norms=op, hs_norms=hs, k_rho=k_rho)


@dataclass(frozen=True)
class MapDistanceReport:
    C0: float
    C1: float
    holder_C1: float
    alpha_prime: float

    @property
    def combined(self):
        return self.C0 + self.C1 + self.holder_C1

    def as_dict(self):
        return {"C0": self.C0, "C1": self.C1, "holder_C1": self.holder_C1,
                "combined": self.combined, "alpha_prime": self.alpha_prime}


def jacobian_difference(T1: DiscreteMap, T2: DiscreteMap, k=None):
    """Ambient field D_i = G1_i dT1_i - G2_i dT2_i at the midpoint m_i of T1_i, T2_i.

    G1, G2 transport along the geodesic T1_i -- T2_i to its midpoint.  Pointwise
    this is dT1 - Gamma dT2 (Gamma: T2_i -> T1_i) up to an isometry, so operator
    norms agree, while swapping the maps merely negates D, which keeps the
    Hoelder seminorm of D symmetric.
    """
    J1 = jacobian(T1, k=k)
    J2 = jacobian(T2, k=k)
    mid = sphere.normalize(T1.images + T2.images)
    P1 = sphere.transport_matrix(T1.images, mid)
    P2 = sphere.transport_matrix(T2.images, mid)
    return (np.einsum("mde,mef->mdf", P1, J1.ambient())
            - np.einsum("mde,mef->mdf", P2, J2.ambient()))


def map_distance(T1: DiscreteMap, T2: DiscreteMap, alpha_prime: float, nodes: NodeSet | None = None,
                 k=None, cut_guard=sphere.CUT_GUARD) -> MapDistanceReport:
    nodes = T1.source if nodes is None else nodes
    if not nodes.same_nodes(T1.source) or not nodes.same_nodes(T2.source):
        raise ValidationError("maps must be defined on the same node set")
    if np.array_equal(T1.images, T2.images):
        # identical maps: skip the fits, whose round-off would give ~1e-16 instead of 0
        return MapDistanceReport(C0=0.0, C1=0.0, holder_C1=0.0, alpha_prime=alpha_prime)
    d = sphere.dist(T1.images, T2.images)
    if np.any(d >= np.pi - cut_guard):
        raise CutLocusError("image pair is antipodal")
    D = jacobian_difference(T1, T2, k)
    C1 = float(np.max(np.linalg.norm(D, ord=2, axis=(1, 2))))
    hold = holder_seminorm(D.reshape(D.shape[0], -1), alpha_prime, nodes)
    return MapDistanceReport(C0=float(d.max()), C1=C1, holder_C1=hold, alpha_prime=alpha_prime)


def awaycut_bound(n: int, inf_f1: float, sup_f2: float) -> float:
    """pi - (1/2pi) { (inf f1 / sup f2) [n vol(S^n) / (2 vol(S^{n-1}))]^2 }^{1/n}."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not (inf_f1 > 0 and sup_f2 > 0) or sup_f2 < inf_f1:
        raise InvalidDensityBounds(f"need 0 < inf f1 <= sup f2, got {inf_f1}, {sup_f2}")
    ratio = n * sphere_volume(n) / (2.0 * sphere_volume(n - 1))
    return float(np.pi - (inf_f1 / sup_f2 * ratio ** 2) ** (1.0 / n) / (2.0 * np.pi))


@dataclass(frozen=True)
class CutLocusReport:
    sup_displacement: float
    bound: float
    slack: float
    inf_f1: float
    sup_f2: float

    @property
    def satisfied(self):
        return self.sup_displacement <= self.bound + self.slack

    def as_dict(self):
        return {"sup_displacement": self.sup_displacement, "bound": self.bound,
                "slack": self.slack, "inf_f1": self.inf_f1, "sup_f2": self.sup_f2,
                "satisfied": self.satisfied}


def cutlocus_check(T: DiscreteMap, f1: DensityField, f2: DensityField) -> CutLocusReport:
    nodes = T.source
    bound = awaycut_bound(nodes.n, f1.min, f2.max)
    return CutLocusReport(sup_displacement=float(T.displacement.max()), bound=bound,
                          slack=2.0 * nodes.h, inf_f1=f1.min, sup_f2=f2.max)


@dataclass(frozen=True)
class ProofChain:
    k_rho: float
    bound: float
    contraction_possible: bool
    eps_slack: float

    def as_dict(self):
        return {"K_rho": self.k_rho, "bound": self.bound,
                "contraction_possible": self.contraction_possible, "eps_slack": self.eps_slack}


def proof_chain_bound(rho: float, delta: float, n: int, g: MetricField, nodes: NodeSet) -> ProofChain:
    """K_rho = sup_x sum_{i,j} g_can^{ii} [(g_rho)_{jj} + slack], bound = delta sqrt(K_rho) + rho.

    The slack at a node is the largest entry of g - g_rho in an orthonormal
    frame there, which bounds the perturbation of every diagonal term.
    """
    G = g.in_frames(nodes.points)
    slack = np.max(np.abs(G - rho ** 2 * np.eye(n)), axis=(1, 2))
    per_node = n * n * (rho ** 2 + slack)
    k_rho = float(per_node.max())
    bound = float(delta * np.sqrt(k_rho) + rho)
    return ProofChain(k_rho=k_rho, bound=bound, contraction_possible=bound < 1.0,
                      eps_slack=float(slack.max()))


@dataclass(frozen=True)
class RegularityTable:
    rows: list = field(default_factory=list)
    factor: float = 3.0

    @property
    def baseline(self):
        return max(self.rows, key=lambda r: r["eps"]) if self.rows else None

    @property
    def flags(self):
        base = self.baseline
        out = []
        for r in self.rows:
            bad = [key for key in ("u", "grad", "hess")
                   if r[key] > self.factor * base[key] and r[key] > 0]
            out.append(bad)
        return out

    @property
    def bounded(self):
        return not any(self.flags)

    def as_dict(self):
        return {"rows": self.rows, "factor": self.factor, "flags": self.flags, "bounded": self.bounded}


def regularity_monitor(sequence, alpha: float, nodes: NodeSet, k=None, factor=3.0) -> RegularityTable:
    """Discrete C^{1,beta} / C^{2,alpha} proxies of the potentials along a sequence.

    ``sequence`` holds (eps, Potentials, DiscreteMap) triples on ``nodes``.  For
    each instance the Hoelder norms of u, of its fitted gradient and of its fitted
    Hessian (ambient components) are recorded; rows exceeding ``factor`` times the
    largest-eps row are flagged.
    """
    rows = []
    for eps, pot, _T in sequence:
        grad, H, F = quadratic_fit(pot.u, nodes, k)
        grad_amb = np.einsum("mdn,mn->md", F, grad)
        H_amb = np.einsum("mdi,mij,mej->mde", F, H, F).reshape(nodes.N, -1)
        rows.append({
            "eps": float(eps),
            "u": holder_norm(pot.u, alpha, nodes),
            "grad": _component_norm(grad_amb, alpha, nodes),
            "hess": _component_norm(H_amb, alpha, nodes),
        })
    return RegularityTable(rows=rows, factor=factor)


def _component_norm(values, alpha, nodes):
    return max(holder_norm(values[:, c], alpha, nodes) for c in range(values.shape[1]))
