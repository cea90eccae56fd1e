"""Ma-Trudinger-Wang tensor of c = d^2/2 on the round sphere, by nested finite differences.

For x, a tangent vector v0 and unit orthogonal xi, nu at x,

    C(x, y)(xi, nu) = d^2/dt^2 |_{t=0}  -Hess_x c(x, exp_x(v0 + t nu))(xi, xi)

The Hessian is expressed in one frame at x for every t, which realises the flat
connection of T_x S^n: the outer derivative is an ordinary second derivative of
a matrix-valued function on a fixed vector space.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import CutLocusError, ValidationError

T_STEP = 1e-2


@dataclass(frozen=True, eq=False)
class MTWQuery:
    x: sphere.SpherePoint
    v0: sphere.TangentVector
    xi: sphere.TangentVector
    nu: sphere.TangentVector

    def __post_init__(self):
        for v in (self.v0, self.xi, self.nu):
            if not np.allclose(v.base.coords, self.x.coords, atol=1e-12):
                raise ValidationError("query vectors must be tangent at x")
        if abs(self.xi.norm - 1) > 1e-10 or abs(self.nu.norm - 1) > 1e-10:
            raise ValidationError("xi and nu must be unit vectors")
        if abs(float(np.dot(self.xi.vec, self.nu.vec))) > 1e-10:
            raise ValidationError("xi and nu must be orthogonal")

    def as_dict(self):
        return {"x": self.x.coords.tolist(), "v0": self.v0.vec.tolist(),
                "xi": self.xi.vec.tolist(), "nu": self.nu.vec.tolist()}


def _second_difference(X, V0, XI, NU, t_step, hess_step, cut_guard):
    """Vectorised central second difference in t; inputs are (m, d) arrays."""
    F = sphere.tangent_frames(X)
    xi_c = np.einsum("mdn,md->mn", F, XI)
    for t in (-t_step, t_step):
        if np.any(np.linalg.norm(V0 + t * NU, axis=-1) >= np.pi - cut_guard):
            raise CutLocusError("t-perturbed target crosses the cut-locus guard")
    h = []
    for t in (-t_step, 0.0, t_step):
        Y = sphere.exp(X, V0 + t * NU)
        H = sphere.hess_x(X, Y, F, step=hess_step, cut_guard=cut_guard)
        h.append(-np.einsum("mi,mij,mj->m", xi_c, H, xi_c))
    return (h[0] - 2.0 * h[1] + h[2]) / t_step ** 2


def mtw_values(X, V0, XI, NU, t_step=T_STEP, hess_step=sphere.HESS_STEP,
               richardson=False, cut_guard=sphere.CUT_GUARD):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V0, XI, NU = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (V0, XI, NU))
    val = _second_difference(X, V0, XI, NU, t_step, hess_step, cut_guard)
    if richardson:
        fine = _second_difference(X, V0, XI, NU, t_step / 2, hess_step, cut_guard)
        val = (4.0 * fine - val) / 3.0
    return val


def mtw_value(q: MTWQuery, t_step=T_STEP, hess_step=sphere.HESS_STEP, richardson=False,
              cut_guard=sphere.CUT_GUARD) -> float:
    val = mtw_values(q.x.coords, q.v0.vec, q.xi.vec, q.nu.vec, t_step, hess_step,
                     richardson, cut_guard)
    return float(val[0])


@dataclass(frozen=True, eq=False)
class MTWReport:
    n: int
    samples: int
    seed: int
    cut_margin: float
    values: np.ndarray
    queries: dict                 # arrays x, v0, xi, nu of shape (samples, n+1)
    threshold: float = 0.0
    t_step: float = T_STEP
    hess_step: float = sphere.HESS_STEP

    @property
    def theta_obs(self):
        return float(self.values.min())

    @property
    def failures(self):
        bad = np.flatnonzero(self.values <= self.threshold)
        return [{"query": {k: self.queries[k][i].tolist() for k in ("x", "v0", "xi", "nu")},
                 "value": float(self.values[i])} for i in bad]

    def smallest(self, m):
        return np.argsort(self.values, kind="stable")[:m]

    def as_dict(self):
        return {"n": self.n, "samples": self.samples, "seed": self.seed,
                "cut_margin": self.cut_margin, "t_step": self.t_step, "hess_step": self.hess_step,
                "theta_obs": self.theta_obs, "failures": self.failures}


def sample_queries(n, samples, cut_margin, rng):
    """Admissible (x, v0, xi, nu): |v0| uniform on [0, pi - cut_margin], xi ⟂ nu."""
    if n < 2:
        raise ValidationError("orthogonal unit pairs need n >= 2")
    X = sphere.random_points(rng, samples, n)

    def unit_tangent():
        v = sphere.project(X, rng.standard_normal((samples, n + 1)))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    radius = rng.uniform(0.0, np.pi - cut_margin, samples)
    V0 = unit_tangent() * radius[:, None]
    XI = unit_tangent()
    NU = sphere.project(X, rng.standard_normal((samples, n + 1)))
    NU = NU - np.sum(NU * XI, axis=1, keepdims=True) * XI
    NU /= np.linalg.norm(NU, axis=1, keepdims=True)
    return {"x": X, "v0": V0, "xi": XI, "nu": NU}


def a3s_scan(n: int, samples: int, cut_margin: float = 0.3, seed: int = 0,
             t_step=T_STEP, hess_step=sphere.HESS_STEP, threshold=0.0) -> MTWReport:
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    if cut_margin < 0.2:
        raise ValidationError("cut_margin below 0.2 lets the stencil reach the cut locus")
    rng = np.random.default_rng(seed)
    q = sample_queries(n, samples, cut_margin, rng)
    vals = mtw_values(q["x"], q["v0"], q["xi"], q["nu"], t_step, hess_step)
    return MTWReport(n=n, samples=samples, seed=seed, cut_margin=cut_margin, values=vals,
                     queries=q, threshold=threshold, t_step=t_step, hess_step=hess_step)


def query(report: MTWReport, i: int) -> MTWQuery:
    x = sphere.SpherePoint(report.queries["x"][i])
    return MTWQuery(x, *(sphere.TangentVector(x, report.queries[k][i]) for k in ("v0", "xi", "nu")))
