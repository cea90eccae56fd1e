"""Differential geometry of the unit sphere S^n embedded in R^{n+1}.

Points are unit (n+1)-vectors and tangent vectors are ambient vectors orthogonal
to their base point.  Every operation has a vectorised array form (leading batch
axes allowed) used by the heavier modules, and a thin typed wrapper working on
:class:`SpherePoint` / :class:`TangentVector`.

The quadratic cost is ``c(x, y) = d(x, y)**2 / 2``.  Its derivatives are taken by
central finite differences in normal coordinates, so a single code path serves
all dimensions; closed forms only appear in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutLocusError

CUT_GUARD = 1e-6
GRAD_STEP = 1e-4
HESS_STEP = 1e-3


# --------------------------------------------------------------------------
# array level
# --------------------------------------------------------------------------

def normalize(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def project(x, v):
    """Orthogonal projection of ambient ``v`` onto the tangent space at ``x``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    return v - np.sum(x * v, axis=-1, keepdims=True) * x


def dist(x, y):
    """Great-circle distance, broadcasting over leading axes.

    Uses ``2 atan2(|x - y|, |x + y|)``, which equals ``arccos(<x, y>)`` but keeps
    full relative precision near 0 and near pi.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def pairwise_dist(X, Y, chunk=128):
    """(N, M) matrix of distances between the rows of X and the rows of Y.

    Same formula as :func:`dist`, evaluated in row blocks, so entries agree with
    ``dist(X[i], Y[j])`` to the last bit (zero diagonal, exact symmetry).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    out = np.empty((X.shape[0], Y.shape[0]))
    for start in range(0, X.shape[0], chunk):
        sl = slice(start, start + chunk)
        out[sl] = dist(X[sl, None, :], Y[None, :, :])
    return out


def exp(x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    out = np.cos(nv) * x + np.sinc(nv / np.pi) * v
    out = np.where(nv < 1e-14, x, out)
    return normalize(out)


def log(x, y, cut_guard=CUT_GUARD):
    """Inverse of :func:`exp`; raises CutLocusError within ``cut_guard`` of the antipode.

    Pass ``cut_guard=None`` to skip the check (antipodal rows then return garbage).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = dist(x, y)
    if cut_guard is not None and np.any(d >= np.pi - cut_guard):
        raise CutLocusError(f"log undefined: distance {np.max(d):.12f} within {cut_guard} of pi")
    w = y - np.sum(x * y, axis=-1, keepdims=True) * x
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    scale = np.divide(d[..., None], nw, out=np.zeros_like(nw), where=nw > 0)
    return scale * w


def transport(x, y, v, cut_guard=CUT_GUARD):
    """Parallel transport of ``v`` (tangent at x) to y along the minimizing geodesic."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if cut_guard is not None and np.any(dist(x, y) >= np.pi - cut_guard):
        raise CutLocusError("parallel transport undefined between antipodal points")
    xy = np.sum(x * y, axis=-1, keepdims=True)
    yv = np.sum(y * v, axis=-1, keepdims=True)
    return v - yv / (1.0 + xy) * (x + y)


def transport_matrix(x, y):
    """Ambient matrix P with P @ v = transport(x, y, v) for v tangent at x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[-1]
    xy = np.sum(x * y, axis=-1)[..., None, None]
    return np.eye(d) - (x + y)[..., :, None] * y[..., None, :] / (1.0 + xy)


def tangent_frames(x):
    """Deterministic orthonormal tangent frames, shape (..., n+1, n).

    Gram-Schmidt over the ambient axes in index order, skipping the axis most
    aligned with x (lowest index on ties) so the remaining n axes always project
    to a well-conditioned basis.
    """
    x = np.asarray(x, dtype=float)
    batch = x.shape[:-1]
    d = x.shape[-1]
    flat = x.reshape(-1, d)
    m = flat.shape[0]
    skip = np.argmax(np.abs(flat), axis=1)
    frames = np.zeros((m, d, d - 1))
    col = np.zeros(m, dtype=int)
    rows = np.arange(m)
    for axis in range(d):
        e = np.zeros((m, d))
        e[:, axis] = 1.0
        e = e - flat[:, axis:axis + 1] * flat
        for k in range(min(axis, d - 1)):
            b = frames[:, :, k]
            used = (k < col)[:, None]
            e = e - used * np.sum(b * e, axis=1, keepdims=True) * b
        with np.errstate(invalid="ignore", divide="ignore"):
            e = normalize(e)
        take = skip != axis
        frames[rows[take], :, col[take]] = e[take]
        col = col + take
    return frames.reshape(batch + (d, d - 1))


def cost_array(x, y):
    return 0.5 * dist(x, y) ** 2


def _normal_points(x, F, S):
    """exp_x(F s) for stencil offsets S of shape (k, n); returns (..., k, n+1)."""
    v = np.einsum("...dn,kn->...kd", F, S)
    return exp(x[..., None, :], v)


def _hess_stencil(n, step):
    offs = [np.zeros(n)]
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        offs += [e, -e]
    for a in range(n):
        for b in range(a + 1, n):
            ea = np.zeros(n)
            eb = np.zeros(n)
            ea[a] = step
            eb[b] = step
            offs += [ea + eb, ea - eb, -ea + eb, -ea - eb]
    return np.array(offs)


def hess_x(x, y, F=None, step=HESS_STEP, cut_guard=CUT_GUARD):
    """Hessian of z -> c(z, y) at x in normal coordinates of frame F, shape (..., n, n)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if cut_guard is not None and np.any(dist(x, y) >= np.pi - cut_guard):
        raise CutLocusError("cost Hessian undefined at the cut locus")
    if F is None:
        F = tangent_frames(x)
    n = F.shape[-1]
    S = _hess_stencil(n, step)
    Z = _normal_points(x, F, S)
    c = cost_array(Z, y[..., None, :])
    H = np.empty(x.shape[:-1] + (n, n))
    c0 = c[..., 0]
    for a in range(n):
        H[..., a, a] = (c[..., 1 + 2 * a] - 2.0 * c0 + c[..., 2 + 2 * a]) / step ** 2
    k = 1 + 2 * n
    for a in range(n):
        for b in range(a + 1, n):
            val = (c[..., k] - c[..., k + 1] - c[..., k + 2] + c[..., k + 3]) / (4.0 * step ** 2)
            H[..., a, b] = val
            H[..., b, a] = val
            k += 4
    return H


def grad_x_fd(x, y, F=None, step=GRAD_STEP):
    """Central-difference gradient of z -> c(z, y) at x, returned as an ambient vector."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if F is None:
        F = tangent_frames(x)
    n = F.shape[-1]
    S = np.concatenate([np.eye(n) * step, -np.eye(n) * step])
    c = cost_array(_normal_points(x, F, S), y[..., None, :])
    g = (c[..., :n] - c[..., n:]) / (2.0 * step)
    return np.einsum("...dn,...n->...d", F, g)


def mixed_hess(x, y, Fx=None, Fy=None, step=HESS_STEP, cut_guard=CUT_GUARD):
    """Mixed second derivative d^2 c / ds_a dr_b in normal coordinates at x and y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if cut_guard is not None and np.any(dist(x, y) >= np.pi - cut_guard):
        raise CutLocusError("mixed derivative undefined at the cut locus")
    if Fx is None:
        Fx = tangent_frames(x)
    if Fy is None:
        Fy = tangent_frames(y)
    n = Fx.shape[-1]
    S = np.concatenate([np.eye(n) * step, -np.eye(n) * step])
    Zx = _normal_points(x, Fx, S)  # (..., 2n, d): +e_a then -e_a
    Zy = _normal_points(y, Fy, S)
    c = cost_array(Zx[..., :, None, :], Zy[..., None, :, :])  # (..., 2n, 2n)
    pp = c[..., :n, :n]
    pm = c[..., :n, n:]
    mp = c[..., n:, :n]
    mm = c[..., n:, n:]
    return (pp - pm - mp + mm) / (4.0 * step ** 2)


def geodesic_frames(x, y):
    """Frames at x and y whose first axis follows the geodesic x -> y.

    The frame at y is the parallel transport of the frame at x.  The stencil of
    ``mixed_hess`` in these frames is carried along by any rotation of the pair,
    so the finite-difference error does not depend on the pair's orientation.
    Coincident pairs fall back to ``tangent_frames``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    F = tangent_frames(x)
    v = log(x, y, cut_guard=None)
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    ok = r[..., 0] > 1e-12
    u = np.where(ok[..., None], v / np.where(r > 0, r, 1.0), F[..., 0])
    # Householder reflection in frame coordinates sending e1 to a = F^T u;
    # reflect about e1 + a or e1 - a, whichever is longer (|w|^2 >= 2)
    a = np.einsum("...dn,...d->...n", F, u)
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    n = F.shape[-1]
    e = np.zeros(n)
    e[0] = 1.0
    s = np.where(a[..., :1] < 0, -1.0, 1.0)          # s = +1: w = e1 + a maps e1 to -a
    w = e + s * a
    H = np.eye(n) - 2.0 * w[..., :, None] * w[..., None, :] / np.sum(w * w, axis=-1)[..., None, None]
    H[..., :, 0] *= -s                                 # first column becomes a
    Fx = np.where(ok[..., None, None], F @ H, F)
    Fy = transport_matrix(x, y) @ Fx
    return Fx, Fy


def mixed_det_array(x, y, step=HESS_STEP, cut_guard=CUT_GUARD):
    if cut_guard is not None and np.any(dist(x, y) >= np.pi - cut_guard):
        raise CutLocusError("mixed derivative undefined at the cut locus")
    Fx, Fy = geodesic_frames(x, y)
    return np.abs(np.linalg.det(mixed_hess(x, y, Fx, Fy, step=step, cut_guard=cut_guard)))


def random_points(rng, m, n):
    return normalize(rng.standard_normal((m, n + 1)))


def random_rotation(rng, d):
    """Haar-random element of SO(d)."""
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


# --------------------------------------------------------------------------
# typed API
# --------------------------------------------------------------------------

def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1 or c.size < 2:
            raise ValueError("a point on S^n needs n+1 >= 2 coordinates")
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("zero vector is not a point on the sphere")
        object.__setattr__(self, "coords", _frozen(c / norm))

    @property
    def n(self):
        return self.coords.size - 1

    @classmethod
    def axis(cls, n, k):
        """The k-th ambient basis vector e_{k+1} of R^{n+1}, as a point of S^n."""
        e = np.zeros(n + 1)
        e[k] = 1.0
        return cls(e)

    def __neg__(self):
        return SpherePoint(-self.coords)

    def __repr__(self):
        return f"SpherePoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: SpherePoint
    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        if v.shape != self.base.coords.shape:
            raise ValueError("tangent vector and base point dimensions differ")
        object.__setattr__(self, "vec", _frozen(project(self.base.coords, v)))

    @property
    def norm(self):
        return float(np.linalg.norm(self.vec))


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis of T_x S^n stored as the columns of ``matrix``."""
    base: SpherePoint
    basis: tuple

    @classmethod
    def at(cls, x: SpherePoint) -> "Frame":
        F = tangent_frames(x.coords)
        return cls(x, tuple(TangentVector(x, F[:, k]) for k in range(F.shape[1])))

    @property
    def matrix(self):
        return np.stack([b.vec for b in self.basis], axis=1)

    def coordinates(self, v: TangentVector):
        return self.matrix.T @ v.vec

    def vector(self, coeffs) -> TangentVector:
        return TangentVector(self.base, self.matrix @ np.asarray(coeffs, dtype=float))


def geodesic_distance(x: SpherePoint, y: SpherePoint) -> float:
    return float(dist(x.coords, y.coords))


def exp_map(v: TangentVector) -> SpherePoint:
    return SpherePoint(exp(v.base.coords, v.vec))


def log_map(x: SpherePoint, y: SpherePoint, cut_guard=CUT_GUARD) -> TangentVector:
    return TangentVector(x, log(x.coords, y.coords, cut_guard))


def parallel_transport(v: TangentVector, y: SpherePoint, cut_guard=CUT_GUARD) -> TangentVector:
    return TangentVector(y, transport(v.base.coords, y.coords, v.vec, cut_guard))


def cost(x: SpherePoint, y: SpherePoint) -> float:
    return 0.5 * geodesic_distance(x, y) ** 2


def cost_grad_x(x: SpherePoint, y: SpherePoint, cut_guard=CUT_GUARD) -> TangentVector:
    """Riemannian gradient of c(., y) at x, i.e. ``-log_x(y)``."""
    v = log_map(x, y, cut_guard)
    return TangentVector(x, -v.vec)


def cost_hess_x(x: SpherePoint, y: SpherePoint, frame: Frame | None = None,
                step=HESS_STEP, cut_guard=CUT_GUARD):
    F = (frame or Frame.at(x)).matrix
    return hess_x(x.coords, y.coords, F, step=step, cut_guard=cut_guard)


def mixed_det(x: SpherePoint, y: SpherePoint, step=HESS_STEP, cut_guard=CUT_GUARD) -> float:
    return float(mixed_det_array(x.coords, y.coords, step=step, cut_guard=cut_guard))
