"""Local polynomial least-squares fits on unstructured spherical node sets.

All fits work in normal coordinates ``s = F^T log_x(x_j)`` at the fit centre,
so the quadratic coefficient of a scalar fit is the covariant Hessian.
"""
from __future__ import annotations

import numpy as np

from . import sphere
from .errors import DegenerateNeighborhood

COND_MAX = 1e8


def _quad_design(S):
    """Columns [s_a, s_a s_b / (1 + [a == b])] for a <= b; shape (..., k, n + n(n+1)/2)."""
    n = S.shape[-1]
    cols = [S[..., a] for a in range(n)]
    for a in range(n):
        for b in range(a, n):
            cols.append(S[..., a] * S[..., b] * (0.5 if a == b else 1.0))
    return np.stack(cols, axis=-1)


def _unpack_hessian(coef, n):
    H = np.empty(coef.shape[:-1] + (n, n))
    k = n
    for a in range(n):
        for b in range(a, n):
            H[..., a, b] = coef[..., k]
            H[..., b, a] = coef[..., k]
            k += 1
    return H


def _weighted_solve(A, y, w, cond_max=COND_MAX):
    """Batched weighted least squares ``A c ~ y``; y is (m, k) or (m, k, q).

    Raises DegenerateNeighborhood when the column-scaled design is worse
    conditioned than ``cond_max``.  Returns coefficients of shape (m, p, q).
    """
    if y.ndim == A.ndim - 1:
        y = y[..., None]
    sw = np.sqrt(w)[..., None]
    Aw = A * sw
    yw = y * sw
    scale = np.linalg.norm(Aw, axis=-2, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    As = Aw / scale
    sv = np.linalg.svd(As, compute_uv=False)
    cond = sv[..., 0] / np.maximum(sv[..., -1], 1e-300)
    if np.any(cond > cond_max):
        bad = int(np.argmax(cond))
        raise DegenerateNeighborhood(f"local fit at node {bad} has condition number {cond[bad]:.3g}")
    Q, R = np.linalg.qr(As)
    coef = np.linalg.solve(R, np.swapaxes(Q, -1, -2) @ yw)
    return coef / np.swapaxes(scale, -1, -2)


def neighbor_coords(nodes, k=None):
    """Frames (N, d, n), neighbour indices (N, k) and normal coordinates (N, k, n)."""
    idx = nodes.neighbors if k is None else nodes.neighbors[:, :k]
    X = nodes.points
    F = sphere.tangent_frames(X)
    L = sphere.log(X[:, None, :], X[idx])
    S = np.einsum("mdn,mkd->mkn", F, L)
    return F, idx, S


def _gauss_weights(S):
    r2 = np.sum(S * S, axis=-1)
    scale = np.max(r2, axis=-1, keepdims=True)
    return np.exp(-r2 / scale)


def quadratic_fit(values, nodes, k=None):
    """Gradient (N, n) and covariant Hessian (N, n, n) of a nodal scalar field.

    Fits ``u_j - u_i = g.s + s^T H s / 2`` over the k nearest neighbours with
    Gaussian weights; also returns the frames used.
    """
    u = np.asarray(values, dtype=float)
    F, idx, S = neighbor_coords(nodes, k)
    n = nodes.n
    need = n + n * (n + 1) // 2
    if S.shape[1] < need + 1:
        raise DegenerateNeighborhood(f"quadratic fit needs at least {need + 1} neighbours")
    A = _quad_design(S)
    du = u[idx] - u[:, None]
    coef = _weighted_solve(A, du, _gauss_weights(S))[..., 0]
    return coef[:, :n], _unpack_hessian(coef, n), F


def interpolate(values, nodes, query, k=None):
    """Value of a nodal field at arbitrary points by a local quadratic fit.

    The fit is centred at the query point, in its own normal coordinates.
    """
    v = np.asarray(values, dtype=float)
    Q = np.atleast_2d(np.asarray(query, dtype=float))
    n = nodes.n
    kk = k or nodes.k_neighbors
    idx = nodes.nearest(Q, k=kk)
    F = sphere.tangent_frames(Q)
    L = sphere.log(Q[:, None, :], nodes.points[idx], cut_guard=None)
    S = np.einsum("mdn,mkd->mkn", F, L)
    A = np.concatenate([np.ones(S.shape[:-1] + (1,)), _quad_design(S)], axis=-1)
    coef = _weighted_solve(A, v[idx], _gauss_weights(S) + 1e-12)[..., 0]
    return coef[:, 0]
