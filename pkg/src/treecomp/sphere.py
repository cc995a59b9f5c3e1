"""Closed-form geometry of the round unit sphere: exp, log, distance, d(exp).

Points are unit vectors in R^(d+1); tangent vectors at p are ambient vectors
orthogonal to p.  All maps are exact formulas, no integration.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-12


class AntipodalLog(ValueError):
    pass


class ZeroBaseVector(ValueError):
    pass


def check_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    nrm = np.linalg.norm(p)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"not a unit vector (norm {nrm:.12g})")
    return p / nrm


def check_tangent(p, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    inner = float(v @ p)
    if abs(inner) > 1e-9 * max(1.0, np.linalg.norm(v)):
        raise ValueError(f"vector not tangent at base point (inner {inner:.3g})")
    return v - inner * np.asarray(p)


def dist(p, q) -> float:
    """Angular distance arccos<p, q> in [0, pi]."""
    return float(np.arccos(np.clip(np.dot(p, q), -1.0, 1.0)))


def exp(p, v) -> np.ndarray:
    """exp_p(v) = cos|v| p + sin|v| v/|v|; the zero vector maps to p."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv < 1e-300:
        return p.copy()
    out = np.cos(nv) * p + np.sin(nv) * (v / nv)
    return out / np.linalg.norm(out)


def log(p, q) -> np.ndarray:
    """Inverse of exp on |v| < pi; raises AntipodalLog at the cut locus."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = float(np.clip(p @ q, -1.0, 1.0))
    if c <= -1.0 + 1e-14:
        raise AntipodalLog("log undefined for antipodal points")
    u = q - c * p
    nu = np.linalg.norm(u)
    if nu < 1e-15:
        return np.zeros_like(p)
    return (np.arccos(c) / nu) * u


def dexp(p, v, w) -> np.ndarray:
    """Differential of exp_p at v applied to w (Jacobi-field form).

    The radial part of w rides along the geodesic unchanged; the normal part
    is parallel-transported and scaled by sin|v|/|v|.  Requires 0 < |v| < pi.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    nv = np.linalg.norm(v)
    if nv < 1e-300:
        raise ZeroBaseVector("dexp needs a nonzero base vector; at 0 it is the identity")
    vh = v / nv
    a = float(w @ vh)
    w_perp = w - a * vh
    radial = np.cos(nv) * vh - np.sin(nv) * p
    return a * radial + (np.sin(nv) / nv) * w_perp


def dexp_inverse(p, v, y) -> np.ndarray:
    """Solve dexp(p, v, w) = y for w; y must be tangent at exp_p(v)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    nv = np.linalg.norm(v)
    if nv < 1e-300:
        raise ZeroBaseVector("dexp_inverse needs a nonzero base vector")
    sv = np.sin(nv)
    if sv < 1e-12:
        raise ValueError("dexp is singular at |v| = pi (conjugate point)")
    vh = v / nv
    radial = np.cos(nv) * vh - np.sin(nv) * p
    a = float(y @ radial)
    y_perp = y - a * radial
    return a * vh + (nv / sv) * y_perp


def transport(p, q, w) -> np.ndarray:
    """Parallel transport of w from T_p to T_q along the minimizing geodesic."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    v = log(p, q)
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return w.copy()
    vh = v / nv
    a = float(w @ vh)
    w_perp = w - a * vh
    radial = np.cos(nv) * vh - np.sin(nv) * p
    return a * radial + w_perp


def tangent_basis(p) -> np.ndarray:
    """Orthonormal basis of T_p as rows, deterministic via Householder."""
    p = np.asarray(p, dtype=float)
    d1 = p.shape[0]
    e = np.zeros(d1)
    e[0] = 1.0
    u = p - e if p[0] >= 0 else p + e
    nu = np.linalg.norm(u)
    if nu < 1e-12:
        H = np.eye(d1)
    else:
        u = u / nu
        H = np.eye(d1) - 2.0 * np.outer(u, u)
    # H maps +-e0 to p; the remaining columns span T_p
    cols = H[:, 1:]
    return cols.T.copy()


def random_point(rng, dim: int) -> np.ndarray:
    """Uniform point on S^dim (unit sphere in R^(dim+1))."""
    while True:
        x = rng.standard_normal(dim + 1)
        n = np.linalg.norm(x)
        if n > 1e-12:
            return x / n


def random_tangent(rng, p, norm: float | None = None) -> np.ndarray:
    """Random tangent vector at p; direction uniform, given norm (default 1)."""
    p = np.asarray(p, dtype=float)
    while True:
        x = rng.standard_normal(p.shape[0])
        x -= (x @ p) * p
        n = np.linalg.norm(x)
        if n > 1e-12:
            x /= n
            break
    return x if norm is None else norm * x


def sample_points(rng, count: int, dim: int = 2, min_sep: float = 0.05,
                  max_sep: float | None = None) -> np.ndarray:
    """Sample ``count`` sphere points with pairwise angular separation inside
    (min_sep, max_sep); keeps away from antipodal pairs."""
    if max_sep is None:
        max_sep = np.pi - 0.05
    for _attempt in range(1000):
        pts = np.array([random_point(rng, dim) for _ in range(count)])
        ok = True
        for i in range(count):
            for j in range(i + 1, count):
                d = dist(pts[i], pts[j])
                if not (min_sep < d < max_sep):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return pts
    raise RuntimeError("could not sample separated sphere points")
