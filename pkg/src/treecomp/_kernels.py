"""Hot numeric kernels: Dykstra projections, simplex grid search, direction descent.

Every kernel exists in two flavors: a numba ``@njit`` build of the loop-style
reference code (default) and a pure numpy path.  Set ``TREECOMP_DISABLE_NUMBA=1``
to force the numpy path; it is also selected automatically when numba is not
importable.  ``benchmarks/bench_kernels.py`` times the two paths against each
other.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("TREECOMP_DISABLE_NUMBA", "0") == "1"

try:
    if _DISABLE:
        raise ImportError("numba disabled by TREECOMP_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):  # no-op decorator
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# Status codes shared with solver.py
FEASIBLE = 0
INFEASIBLE = 1
UNDECIDED = 2

# Constraint functional types on the Gram matrix G
FT_EUCLID_PAIR = 0  # G[i,i] + G[j,j] - 2 G[i,j]
FT_ENTRY = 1        # G[i,j]  (spherical cosine entry)
FT_DIAG = 2         # G[i,i]

# Relation codes; frel is the functional sense, crel the check sense
REL_EQ = 0
REL_GE = 1
REL_LE = 2


def _dykstra_impl(G, P, Q, ci, cj, ftype, frel, crel, rhs, ang,
                  feas_tol, infeas_tol, gaps, viols, start_it, end_it, min_iter):
    """Two-block Dykstra: PSD cone vs. constraint polyhedron.

    The polyhedron projection runs an inner per-constraint Dykstra sweep
    (fresh corrections each outer cycle, fixed lexicographic order given by
    the constraint arrays).  Resumable: G, P, Q and the gap/violation
    histories are caller state; iterations run (start_it, end_it].  Returns
    (status, psd_point, iterations, max_violation, gap).  Violations are
    measured at the PSD point: squared distances for Euclidean constraints,
    angular distances for spherical entries (the caller pre-normalizes
    Euclidean targets to unit scale).
    """
    k = G.shape[0]
    m = ci.shape[0]
    ecorr = np.zeros(m)
    status = UNDECIDED
    it_done = start_it
    v = np.inf
    gap = np.inf
    Y = G.copy()
    for it in range(start_it + 1, end_it + 1):
        it_done = it
        A = G + P
        A = 0.5 * (A + A.T)
        lam, V = np.linalg.eigh(A)
        for a in range(k):
            if lam[a] < 0.0:
                lam[a] = 0.0
        Y = (V * lam) @ V.T
        Y = 0.5 * (Y + Y.T)
        P[:, :] = A - Y

        v = 0.0
        for c in range(m):
            i = ci[c]
            j = cj[c]
            if ftype[c] == FT_EUCLID_PAIR:
                cur = Y[i, i] + Y[j, j] - 2.0 * Y[i, j]
                t = rhs[c]
            elif ftype[c] == FT_ENTRY:
                x = Y[i, j]
                if x > 1.0:
                    x = 1.0
                elif x < -1.0:
                    x = -1.0
                cur = np.arccos(x)
                t = ang[c]
            else:
                cur = Y[i, i]
                t = rhs[c]
            r = cur - t
            if crel[c] == REL_EQ:
                viol = abs(r)
            elif crel[c] == REL_GE:
                viol = -r if r < 0.0 else 0.0
            else:
                viol = r if r > 0.0 else 0.0
            if viol > v:
                v = viol
        if v <= feas_tol:
            status = FEASIBLE
            gap = 0.0
            break

        B = Y + Q
        Z = B.copy()
        for c in range(m):
            ecorr[c] = 0.0
        for _sweep in range(60):
            move = 0.0
            for c in range(m):
                i = ci[c]
                j = cj[c]
                if ftype[c] == FT_EUCLID_PAIR:
                    # functional matrix A: ii=jj=1, ij=ji=-1, |A|^2 = 4
                    val = Z[i, i] + Z[j, j] - 2.0 * Z[i, j] + 4.0 * ecorr[c]
                    d = val - rhs[c]
                    if frel[c] == REL_EQ:
                        tt = d / 4.0
                    elif frel[c] == REL_GE:
                        tt = d / 4.0 if d < 0.0 else 0.0
                    else:
                        tt = d / 4.0 if d > 0.0 else 0.0
                    coef = ecorr[c] - tt
                    if coef != 0.0:
                        Z[i, i] += coef
                        Z[j, j] += coef
                        Z[i, j] -= coef
                        Z[j, i] -= coef
                        am = 2.0 * abs(coef)
                        if am > move:
                            move = am
                    ecorr[c] = tt
                elif ftype[c] == FT_ENTRY:
                    u = Z[i, j] + ecorr[c]
                    if frel[c] == REL_EQ:
                        p = rhs[c]
                    elif frel[c] == REL_GE:
                        p = u if u > rhs[c] else rhs[c]
                    else:
                        p = u if u < rhs[c] else rhs[c]
                    am = abs(p - Z[i, j])
                    if am > move:
                        move = am
                    Z[i, j] = p
                    Z[j, i] = p
                    ecorr[c] = u - p
                else:
                    u = Z[i, i] + ecorr[c]
                    p = rhs[c]
                    am = abs(p - Z[i, i])
                    if am > move:
                        move = am
                    Z[i, i] = p
                    ecorr[c] = u - p
            if move <= 1e-14:
                break
        gap = 0.0
        for i in range(k):
            for j in range(k):
                d = Y[i, j] - Z[i, j]
                gap += d * d
        gap = np.sqrt(gap)
        Q[:, :] = B - Z
        G[:, :] = Z
        gaps[it - 1] = gap
        viols[it - 1] = v

        if it >= min_iter and it % 50 == 0 and v > 10.0 * feas_tol and gap > infeas_tol:
            w0 = (9 * it) // 10
            gmax = 0.0
            gmin = 1e300
            vmax = 0.0
            vmin = 1e300
            for a in range(w0 - 1, it):
                g = gaps[a]
                if g > gmax:
                    gmax = g
                if g < gmin:
                    gmin = g
                g = viols[a]
                if g > vmax:
                    vmax = g
                if g < vmin:
                    vmin = g
            anchor_g = gaps[(7 * it) // 10 - 1]
            anchor_v = viols[(7 * it) // 10 - 1]
            # both series must have plateaued, not merely decay slowly
            if (gmax - gmin <= 0.02 * gmax and gap >= 0.9 * anchor_g
                    and vmax - vmin <= 0.05 * vmax and v >= 0.9 * anchor_v):
                status = INFEASIBLE
                break
    return status, Y, it_done, v, gap


def _simplex_grid_impl(M, divisor, keep):
    """Exhaustively evaluate s.M.s on the simplex grid {c/divisor}.

    Compositions of ``divisor`` into n parts are enumerated in descending
    lexicographic order; returns the ``keep`` best grid points (ties keep the
    earliest composition).
    """
    n = M.shape[0]
    c = np.zeros(n, np.int64)
    c[0] = divisor
    best_vals = np.full(keep, np.inf)
    best_pts = np.zeros((keep, n))
    inv = 1.0 / divisor
    while True:
        val = 0.0
        for i in range(n):
            si = c[i]
            if si != 0:
                row = 0.0
                for j in range(n):
                    row += M[i, j] * c[j]
                val += si * row
        val *= inv * inv
        if val < best_vals[keep - 1]:
            pos = keep - 1
            while pos > 0 and best_vals[pos - 1] > val:
                pos -= 1
            for q in range(keep - 1, pos, -1):
                best_vals[q] = best_vals[q - 1]
                for j in range(n):
                    best_pts[q, j] = best_pts[q - 1, j]
            best_vals[pos] = val
            for j in range(n):
                best_pts[pos, j] = c[j] * inv
        if c[n - 1] == divisor:
            break
        j = n - 2
        while c[j] == 0:
            j -= 1
        c[j] -= 1
        s = 1
        for q in range(j + 1, n):
            s += c[q]
            c[q] = 0
        c[j + 1] = s
    return best_vals, best_pts


def _proj_simplex(y):
    """Euclidean projection onto {s >= 0, sum s = 1} (sort-based)."""
    n = y.shape[0]
    u = np.sort(y)[::-1]
    css = 0.0
    rho = 0
    theta = 0.0
    for i in range(n):
        css += u[i]
        t = (css - 1.0) / (i + 1)
        if u[i] - t > 0.0:
            rho = i
            theta = t
    out = y - theta
    for i in range(n):
        if out[i] < 0.0:
            out[i] = 0.0
    return out


def _simplex_polish_impl(M, starts, iters):
    """Projected-gradient descent of s.M.s from each start, then a face-QP refine.

    Deterministic: fixed iteration budget, fixed backtracking schedule.
    Returns (best value, best point).
    """
    q = starts.shape[0]
    n = M.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            a = abs(M[i, j])
            if a > scale:
                scale = a
    if scale == 0.0:
        scale = 1.0
    best_val = np.inf
    best_s = starts[0].copy()
    for a in range(q):
        s = _proj_simplex(starts[a].copy())
        val = s @ (M @ s)
        step = 0.25 / scale
        for _it in range(iters):
            g = 2.0 * (M @ s)
            s_new = _proj_simplex(s - step * g)
            val_new = s_new @ (M @ s_new)
            if val_new < val - 1e-18 * scale:
                s = s_new
                val = val_new
                step *= 1.25
            else:
                step *= 0.5
                if step < 1e-14 / scale:
                    break
        # exact KKT solve on the active face; accept only if it stays feasible
        nact = 0
        for i in range(n):
            if s[i] > 1e-10:
                nact += 1
        if nact > 0:
            idx = np.zeros(nact, np.int64)
            w = 0
            for i in range(n):
                if s[i] > 1e-10:
                    idx[w] = i
                    w += 1
            K = np.zeros((nact + 1, nact + 1))
            b = np.zeros(nact + 1)
            for r in range(nact):
                for cc in range(nact):
                    K[r, cc] = 2.0 * M[idx[r], idx[cc]]
                K[r, nact] = 1.0
                K[nact, r] = 1.0
            b[nact] = 1.0
            sol = np.linalg.lstsq(K, b, rcond=-1.0)[0]
            ok = True
            for r in range(nact):
                if sol[r] < -1e-12 or not np.isfinite(sol[r]):
                    ok = False
            if ok:
                s_qp = np.zeros(n)
                tot = 0.0
                for r in range(nact):
                    x = sol[r]
                    if x < 0.0:
                        x = 0.0
                    s_qp[idx[r]] = x
                    tot += x
                if tot > 0.0:
                    for i in range(n):
                        s_qp[i] /= tot
                    val_qp = s_qp @ (M @ s_qp)
                    if val_qp <= val:
                        s = s_qp
                        val = val_qp
        if val < best_val:
            best_val = val
            best_s = s.copy()
    return best_val, best_s


def _descend_directions_impl(alpha, xi0, max_iter, stop_energy):
    """Minimize sum of phi(angle(xi_i, xi_j) - alpha_ij) over unit rows of xi.

    phi(x) = x^2 for x < 0 else 0.  Projected gradient with backtracking.
    Returns (energy, xi, iterations).
    """
    k, dim = xi0.shape
    xi = xi0.copy()
    for i in range(k):
        nrm = 0.0
        for d in range(dim):
            nrm += xi[i, d] * xi[i, d]
        nrm = np.sqrt(nrm)
        for d in range(dim):
            xi[i, d] /= nrm

    def energy_of(x):
        e = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                ct = 0.0
                for d in range(dim):
                    ct += x[i, d] * x[j, d]
                if ct > 1.0:
                    ct = 1.0
                elif ct < -1.0:
                    ct = -1.0
                diff = np.arccos(ct) - alpha[i, j]
                if diff < 0.0:
                    e += diff * diff
        return e

    e_cur = energy_of(xi)
    step = 0.5
    it_done = 0
    grad = np.zeros((k, dim))
    for it in range(max_iter):
        it_done = it + 1
        if e_cur <= stop_energy:
            break
        for i in range(k):
            for d in range(dim):
                grad[i, d] = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                ct = 0.0
                for d in range(dim):
                    ct += xi[i, d] * xi[j, d]
                if ct > 1.0:
                    ct = 1.0
                elif ct < -1.0:
                    ct = -1.0
                diff = np.arccos(ct) - alpha[i, j]
                if diff < 0.0:
                    st = np.sqrt(1.0 - ct * ct)
                    if st < 1e-9:
                        st = 1e-9
                    # d(theta)/d(xi_i), tangent-projected, is -(xi_j - ct xi_i)/st
                    coef = -2.0 * diff / st
                    for d in range(dim):
                        grad[i, d] += coef * (xi[j, d] - ct * xi[i, d])
                        grad[j, d] += coef * (xi[i, d] - ct * xi[j, d])
        gnorm = 0.0
        for i in range(k):
            for d in range(dim):
                gnorm += grad[i, d] * grad[i, d]
        gnorm = np.sqrt(gnorm)
        if gnorm < 1e-18:
            break
        accepted = False
        for _bt in range(40):
            trial = xi - step * grad
            for i in range(k):
                nrm = 0.0
                for d in range(dim):
                    nrm += trial[i, d] * trial[i, d]
                nrm = np.sqrt(nrm)
                for d in range(dim):
                    trial[i, d] /= nrm
            e_new = energy_of(trial)
            if e_new < e_cur:
                xi = trial
                e_cur = e_new
                step *= 1.4
                if step > 2.0:
                    step = 2.0
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return e_cur, xi, it_done


def _compositions_np(total, parts):
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions_np(total - first, parts - 1)
        col = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack((col, rest)))
    return np.vstack(blocks)


def simplex_grid_numpy(M, divisor, keep):
    """Vectorized numpy twin of the grid kernel (same order, same tie rule)."""
    n = M.shape[0]
    if n == 1:
        return np.array([M[0, 0]]), np.array([[1.0]])
    vals_all = []
    pts_all = []
    for first in range(divisor, -1, -1):
        rest = _compositions_np(divisor - first, n - 1)
        block = np.hstack(
            (np.full((rest.shape[0], 1), first, dtype=np.int64), rest)
        ).astype(np.float64) / divisor
        vals = np.einsum("bi,ij,bj->b", block, M, block)
        order = np.argsort(vals, kind="stable")[:keep]
        vals_all.append(vals[order])
        pts_all.append(block[order])
    vals_cat = np.concatenate(vals_all)
    pts_cat = np.vstack(pts_all)
    order = np.argsort(vals_cat, kind="stable")[:keep]
    out_vals = np.full(keep, np.inf)
    out_pts = np.zeros((keep, n))
    out_vals[: len(order)] = vals_cat[order]
    out_pts[: len(order)] = pts_cat[order]
    return out_vals, out_pts


# pure numpy/python twins, importable regardless of the active path
dykstra_numpy = _dykstra_impl
simplex_polish_numpy = _simplex_polish_impl
descend_directions_numpy = _descend_directions_impl

if NUMBA_ENABLED:
    _proj_simplex = njit(cache=True)(_proj_simplex)
    dykstra = njit(cache=True)(_dykstra_impl)
    simplex_grid = njit(cache=True)(_simplex_grid_impl)
    simplex_polish = njit(cache=True)(_simplex_polish_impl)
    descend_directions = njit(cache=True)(_descend_directions_impl)
else:
    dykstra = dykstra_numpy
    simplex_grid = simplex_grid_numpy
    simplex_polish = simplex_polish_numpy
    descend_directions = descend_directions_numpy
