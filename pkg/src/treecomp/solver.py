"""Gram-matrix feasibility for Euclidean and spherical comparison problems.

A problem asks for k model points whose pairwise distances satisfy
Equal/AtLeast/AtMost targets.  Euclidean instances work on the Gram matrix
(squared distances are linear functionals); spherical instances on the
unit-diagonal cosine Gram.  The solver runs Dykstra-corrected alternating
projections between the PSD cone and the constraint polyhedron and returns a
Certificate: a witness configuration, a converged infeasibility gap, or
Undecided.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .metric import FiniteMetricSpace
from .trees import (
    AT_LEAST,
    AT_MOST,
    EQUAL,
    FREE,
    ComparisonTree,
    ConstraintGraph,
    resolve_assignment,
    tree_to_constraints,
)

EUCLIDEAN = "euclidean"
SPHERICAL = "spherical"

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
UNDECIDED = "Undecided"

_STATUS = {0: FEASIBLE, 1: INFEASIBLE, 2: UNDECIDED}


class InvalidProblem(ValueError):
    pass


class DistanceOutOfRange(InvalidProblem):
    def __init__(self, pair, value):
        super().__init__(f"spherical target {value:g} for pair {pair} outside (0, pi)")
        self.pair = pair
        self.value = value


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class GramProblem:
    """k model points; targets maps (i, j) to (squared distance, relation)."""

    k: int
    targets: dict[tuple[int, int], tuple[float, str]]
    geometry: str = EUCLIDEAN

    def __post_init__(self):
        if self.k < 1:
            raise InvalidProblem("need at least one model point")
        if self.geometry not in (EUCLIDEAN, SPHERICAL):
            raise InvalidProblem(f"unknown geometry {self.geometry!r}")
        for (i, j), (c2, rel) in self.targets.items():
            if not (0 <= i < j < self.k):
                raise InvalidProblem(f"bad pair ({i},{j})")
            if rel not in (EQUAL, AT_LEAST, AT_MOST, FREE):
                raise InvalidProblem(f"bad relation {rel!r}")
            if not np.isfinite(c2) or c2 < 0:
                raise InvalidProblem(f"bad squared target {c2!r} for pair ({i},{j})")

    def constrained_pairs(self):
        return sorted((p, t) for p, t in self.targets.items() if t[1] != FREE)


@dataclass(frozen=True)
class Certificate:
    """Solve outcome; coordinates only for Feasible, row-major k x k."""

    status: str
    coordinates: np.ndarray | None
    max_violation: float
    gap: float
    iterations: int
    seed: int
    problem: GramProblem

    def to_json_dict(self) -> dict:
        echo = {
            "k": self.problem.k,
            "geometry": self.problem.geometry,
            "targets": [
                [int(i), int(j), float(c2), rel]
                for (i, j), (c2, rel) in sorted(self.problem.targets.items())
            ],
        }
        return {
            "status": self.status,
            "coordinates": None if self.coordinates is None
            else [[float(x) for x in row] for row in self.coordinates],
            "max_violation": float(self.max_violation),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
            "seed": int(self.seed),
            "problem": echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def problem_from_tree(space: FiniteMetricSpace, tree: ComparisonTree, assignment,
                      geometry: str = EUCLIDEAN) -> GramProblem:
    """Tree comparison instance: Equal on edges, AtLeast elsewhere."""
    points = resolve_assignment(tree, assignment)
    cg = tree_to_constraints(tree)
    targets = {}
    for (i, j), rel in cg.relation.items():
        d = float(space.dist[points[i], points[j]])
        targets[(i, j)] = (d * d, rel)
    return GramProblem(k=tree.n_vertices, targets=targets, geometry=geometry)


def problem_from_graph(space: FiniteMetricSpace, cg: ConstraintGraph, points=None,
                       geometry: str = EUCLIDEAN) -> GramProblem:
    """Constraint-graph instance over explicit point indices (default identity)."""
    if points is None:
        points = list(range(cg.n))
    targets = {}
    for (i, j), rel in cg.relation.items():
        d = float(space.dist[points[i], points[j]])
        targets[(i, j)] = (d * d, rel)
    return GramProblem(k=cg.n, targets=targets, geometry=geometry)


def _build_euclidean_arrays(problem, scale):
    ci, cj, ftype, frel, crel, rhs, ang = [], [], [], [], [], [], []
    rel_code = {EQUAL: _kernels.REL_EQ, AT_LEAST: _kernels.REL_GE, AT_MOST: _kernels.REL_LE}
    for (i, j), (c2, rel) in problem.constrained_pairs():
        ci.append(i)
        cj.append(j)
        ftype.append(_kernels.FT_EUCLID_PAIR)
        frel.append(rel_code[rel])
        crel.append(rel_code[rel])
        rhs.append(c2 / scale)
        ang.append(0.0)
    return ci, cj, ftype, frel, crel, rhs, ang


def _build_spherical_arrays(problem):
    ci, cj, ftype, frel, crel, rhs, ang = [], [], [], [], [], [], []
    for i in range(problem.k):
        ci.append(i)
        cj.append(i)
        ftype.append(_kernels.FT_DIAG)
        frel.append(_kernels.REL_EQ)
        crel.append(_kernels.REL_EQ)
        rhs.append(1.0)
        ang.append(0.0)
    # distance relation flips on cosines: larger angle = smaller cosine
    fmap = {EQUAL: _kernels.REL_EQ, AT_LEAST: _kernels.REL_LE, AT_MOST: _kernels.REL_GE}
    cmap = {EQUAL: _kernels.REL_EQ, AT_LEAST: _kernels.REL_GE, AT_MOST: _kernels.REL_LE}
    for (i, j), (c2, rel) in problem.constrained_pairs():
        c = float(np.sqrt(c2))
        if not 0.0 < c < np.pi:
            raise DistanceOutOfRange((i, j), c)
        ci.append(i)
        cj.append(j)
        ftype.append(_kernels.FT_ENTRY)
        frel.append(fmap[rel])
        crel.append(cmap[rel])
        rhs.append(np.cos(c))
        ang.append(c)
    return ci, cj, ftype, frel, crel, rhs, ang


def _presolve(problem: GramProblem):
    """Triangle-rigidity presolve for Euclidean problems.

    Paths of Equal/AtMost edges bound every model distance above, so an
    AtLeast target equal to its chain bound is forced to equality, and a
    target decisively above the bound is infeasible outright.  Forced
    equalities through a midpoint pin the middle model point onto a segment;
    the returned null vectors span those affine dependencies (a facial
    reduction of the Gram cone) for use by the local refinement.

    Returns (upgraded problem, null vector list, violated pair or None).
    """
    if problem.geometry == SPHERICAL:
        return problem, [], None
    k = problem.k
    dub = np.full((k, k), np.inf)
    np.fill_diagonal(dub, 0.0)
    dist_of = {}
    for (i, j), (c2, rel) in problem.targets.items():
        dist_of[(i, j)] = np.sqrt(c2)
        if rel in (EQUAL, AT_MOST):
            d = np.sqrt(c2)
            if d < dub[i, j]:
                dub[i, j] = dub[j, i] = d
    for m in range(k):
        dub = np.minimum(dub, dub[:, m:m + 1] + dub[m:m + 1, :])
    dscale = max(dist_of.values(), default=1.0) or 1.0
    tol = 1e-11 * dscale
    upgraded = {}
    violated = None
    for (i, j), (c2, rel) in problem.targets.items():
        if rel == AT_LEAST:
            t = np.sqrt(c2)
            if t > dub[i, j] + 1e-6 * dscale:
                violated = (i, j)
            elif t >= dub[i, j] - tol:
                rel = EQUAL
        upgraded[(i, j)] = (c2, rel)
    new_problem = GramProblem(k=k, targets=upgraded, geometry=problem.geometry)
    # forced-collinear triples: Equal (i,w), (w,j), (i,j) with additive lengths
    eq = {}
    for (i, j), (c2, rel) in upgraded.items():
        if rel == EQUAL:
            eq[(i, j)] = np.sqrt(c2)
            eq[(j, i)] = np.sqrt(c2)
    nulls = []
    for w in range(k):
        partners = sorted(i for i in range(k) if (i, w) in eq)
        for a in range(len(partners)):
            for b in range(a + 1, len(partners)):
                i, j = partners[a], partners[b]
                if (i, j) not in eq:
                    continue
                if abs(eq[(i, j)] - eq[(i, w)] - eq[(w, j)]) <= tol and eq[(i, j)] > tol:
                    lam = eq[(i, w)] / eq[(i, j)]
                    n = np.zeros(k)
                    n[w] = 1.0
                    n[i] = -(1.0 - lam)
                    n[j] = -lam
                    nulls.append(n)
    return new_problem, nulls, violated


def _reduction_basis(k: int, nulls):
    """Orthonormal basis of the complement of the forced affine dependencies."""
    if not nulls:
        return None
    N = np.column_stack(nulls)
    U, S, _Vt = np.linalg.svd(N, full_matrices=True)
    rank = int((S > 1e-10).sum())
    if rank == 0:
        return None
    return U[:, rank:]


def _mds_start(problem: GramProblem):
    """Closed-form candidate configuration when every pair is constrained.

    Treats all targets as equalities: classical MDS (double centering plus
    eigenvalue clamping) for Euclidean problems, the cosine matrix for
    spherical ones.  Exactly realizable instances (planted trees, identity
    witnesses) come out as exact witnesses; otherwise the point is still a
    well-placed start for the local refinement.
    """
    k = problem.k
    cons = problem.constrained_pairs()
    if len(cons) < k * (k - 1) // 2:
        return None
    D2 = np.zeros((k, k))
    for (i, j), (c2, _rel) in cons:
        D2[i, j] = D2[j, i] = c2
    if problem.geometry == SPHERICAL:
        G = np.cos(np.sqrt(D2))
        np.fill_diagonal(G, 1.0)
    else:
        J = np.eye(k) - np.full((k, k), 1.0 / k)
        G = -0.5 * (J @ D2 @ J)
    lam, V = np.linalg.eigh(0.5 * (G + G.T))
    lam = np.clip(lam, 0.0, None)
    X = V * np.sqrt(lam)
    if problem.geometry == SPHERICAL:
        nrm = np.linalg.norm(X, axis=1, keepdims=True)
        nrm[nrm == 0.0] = 1.0
        X = X / nrm
    return X


def _initial_gram(problem, scale, seed):
    rng = np.random.default_rng(seed)
    k = problem.k
    X = rng.standard_normal((k, k))
    if problem.geometry == SPHERICAL:
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    else:
        cons = problem.constrained_pairs()
        mean_c2 = np.mean([c2 / scale for _, (c2, _r) in cons]) if cons else 1.0
        X *= np.sqrt(max(mean_c2, 1e-30) / (2.0 * k))
    return X @ X.T


def _gauss_newton_polish(problem, X0, feas_tol, scale, iters: int = 250,
                         basis=None):
    """Drive active squared-distance residuals to zero by damped Gauss-Newton.

    Used when alternating projections stall close to feasibility (tight
    witnesses sit on the PSD boundary, where projections converge
    sublinearly).  With a facial-reduction ``basis`` E the iteration runs on
    reduced coordinates X = E Xf, so forced collinearities hold identically
    and stop degrading the Jacobian.  Returns verified coordinates or None;
    a None simply sends the caller back to the projection loop, so this
    cannot flip a verdict.
    """
    if problem.geometry == SPHERICAL:
        return None
    X0 = np.array(X0, dtype=float)
    k, kd = X0.shape
    cons = problem.constrained_pairs()
    if basis is None:
        basis = np.eye(k)
    kf = basis.shape[1]
    Xf = basis.T @ X0

    def positions(Zf):
        return basis @ Zf

    def residuals(Zf):
        """Active residuals: equalities always, inequalities when violated."""
        Z = positions(Zf)
        rows = []
        vals = []
        for (i, j), (c2, rel) in cons:
            diff = Z[i] - Z[j]
            r = (float(diff @ diff) - c2) / scale
            active = (rel == EQUAL or (rel == AT_LEAST and r < 0.0)
                      or (rel == AT_MOST and r > 0.0))
            if active:
                rows.append((i, j, diff))
                vals.append(r)
        return rows, np.array(vals)

    damp = 1e-10
    merit_checkpoint = np.inf
    for _round in range(iters):
        rows, r = residuals(Xf)
        if r.size == 0:
            break
        worst = float(np.abs(r).max())
        if worst <= 0.25 * feas_tol:
            break
        merit = float(r @ r)
        if _round % 20 == 19:
            # fail fast when the merit has stopped contracting (infeasible
            # instances level out at a positive local minimum)
            if merit > 0.5 * merit_checkpoint:
                break
            merit_checkpoint = merit
        J = np.zeros((len(rows), kf * kd))
        for row, (i, j, diff) in enumerate(rows):
            coef = basis[i] - basis[j]
            J[row] = np.outer(coef, 2.0 * diff / scale).reshape(-1)
        A = J.T @ J + damp * np.eye(kf * kd)
        delta = np.linalg.solve(A, -(J.T @ r)).reshape(kf, kd)
        # backtrack on the sum-of-squares merit: freshly violated tight
        # inequalities enter only quadratically, so small steps always help
        stepped = False
        t = 1.0
        for _try in range(25):
            _rows, r_new = residuals(Xf + t * delta)
            if float(r_new @ r_new) < merit * (1.0 - 1e-3 * t):
                Xf = Xf + t * delta
                damp = max(damp / 3.0, 1e-12)
                stepped = True
                break
            t *= 0.5
        if not stepped:
            damp *= 100.0
            if damp > 1e6:
                break
    X = positions(Xf)
    check = verify_certificate(problem, X, tol=feas_tol)
    return X if check.ok else None


def solve(problem: GramProblem, feas_tol: float = 1e-9, infeas_tol: float = 1e-7,
          max_iter: int = 200000, seed: int = 0, min_iter: int = 1500,
          warm_start: bool = True) -> Certificate:
    """Decide feasibility; deterministic for fixed (problem, options, seed).

    Euclidean targets are normalized by the largest squared distance, making
    violations, the gap and the verdict scale covariant.  ``warm_start``
    first tries the closed-form MDS/cosine witness; instances whose targets
    are exactly realizable never enter the projection loop.
    """
    work, nulls, violated = _presolve(problem)
    basis = _reduction_basis(problem.k, nulls)
    if violated is not None:
        # an AtLeast target exceeds its Equal/AtMost chain bound outright
        return Certificate(status=INFEASIBLE, coordinates=None,
                           max_violation=np.inf, gap=np.inf, iterations=0,
                           seed=int(seed), problem=problem)
    if warm_start:
        X = _mds_start(work)
        if X is not None:
            check = verify_certificate(problem, X, tol=feas_tol)
            if check.ok:
                return Certificate(status=FEASIBLE, coordinates=X,
                                   max_violation=check.worst_violation, gap=0.0,
                                   iterations=0, seed=int(seed), problem=problem)
            if problem.geometry == EUCLIDEAN:
                # the MDS point is a strong start for the local refinement;
                # thin-but-feasible instances usually close right here
                cons0 = work.constrained_pairs()
                scale0 = max((c2 for _, (c2, _r) in cons0), default=1.0) or 1.0
                polished = _gauss_newton_polish(work, X, feas_tol, scale0,
                                                basis=basis)
                if polished is not None:
                    check = verify_certificate(problem, polished, tol=feas_tol)
                    if check.ok:
                        return Certificate(status=FEASIBLE, coordinates=polished,
                                           max_violation=check.worst_violation,
                                           gap=0.0, iterations=0, seed=int(seed),
                                           problem=problem)
    if work.geometry == SPHERICAL:
        scale = 1.0
        arrays = _build_spherical_arrays(work)
    else:
        cons = work.constrained_pairs()
        scale = max((c2 for _, (c2, _r) in cons), default=0.0)
        if scale <= 0.0:
            scale = 1.0
        arrays = _build_euclidean_arrays(work, scale)
    ci, cj, ftype, frel, crel, rhs, ang = (np.asarray(a) for a in arrays)
    ci = ci.astype(np.int64)
    cj = cj.astype(np.int64)
    ftype = ftype.astype(np.int8)
    frel = frel.astype(np.int8)
    crel = crel.astype(np.int8)
    rhs = np.asarray(rhs, dtype=np.float64)
    ang = np.asarray(ang, dtype=np.float64)
    G0 = _initial_gram(work, scale, seed)

    def extract(Ymat):
        lam, V = np.linalg.eigh(0.5 * (Ymat + Ymat.T))
        lam = np.clip(lam, 0.0, None)
        C = V * np.sqrt(lam)
        if problem.geometry == SPHERICAL:
            nrm = np.linalg.norm(C, axis=1, keepdims=True)
            nrm[nrm == 0.0] = 1.0
            return C / nrm
        return C * np.sqrt(scale)

    # resumable projection runs with a Gauss-Newton witness attempt at chunk
    # boundaries; tight feasible instances stall sublinearly in projections
    k = problem.k
    G = np.ascontiguousarray(G0)
    P = np.zeros((k, k))
    Q = np.zeros((k, k))
    gaps = np.zeros(max_iter)
    viols = np.zeros(max_iter)
    total_it = 0
    chunk = 3000
    status = UNDECIDED
    viol = np.inf
    gap = np.inf
    Y = G0
    while total_it < max_iter:
        end_it = min(total_it + chunk, max_iter)
        code, Y, iters, viol, gap = _kernels.dykstra(
            G, P, Q, ci, cj, ftype, frel, crel, rhs, ang,
            float(feas_tol), float(infeas_tol), gaps, viols,
            int(total_it), int(end_it), int(min_iter),
        )
        total_it = int(iters)
        status = _STATUS[int(code)]
        if status == FEASIBLE:
            break
        if viol <= 1e-2 or status == INFEASIBLE:
            # near-feasible: try to close the gap directly; a verified
            # witness also overturns a (then spurious) plateau verdict
            polished = _gauss_newton_polish(work, extract(Y), feas_tol, scale,
                                            basis=basis)
            if polished is not None and verify_certificate(
                    problem, polished, tol=feas_tol).ok:
                check = verify_certificate(problem, polished, tol=feas_tol)
                return Certificate(status=FEASIBLE, coordinates=polished,
                                   max_violation=check.worst_violation, gap=0.0,
                                   iterations=total_it, seed=int(seed),
                                   problem=problem)
        if status == INFEASIBLE:
            break
        chunk *= 2

    coords = None
    if status == FEASIBLE:
        coords = extract(Y)
        check = verify_certificate(problem, coords, tol=10.0 * feas_tol)
        viol = check.worst_violation
    return Certificate(
        status=status,
        coordinates=coords,
        max_violation=float(viol),
        gap=float(gap),
        iterations=int(total_it),
        seed=int(seed),
        problem=problem,
    )


def spherical_solve(problem: GramProblem, **opts) -> Certificate:
    """solve() for spherical geometry; rejects targets outside (0, pi)."""
    if problem.geometry != SPHERICAL:
        raise InvalidProblem("spherical_solve requires geometry='spherical'")
    return solve(problem, **opts)


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    worst_pair: tuple[int, int] | None
    worst_violation: float


def verify_certificate(problem: GramProblem, coordinates, tol: float = 1e-9) -> VerifyResult:
    """Recompute every pairwise distance from the coordinates and check relations.

    Euclidean violations are on squared distances, normalized by the largest
    squared target; spherical violations are angular.  Independent of the
    solver internals.
    """
    X = np.asarray(coordinates, dtype=float)
    if X.ndim != 2 or X.shape[0] != problem.k:
        raise DimensionMismatch(
            f"expected {problem.k} coordinate rows, got shape {X.shape}")
    cons = problem.constrained_pairs()
    worst = 0.0
    worst_pair = None
    if problem.geometry == SPHERICAL:
        nrm = np.linalg.norm(X, axis=1)
        unit_err = float(np.abs(nrm - 1.0).max()) if X.size else 0.0
        if unit_err > worst:
            worst = unit_err
            worst_pair = None
        U = X / np.where(nrm == 0.0, 1.0, nrm)[:, None]
        for (i, j), (c2, rel) in cons:
            c = float(np.sqrt(c2))
            cur = float(np.arccos(np.clip(U[i] @ U[j], -1.0, 1.0)))
            r = cur - c
            viol = abs(r) if rel == EQUAL else max(0.0, -r) if rel == AT_LEAST else max(0.0, r)
            if viol > worst:
                worst = viol
                worst_pair = (i, j)
    else:
        scale = max((c2 for _, (c2, _r) in cons), default=0.0)
        if scale <= 0.0:
            scale = 1.0
        for (i, j), (c2, rel) in cons:
            cur = float(((X[i] - X[j]) ** 2).sum())
            r = (cur - c2) / scale
            viol = abs(r) if rel == EQUAL else max(0.0, -r) if rel == AT_LEAST else max(0.0, r)
            if viol > worst:
                worst = viol
                worst_pair = (i, j)
    return VerifyResult(ok=bool(worst <= tol), worst_pair=worst_pair,
                        worst_violation=float(worst))


def plant_feasible(tree: ComparisonTree, ambient_dim: int, seed: int):
    """Sample one point per vertex in R^ambient_dim; the instance is feasible
    by construction (the sample is its own witness).  Returns (space,
    assignment keyed by vertex label)."""
    if ambient_dim < 1:
        raise ValueError("ambient_dim must be >= 1")
    rng = np.random.default_rng(seed)
    n = tree.n_vertices
    for _attempt in range(64):
        X = rng.standard_normal((n, ambient_dim))
        D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
        off = D[~np.eye(n, dtype=bool)]
        if n == 1 or off.min() > 1e-3:
            break
    labels = tuple(tree.label_of(v) for v in range(n))
    space = FiniteMetricSpace(labels=labels, dist=D)
    assignment = {v: v for v in range(n)}
    return space, assignment
