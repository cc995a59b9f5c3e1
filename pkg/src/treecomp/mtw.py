"""Finite-difference checks of the differential comparison conditions on the sphere.

Covers the fourth mixed derivative of squared distance (cost-curvature), the
first-variation identities, the f'' <= 1 bound along tangent segments,
superlevel-set convexity of the excess function, the bipolar witness
construction, and the 7-point probe configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sphere
from .metric import validate_metric
from .trees import parse_tree

CUT_GUARD = 1e-6

# 5-point central coefficients over offsets (-2, -1, 0, 1, 2)
_OFF = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

LIFTED = "lifted"
GEODESIC = "geodesic"


class CutLocusContact(ValueError):
    pass


class StepOutOfRange(ValueError):
    pass


class SegmentLeavesTIL(ValueError):
    pass


class OutsideTIL(ValueError):
    pass


class CutLocus(ValueError):
    pass


class NotShort(RuntimeError):
    """The adjoint of d(exp) came out expanding; impossible on the sphere."""


def _cost(x, y) -> float:
    d = sphere.dist(x, y)
    if d >= np.pi - CUT_GUARD:
        raise CutLocusContact(f"stencil point at distance {d:.6f} from cut locus")
    return 0.5 * d * d


def _check_step(step):
    if not 1e-4 < step < 1e-1:
        raise StepOutOfRange(f"step {step:g} outside (1e-4, 1e-1)")


@dataclass(frozen=True)
class MtwSample:
    """One cost-curvature evaluation; S = -(3/2) * fourth_derivative."""

    p: np.ndarray
    W: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    S: float
    fourth_derivative: float
    step: float
    variant: str

    def to_json_dict(self) -> dict:
        return {
            "p": [float(x) for x in self.p],
            "W": [float(x) for x in self.W],
            "X": [float(x) for x in self.X],
            "Y": [float(x) for x in self.Y],
            "S": float(self.S),
            "fourth_derivative": float(self.fourth_derivative),
            "step": float(self.step),
            "variant": self.variant,
        }


def _second_curve(p, W, Y, variant):
    """Curve t -> model point realizing the paper's second argument.

    ``lifted``: the straight line W + t*Y_p in T_p pushed through exp_p, where
    Y_p is the unique preimage of Y under d(exp_p) at W.  ``geodesic``: the
    geodesic exp_q(t*Y) at q = exp_p(W).  Both have velocity Y at t = 0; they
    differ in acceleration, and only the lifted curve reproduces the
    fourth-derivative condition away from W = 0.
    """
    nw = np.linalg.norm(W)
    if nw < 1e-14:
        return lambda t: sphere.exp(p, t * Y)
    if variant == LIFTED:
        Yp = sphere.dexp_inverse(p, W, Y)
        return lambda t: sphere.exp(p, W + t * Yp)
    if variant == GEODESIC:
        q = sphere.exp(p, W)
        return lambda t: sphere.exp(q, t * Y)
    raise ValueError(f"unknown variant {variant!r}")


def _fourth_mixed(p, X, curve, h):
    vals = np.empty((5, 5))
    for a in range(5):
        xa = sphere.exp(p, (_OFF[a] * h) * X)
        for b in range(5):
            vals[a, b] = _cost(xa, curve(_OFF[b] * h))
    return float(_C2 @ vals @ _C2) / h**4


def cost_curvature(p, W, X, Y, step: float = 0.02, variant: str = LIFTED,
                   refine: bool = True) -> MtwSample:
    """Fourth mixed derivative of the squared-distance cost at (p, exp_p W).

    W, X are tangent at p (|W| < pi); Y is tangent at q = exp_p(W).  Uses the
    composed 5-point stencil, with Richardson refinement across h and h/2
    when ``refine``.
    """
    _check_step(step)
    p = sphere.check_point(p)
    W = sphere.check_tangent(p, W)
    if np.linalg.norm(W) >= np.pi:
        raise OutsideTIL("|W| must be < pi")
    X = sphere.check_tangent(p, X)
    q = sphere.exp(p, W)
    Y = sphere.check_tangent(q, Y)
    curve = _second_curve(p, W, Y, variant)
    d4 = _fourth_mixed(p, X, curve, step)
    if refine:
        d4_half = _fourth_mixed(p, X, curve, step / 2.0)
        d4 = (16.0 * d4_half - d4) / 15.0
    return MtwSample(p=p, W=W, X=X, Y=Y, S=-1.5 * d4, fourth_derivative=d4,
                     step=step, variant=variant)


def mtw_symmetry_residual(p, W, X, Y, step: float = 0.02,
                          variant: str = LIFTED) -> float:
    """|S_{p,q}(X, Y) - S_{q,p}(Y, X)|; the two sides agree identically."""
    a = cost_curvature(p, W, X, Y, step=step, variant=variant)
    q = sphere.exp(p, W)
    if np.linalg.norm(W) < 1e-14:
        b = cost_curvature(p, W, Y, X, step=step, variant=variant)
    else:
        Wq = sphere.log(q, np.asarray(p, dtype=float))
        b = cost_curvature(q, Wq, Y, X, step=step, variant=variant)
    return abs(a.S - b.S)


def first_variation_residuals(p, q, X, Y, step: float = 0.005) -> dict:
    """Residuals of the three first-variation identities.

    derX:   d/ds cost(exp_p sX, q)            vs  -(X . W)
    derXY:  d2/dsdt cost(exp_p sX, exp_q tY)  vs  -(X . Y_p)
    derXYY: d/ds d2/dt2 along the lifted curve vs 0
    """
    _check_step(step)
    p = sphere.check_point(p)
    q = sphere.check_point(q)
    d_pq = sphere.dist(p, q)
    if d_pq < 1e-9 or d_pq > np.pi - 1e-9:
        raise ValueError("first variation requires q distinct from p and -p")
    X = sphere.check_tangent(p, X)
    Y = sphere.check_tangent(q, Y)
    W = sphere.log(p, q)
    h = step

    fs = np.array([_cost(sphere.exp(p, (o * h) * X), q) for o in _OFF])
    der_x = float(_C1 @ fs) / h
    res_x = abs(der_x - (-(X @ W)))

    vals = np.empty((5, 5))
    for a in range(5):
        xa = sphere.exp(p, (_OFF[a] * h) * X)
        for b in range(5):
            vals[a, b] = _cost(xa, sphere.exp(q, (_OFF[b] * h) * Y))
    der_xy = float(_C1 @ vals @ _C1) / (h * h)
    Yp = sphere.dexp_inverse(p, W, Y)
    res_xy = abs(der_xy - (-(X @ Yp)))

    curve = _second_curve(p, W, Y, LIFTED)
    vals2 = np.empty((5, 5))
    for a in range(5):
        xa = sphere.exp(p, (_OFF[a] * h) * X)
        for b in range(5):
            vals2[a, b] = _cost(xa, curve(_OFF[b] * h))
    der_xyy = float(_C1 @ vals2 @ _C2) / (h * h * h)
    res_xyy = abs(der_xyy)

    return {"derX": res_x, "derXY": res_xy, "derXYY": res_xyy}


@dataclass(frozen=True)
class SegmentScan:
    """Second-difference quotients of f(v) = cost(q, exp_p v) along a segment."""

    max_quotient: float
    argmax: np.ndarray
    quotients: np.ndarray
    locations: np.ndarray


def f_second_upper(p, q, v0, v1, samples: int = 21, step: float = 0.01) -> SegmentScan:
    """Max central second-difference quotient of f along [v0, v1].

    The quotient is per unit length of the segment direction.  The segment
    and its +-step extensions must stay inside the open ball of radius pi.
    """
    _check_step(step)
    p = sphere.check_point(p)
    q = sphere.check_point(q)
    v0 = sphere.check_tangent(p, v0)
    v1 = sphere.check_tangent(p, v1)
    seg = v1 - v0
    seg_len = np.linalg.norm(seg)
    e = seg / seg_len if seg_len > 1e-15 else None
    if e is None:
        raise ValueError("segment endpoints coincide")

    def f(v):
        return 0.5 * sphere.dist(q, sphere.exp(p, v)) ** 2

    taus = np.linspace(0.0, 1.0, samples)
    quots = np.empty(samples)
    locs = np.empty((samples, p.shape[0]))
    h = step
    for idx, tau in enumerate(taus):
        v = v0 + tau * seg
        for probe in (v - h * e, v, v + h * e):
            if np.linalg.norm(probe) >= np.pi:
                raise SegmentLeavesTIL(
                    f"|v| = {np.linalg.norm(probe):.6f} leaves the pi-ball")
        quots[idx] = (f(v + h * e) - 2.0 * f(v) + f(v - h * e)) / (h * h)
        locs[idx] = v
    best = int(np.argmax(quots))
    return SegmentScan(max_quotient=float(quots[best]), argmax=locs[best],
                       quotients=quots, locations=locs)


def h_superlevel_convexity(p, q, grid, threshold: float, tol: float = 1e-9,
                           h_fn=None) -> list:
    """Midpoint quasiconcavity check of h(v) = (dist_q^2(exp_p v) - |v|^2)/2.

    For every grid pair u, v with h > threshold, h(midpoint) must exceed
    threshold - tol.  Returns the violating triples; empty means the sampled
    superlevel set looks convex.  ``h_fn`` overrides h for testing.
    """
    p = sphere.check_point(p)
    q = sphere.check_point(q)
    if h_fn is None:
        def h_fn(v):
            return 0.5 * (sphere.dist(q, sphere.exp(p, v)) ** 2 - float(v @ v))
    pts = [np.asarray(v, dtype=float) for v in grid]
    vals = [h_fn(v) for v in pts]
    inside = [i for i, val in enumerate(vals) if val > threshold]
    violations = []
    for a in range(len(inside)):
        for b in range(a + 1, len(inside)):
            i, j = inside[a], inside[b]
            mid = 0.5 * (pts[i] + pts[j])
            hm = h_fn(mid)
            if hm <= threshold - tol:
                violations.append((pts[i], pts[j], mid, vals[i], vals[j], hm))
    return violations


@dataclass(frozen=True)
class BipolarWitness:
    """Model configuration for the tree [p/x_1..x_n(q/y_1..y_m)] plus checks."""

    coords: np.ndarray  # (n + m + 2) x 2(d+1); rows p, x_1..x_n, q, y_1..y_m
    ok: bool
    equal_error: float
    atleast_margin: float
    iota_residual: float
    psi1_norm: float
    relations: list


def bipolar_witness(p, q, xs, ys, equal_tol: float = 1e-9,
                    atleast_tol: float = 1e-8) -> BipolarWitness:
    """Construct the two-block witness for a bipolar comparison.

    First block: log-map images at p (p at the origin, q at W = log_p q).
    Each y is placed at (W - psi1 g, -psi2 g) with g the gradient of half the
    squared distance to y at q, psi1 the adjoint of d(exp_p) at W and
    psi2 = (I - psi1^T psi1)^(1/2), so that (psi1, psi2) is an isometry.
    """
    p = sphere.check_point(p)
    q = sphere.check_point(q)
    xs = [sphere.check_point(x) for x in xs]
    ys = [sphere.check_point(y) for y in ys]
    if sphere.dist(p, q) >= np.pi - CUT_GUARD:
        raise CutLocus("q is at the cut locus of p")
    for x in xs:
        if sphere.dist(p, x) >= np.pi - CUT_GUARD:
            raise CutLocus("an x point is at the cut locus of p")
    for y in ys:
        if sphere.dist(q, y) >= np.pi - CUT_GUARD:
            raise CutLocus("a y point is at the cut locus of q")

    d1 = p.shape[0]
    W = sphere.log(p, q)
    Bp = sphere.tangent_basis(p)
    Bq = sphere.tangent_basis(q)
    d = Bp.shape[0]
    nw = np.linalg.norm(W)
    if nw < 1e-12:
        D = np.eye(d)
    else:
        D = np.array([[float(Bq[a] @ sphere.dexp(p, W, Bp[b])) for b in range(d)]
                      for a in range(d)])
    sing = np.linalg.svd(D, compute_uv=False)
    psi1_norm = float(sing[0]) if sing.size else 0.0
    if psi1_norm > 1.0 + 1e-12:
        raise NotShort(f"operator norm of psi1 is {psi1_norm:.15g} > 1")
    S2 = np.eye(d) - D @ D.T
    lam, V = np.linalg.eigh(0.5 * (S2 + S2.T))
    if lam.size and lam[0] < -1e-10:
        raise NotShort(f"I - psi1^T psi1 has eigenvalue {lam[0]:.3g}")
    lam = np.clip(lam, 0.0, None)
    psi2 = (V * np.sqrt(lam)) @ V.T

    iota_res = 0.0
    probe_rng = np.random.default_rng(12345)
    probes = [np.eye(d)[i] for i in range(d)] + [probe_rng.standard_normal(d) for _ in range(4)]
    for w in probes:
        nrm = np.linalg.norm(w)
        if nrm < 1e-12:
            continue
        img = np.sqrt(float(w @ (D @ (D.T @ w))) + float(w @ (psi2 @ (psi2 @ w))))
        iota_res = max(iota_res, abs(img - nrm) / nrm)

    n = len(xs)
    m = len(ys)
    rows = np.zeros((n + m + 2, 2 * d1))
    for i, x in enumerate(xs):
        rows[1 + i, :d1] = sphere.log(p, x)
    rows[n + 1, :d1] = W
    for j, y in enumerate(ys):
        g = -sphere.log(q, y)
        gq = Bq @ g
        rows[n + 2 + j, :d1] = W - Bp.T @ (D.T @ gq)
        rows[n + 2 + j, d1:] = -(Bp.T @ (psi2 @ gq))

    actual = [p] + xs + [q] + ys
    edges = {(0, i) for i in range(1, n + 1)}
    edges.add((0, n + 1))
    edges.update((n + 1, n + 2 + j) for j in range(m))
    relations = []
    equal_err = 0.0
    atleast_margin = np.inf
    total = n + m + 2
    for i in range(total):
        for j in range(i + 1, total):
            model = float(np.linalg.norm(rows[i] - rows[j]))
            target = sphere.dist(actual[i], actual[j])
            kind = "eq" if (i, j) in edges else "ge"
            relations.append((i, j, kind, model, target))
            if kind == "eq":
                equal_err = max(equal_err, abs(model - target))
            else:
                atleast_margin = min(atleast_margin, model - target)
    ok = equal_err <= equal_tol and atleast_margin >= -atleast_tol
    return BipolarWitness(coords=rows, ok=bool(ok), equal_error=float(equal_err),
                          atleast_margin=float(atleast_margin),
                          iota_residual=float(iota_res), psi1_norm=psi1_norm,
                          relations=relations)


def ctil_probe(p, u, v, eps: float = 0.01, zeta: float = 0.1, delta: float = 0.05):
    """Build the 7-point probe configuration for the tree p/xx'yy'(q'/z).

    x = exp_p u, x' = exp_p(-delta u), y = exp_p v, y' = exp_p(-delta v),
    q' = exp_p((1 - eps) w'), z = exp_p(zeta w'') with w' = (u + v)/2; on the
    sphere the tangent injectivity locus is a round ball, so w'' = w' and the
    probe generates consistent (feasible) instances rather than refutations.
    Coinciding points (e.g. u = v) are merged and reached through a repeated
    assignment.  Returns (space, tree, assignment).
    """
    p = sphere.check_point(p)
    u = sphere.check_tangent(p, u)
    v = sphere.check_tangent(p, v)
    if eps <= 0 or zeta <= 0 or delta <= 0:
        raise ValueError("eps, zeta and delta must be positive")
    w_prime = 0.5 * (u + v)
    for name, vec in (("u", u), ("v", v), ("(1-eps)w'", (1 - eps) * w_prime),
                      ("zeta*w''", zeta * w_prime), ("-delta*u", -delta * u),
                      ("-delta*v", -delta * v)):
        if np.linalg.norm(vec) >= np.pi:
            raise OutsideTIL(f"{name} leaves the tangent injectivity locus")
    pts = [
        ("p", p),
        ("x", sphere.exp(p, u)),
        ("x'", sphere.exp(p, -delta * u)),
        ("y", sphere.exp(p, v)),
        ("y'", sphere.exp(p, -delta * v)),
        ("q'", sphere.exp(p, (1.0 - eps) * w_prime)),
        ("z", sphere.exp(p, zeta * w_prime)),
    ]
    # merge coincident points; repeated labels map to one point index
    uniq = []
    assignment = {}
    for label, pt in pts:
        for idx, (_lbl, other) in enumerate(uniq):
            if sphere.dist(pt, other) < 1e-12:
                assignment[label] = idx
                break
        else:
            assignment[label] = len(uniq)
            uniq.append((label, pt))
    coords = np.array([pt for _lbl, pt in uniq])
    k = len(uniq)
    dmat = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dmat[i, j] = dmat[j, i] = sphere.dist(coords[i], coords[j])
    space = validate_metric(dmat, [lbl for lbl, _pt in uniq])
    tree = parse_tree("p/xx'yy'(q'/z)")
    return space, tree, assignment
