"""Pivotal configurations for geodesic bipolar trees.

A bipolar tree records the pole distance, each leaf's edge length and hinge
angle against the pole line, and the required leaf-leaf distances.  Up to
rigid motion a model configuration is determined by the angles between the
normal directions xi_i; the leaf-leaf model distance is nondecreasing in that
angle, which gives the critical angles alpha_ij by bisection.  Direction sets
realizing all alpha_ij at once are found by penalty-energy descent on a
product of unit spheres.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, sphere

log = logging.getLogger(__name__)

UNSATISFIABLE = np.inf


class AngleOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Leaf:
    pole: int  # 1 or 2
    r: float
    beta: float

    def __post_init__(self):
        if self.pole not in (1, 2):
            raise ValueError("pole must be 1 or 2")
        if self.r < 0:
            raise ValueError("edge length must be nonnegative")
        if not 0.0 <= self.beta <= np.pi:
            raise AngleOutOfRange(f"hinge angle {self.beta:g} outside [0, pi]")


@dataclass(frozen=True)
class GeodesicBipolarTree:
    """Pole line, hinge data, and required leaf-leaf (plus optional
    leaf-to-far-pole) distances."""

    pole_dist: float
    leaves: tuple[Leaf, ...]
    targets: dict[tuple[int, int], float]
    cross_targets: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.pole_dist <= 0:
            raise ValueError("pole distance must be positive")
        k = len(self.leaves)
        for (i, j), d in self.targets.items():
            if not 0 <= i < j < k:
                raise ValueError(f"bad target pair ({i},{j})")
            if d < 0:
                raise ValueError("targets must be nonnegative")

    def axial(self, i: int) -> float:
        leaf = self.leaves[i]
        a = leaf.r * np.cos(leaf.beta)
        return a if leaf.pole == 1 else self.pole_dist - a

    def normal_radius(self, i: int) -> float:
        leaf = self.leaves[i]
        return leaf.r * np.sin(leaf.beta)


def bipolar_tree_from_json(obj: dict) -> GeodesicBipolarTree:
    leaves = tuple(Leaf(pole=int(l["pole"]), r=float(l["r"]), beta=float(l["beta"]))
                   for l in obj["leaves"])
    targets = {(min(int(i), int(j)), max(int(i), int(j))): float(d)
               for i, j, d in obj.get("targets", [])}
    cross = {(int(i), int(pole)): float(d)
             for i, pole, d in obj.get("cross_targets", [])}
    return GeodesicBipolarTree(pole_dist=float(obj["pole_dist"]), leaves=leaves,
                               targets=targets, cross_targets=cross)


def pivotal_distance(tree: GeodesicBipolarTree, i: int, j: int, theta: float) -> float:
    """Model distance |x_i - x_j| when the normal directions subtend theta."""
    if not 0.0 <= theta <= np.pi:
        raise AngleOutOfRange(f"theta {theta:g} outside [0, pi]")
    da = tree.axial(i) - tree.axial(j)
    ri = tree.normal_radius(i)
    rj = tree.normal_radius(j)
    d2 = da * da + ri * ri + rj * rj - 2.0 * ri * rj * np.cos(theta)
    return float(np.sqrt(max(d2, 0.0)))


def compute_alpha(tree: GeodesicBipolarTree, i: int, j: int,
                  value_tol: float = 1e-12, bracket_tol: float = 1e-14) -> float:
    """Minimal angle whose pivotal distance reaches the target; inf if none.

    Bisection on the monotone angle-to-distance map.  A target exceeding the
    theta = pi distance by more than 1e-9 (relative) is unsatisfiable.
    """
    key = (min(i, j), max(i, j))
    target = tree.targets[key]
    d0 = pivotal_distance(tree, i, j, 0.0)
    if d0 >= target:
        return 0.0
    dpi = pivotal_distance(tree, i, j, np.pi)
    if dpi < target:
        if target - dpi <= 1e-9 * max(1.0, target):
            return float(np.pi)
        return UNSATISFIABLE
    lo, hi = 0.0, float(np.pi)
    while hi - lo > bracket_tol:
        mid = 0.5 * (lo + hi)
        d = pivotal_distance(tree, i, j, mid)
        if abs(d - target) <= value_tol:
            return mid
        if d >= target:
            hi = mid
        else:
            lo = mid
    return hi


def compute_all_alphas(tree: GeodesicBipolarTree) -> np.ndarray:
    k = len(tree.leaves)
    alphas = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            alphas[i, j] = alphas[j, i] = compute_alpha(tree, i, j)
    return alphas


@dataclass(frozen=True)
class CorollaryReport:
    pairs_ok: bool
    triples_ok: bool
    worst_pair: tuple[int, int] | None
    worst_triple: tuple[int, int, int] | None
    worst_triple_sum: float


def check_corollary(alphas, tol: float = 1e-9) -> CorollaryReport:
    """Check alpha_ij <= pi and alpha_ij + alpha_jk + alpha_ki <= 2 pi."""
    A = np.asarray(alphas, dtype=float)
    k = A.shape[0]
    pairs_ok = True
    worst_pair = None
    worst_excess = -np.inf
    for i in range(k):
        for j in range(i + 1, k):
            excess = A[i, j] - np.pi
            if excess > worst_excess:
                worst_excess = excess
                worst_pair = (i, j)
            if excess > tol or not np.isfinite(A[i, j]):
                pairs_ok = False
    triples_ok = True
    worst_triple = None
    worst_sum = -np.inf
    for i in range(k):
        for j in range(i + 1, k):
            for l in range(j + 1, k):
                s = A[i, j] + A[j, l] + A[l, i]
                if s > worst_sum:
                    worst_sum = s
                    worst_triple = (i, j, l)
                if s > 2.0 * np.pi + tol or not np.isfinite(s):
                    triples_ok = False
    return CorollaryReport(pairs_ok=pairs_ok, triples_ok=triples_ok,
                           worst_pair=worst_pair, worst_triple=worst_triple,
                           worst_triple_sum=float(worst_sum) if np.isfinite(worst_sum) else np.inf)


@dataclass(frozen=True)
class DirectionResult:
    success: bool
    xi: np.ndarray
    energy: float
    start_index: int
    min_margin: float


def realize_directions(alphas, dim: int, multistarts: int = 32, seed: int = 0,
                       max_iter: int = 600) -> DirectionResult:
    """Find unit directions with pairwise angles >= alpha_ij by penalty descent.

    Success means final energy <= 1e-16 and every margin >= -1e-7.  Failure
    carries the best energy and configuration found.
    """
    A = np.ascontiguousarray(alphas, dtype=float)
    k = A.shape[0]
    if not np.all(np.isfinite(A)):
        raise ValueError("alphas must be finite; filter Unsatisfiable first")
    rng = np.random.default_rng(seed)
    best = None
    for s in range(multistarts):
        xi0 = rng.standard_normal((k, dim))
        energy, xi, _iters = _kernels.descend_directions(A, np.ascontiguousarray(xi0),
                                                         max_iter, 1e-18)
        if best is None or energy < best[0]:
            best = (energy, xi, s)
        if energy <= 1e-18:
            break
    energy, xi, start = best
    margin = np.inf
    for i in range(k):
        for j in range(i + 1, k):
            th = float(np.arccos(np.clip(xi[i] @ xi[j], -1.0, 1.0)))
            margin = min(margin, th - A[i, j])
    if k < 2:
        margin = 0.0
    success = energy <= 1e-16 and margin >= -1e-7
    return DirectionResult(success=bool(success), xi=xi, energy=float(energy),
                           start_index=start, min_margin=float(margin))


@dataclass(frozen=True)
class PivotalConfig:
    """Realized model configuration: angles, directions, coordinates.

    coords rows: pole 1, pole 2, then the leaves, all in R^(dim+1); the first
    coordinate is the pole axis."""

    theta: np.ndarray
    xi: np.ndarray
    coords: np.ndarray


@dataclass(frozen=True)
class PivotalOutcome:
    success: bool
    alphas: np.ndarray
    corollary: CorollaryReport | None
    config: PivotalConfig | None
    failure_reason: str | None
    unsatisfiable_pair: tuple[int, int] | None
    energy: float
    equal_error: float
    atleast_margin: float


def pivotal_comparison(tree: GeodesicBipolarTree, dim: int = 4, seed: int = 0,
                       multistarts: int = 32) -> PivotalOutcome:
    """Full pivotal pipeline: alphas, corollary bounds, realization, verification.

    Equal relations (pole distance, leaf edges, hinge angles) hold by
    construction; leaf-leaf AtLeast relations hold when the realized angles
    dominate the alphas.  Cross leaf-to-far-pole targets are verified when the
    tree carries them.  Failures are logged, never silently dropped.
    """
    k = len(tree.leaves)
    alphas = compute_all_alphas(tree)
    bad = None
    for i in range(k):
        for j in range(i + 1, k):
            if not np.isfinite(alphas[i, j]):
                bad = (i, j)
                break
        if bad:
            break
    if bad is not None:
        log.warning("pivotal comparison unsatisfiable for pair %s", bad)
        return PivotalOutcome(success=False, alphas=alphas, corollary=None,
                              config=None, failure_reason="unsatisfiable alpha",
                              unsatisfiable_pair=bad, energy=np.inf,
                              equal_error=np.inf, atleast_margin=-np.inf)
    cor = check_corollary(alphas)
    res = realize_directions(alphas, dim=dim, multistarts=multistarts, seed=seed)
    if not res.success:
        log.warning("direction realization failed, best energy %.3g", res.energy)
        return PivotalOutcome(success=False, alphas=alphas, corollary=cor,
                              config=None, failure_reason="realization failed",
                              unsatisfiable_pair=None, energy=res.energy,
                              equal_error=np.inf, atleast_margin=-np.inf)
    xi = res.xi
    coords = np.zeros((k + 2, dim + 1))
    coords[1, 0] = tree.pole_dist
    for i in range(k):
        coords[2 + i, 0] = tree.axial(i)
        coords[2 + i, 1:] = tree.normal_radius(i) * xi[i]
    theta = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            theta[i, j] = theta[j, i] = float(
                np.arccos(np.clip(xi[i] @ xi[j], -1.0, 1.0)))

    equal_err = 0.0
    equal_err = max(equal_err, abs(np.linalg.norm(coords[0] - coords[1]) - tree.pole_dist))
    for i, leaf in enumerate(tree.leaves):
        pole_row = 0 if leaf.pole == 1 else 1
        other_row = 1 - pole_row
        edge = coords[2 + i] - coords[pole_row]
        equal_err = max(equal_err, abs(np.linalg.norm(edge) - leaf.r))
        if leaf.r > 1e-12:
            axis = coords[other_row] - coords[pole_row]
            cosb = float(edge @ axis / (np.linalg.norm(edge) * np.linalg.norm(axis)))
            equal_err = max(equal_err, abs(np.arccos(np.clip(cosb, -1.0, 1.0)) - leaf.beta))
    margin = np.inf
    for (i, j), target in sorted(tree.targets.items()):
        model = float(np.linalg.norm(coords[2 + i] - coords[2 + j]))
        margin = min(margin, model - target)
    for (i, pole), target in sorted(tree.cross_targets.items()):
        row = 0 if pole == 1 else 1
        model = float(np.linalg.norm(coords[2 + i] - coords[row]))
        margin = min(margin, model - target)
    if not tree.targets and not tree.cross_targets:
        margin = 0.0
    success = equal_err <= 1e-10 and margin >= -1e-6
    if not success:
        log.warning("pivotal verification failed: equal_err=%.3g margin=%.3g",
                    equal_err, margin)
    return PivotalOutcome(success=bool(success), alphas=alphas, corollary=cor,
                          config=PivotalConfig(theta=theta, xi=xi, coords=coords),
                          failure_reason=None if success else "verification failed",
                          unsatisfiable_pair=None, energy=res.energy,
                          equal_error=float(equal_err), atleast_margin=float(margin))


def sample_bipolar_tree(rng, leaves_at_pole1: int, leaves_at_pole2: int,
                        dim: int = 2) -> GeodesicBipolarTree:
    """Sample a geodesic bipolar tree from the round sphere S^dim.

    Poles and leaf endpoints are genuine sphere points; hinge angles come from
    the spherical law of cosines via log maps, and all targets are sphere
    distances, so the tree satisfies the nonnegative-curvature bounds.
    """
    while True:
        p1 = sphere.random_point(rng, dim)
        p2 = sphere.random_point(rng, dim)
        if 0.4 < sphere.dist(p1, p2) < np.pi - 0.4:
            break
    poles = [p1, p2]
    leaves = []
    pts = []
    for idx in range(leaves_at_pole1 + leaves_at_pole2):
        pole = 1 if idx < leaves_at_pole1 else 2
        base = poles[pole - 1]
        other = poles[2 - pole]
        r = rng.uniform(0.2, np.pi - 0.4)
        direction = sphere.random_tangent(rng, base)
        x = sphere.exp(base, r * direction)
        axis = sphere.log(base, other)
        axis /= np.linalg.norm(axis)
        beta = float(np.arccos(np.clip(direction @ axis, -1.0, 1.0)))
        leaves.append(Leaf(pole=pole, r=r, beta=beta))
        pts.append(x)
    k = len(pts)
    targets = {(i, j): sphere.dist(pts[i], pts[j])
               for i in range(k) for j in range(i + 1, k)}
    cross = {}
    for i in range(k):
        far = 2 if leaves[i].pole == 1 else 1
        cross[(i, far)] = sphere.dist(pts[i], poles[far - 1])
    return GeodesicBipolarTree(pole_dist=sphere.dist(p1, p2), leaves=tuple(leaves),
                               targets=targets, cross_targets=cross)
