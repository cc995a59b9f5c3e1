"""Finite metric spaces, the centered-matrix inequality, and a Euclidean embedding oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

DEFAULT_METRIC_TOL = 1e-12
DEFAULT_PSD_TOL = 1e-10
DEFAULT_VERDICT_TOL = 1e-12

# largest simplex-grid size before the divisor is coarsened
GRID_BUDGET = 1_200_000
GRID_DIVISORS = (64, 32, 16, 8, 4, 2)


class MetricError(ValueError):
    """Base for metric validation failures."""


class AsymmetricMatrix(MetricError):
    pass


class NonzeroDiagonal(MetricError):
    pass


class TriangleViolation(MetricError):
    def __init__(self, i, j, k, excess):
        super().__init__(f"d[{i},{j}] exceeds d[{i},{k}] + d[{k},{j}] by {excess:g}")
        self.triple = (i, j, k)
        self.excess = excess


class DuplicatePoint(MetricError):
    pass


class NotEmbeddable(ValueError):
    def __init__(self, min_eigenvalue):
        super().__init__(f"centered matrix not PSD, min eigenvalue {min_eigenvalue:g}")
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class FiniteMetricSpace:
    """n labeled points with a validated symmetric distance matrix."""

    labels: tuple[str, ...]
    dist: np.ndarray

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def __post_init__(self):
        self.dist.setflags(write=False)


@dataclass(frozen=True)
class CenteredMatrix:
    """Gram-like matrix m[i][j] = (d(x_i,p)^2 + d(x_j,p)^2 - d(x_i,x_j)^2)/2 at a pole."""

    pole: int
    points: tuple[int, ...]
    m: np.ndarray

    def __post_init__(self):
        self.m.setflags(write=False)


@dataclass(frozen=True)
class InequalityResult:
    """Outcome of minimizing s.M.s over the unit simplex."""

    holds: bool
    min_value: float
    argmin: np.ndarray
    tol: float
    method: str


def validate_metric(raw, labels, tol: float = DEFAULT_METRIC_TOL) -> FiniteMetricSpace:
    """Check symmetry, zero diagonal, positivity and triangle inequality.

    Raises one of the MetricError subclasses; on success returns an immutable
    space.  The input is copied, never mutated.
    """
    d = np.array(raw, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise MetricError("distance matrix has non-finite entries")
    n = d.shape[0]
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise MetricError(f"{len(labels)} labels for {n} points")
    if len(set(labels)) != n:
        raise DuplicatePoint("labels are not distinct")
    asym = np.abs(d - d.T).max() if n else 0.0
    if asym > tol:
        raise AsymmetricMatrix(f"max asymmetry {asym:g} exceeds {tol:g}")
    d = 0.5 * (d + d.T)
    if n and np.abs(np.diag(d)).max() > tol:
        raise NonzeroDiagonal("diagonal entries must be zero")
    np.fill_diagonal(d, 0.0)
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] <= 0.0:
                raise DuplicatePoint(f"points {labels[i]!r} and {labels[j]!r} coincide")
    for k in range(n):
        slack = d - (d[:, k:k + 1] + d[k:k + 1, :])
        worst = slack.max()
        if worst > tol:
            i, j = np.unravel_index(np.argmax(slack), slack.shape)
            raise TriangleViolation(int(i), int(j), k, float(worst))
    return FiniteMetricSpace(labels=labels, dist=d)


def centered_matrix(space: FiniteMetricSpace, pole: int, points=None) -> CenteredMatrix:
    """Centered matrix at ``pole`` over ``points`` (default: all other points)."""
    n = space.n
    if not 0 <= pole < n:
        raise IndexError(f"pole {pole} out of range for {n} points")
    if points is None:
        points = tuple(i for i in range(n) if i != pole)
    else:
        points = tuple(int(i) for i in points)
        for i in points:
            if not 0 <= i < n:
                raise IndexError(f"point index {i} out of range")
    d = space.dist
    r2 = d[list(points), pole] ** 2
    dd = d[np.ix_(list(points), list(points))] ** 2
    m = 0.5 * (r2[:, None] + r2[None, :] - dd)
    return CenteredMatrix(pole=pole, points=points, m=m)


def _grid_divisor(n: int) -> int:
    for div in GRID_DIVISORS:
        if math.comb(div + n - 1, n - 1) <= GRID_BUDGET:
            return div
    return GRID_DIVISORS[-1]


def matrix_inequality_check(cm: CenteredMatrix, method: str = "grid+local",
                            tol: float | None = None) -> InequalityResult:
    """Minimize s.M.s over the unit simplex and test nonnegativity.

    ``grid+local``: exhaustive grid (step 1/64, coarsened for n >= 6 to keep
    the enumeration bounded) followed by projected-gradient polish from the 10
    best grid points.  ``vertex-multistart``: polish from vertices, edge
    midpoints and the barycenter only.  The verdict tolerance defaults to
    1e-12 relative to the largest matrix entry.
    """
    M = np.ascontiguousarray(cm.m, dtype=float)
    n = M.shape[0]
    scale = float(np.abs(M).max()) if n else 1.0
    if scale == 0.0:
        scale = 1.0
    if tol is None:
        tol = DEFAULT_VERDICT_TOL * scale
    if method == "grid+local":
        divisor = _grid_divisor(n)
        grid_vals, grid_pts = _kernels.simplex_grid(M, divisor, min(10, math.comb(divisor + n - 1, n - 1)))
        starts = grid_pts
    elif method == "vertex-multistart":
        starts = [np.eye(n)[i] for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                s = np.zeros(n)
                s[i] = s[j] = 0.5
                starts.append(s)
        starts.append(np.full(n, 1.0 / n))
        starts = np.array(starts)
    else:
        raise ValueError(f"unknown method {method!r}")
    best_val, best_s = _kernels.simplex_polish(M, np.ascontiguousarray(starts), 400)
    best_val = float(best_val)
    return InequalityResult(
        holds=bool(best_val >= -tol),
        min_value=best_val,
        argmin=best_s,
        tol=float(tol),
        method=method,
    )


def euclidean_embed(space: FiniteMetricSpace, base: int = 0,
                    tol: float = DEFAULT_PSD_TOL) -> np.ndarray:
    """Coordinates in R^(n-1) reproducing the metric, or NotEmbeddable.

    Classical criterion: the space embeds iff the centered matrix at any base
    point is positive semidefinite.  Row ``base`` of the result is the origin.
    """
    cm = centered_matrix(space, base)
    lam, V = np.linalg.eigh(cm.m)
    lmax = max(float(lam[-1]), 1.0) if lam.size else 1.0
    if lam.size and float(lam[0]) < -tol * lmax:
        raise NotEmbeddable(float(lam[0]))
    lam = np.clip(lam, 0.0, None)
    X = V * np.sqrt(lam)
    coords = np.zeros((space.n, max(space.n - 1, 1)))
    for row, idx in enumerate(cm.points):
        coords[idx, : X.shape[1]] = X[row]
    return coords


def read_metric_file(path) -> FiniteMetricSpace:
    """Parse the text format: n, labels line, then n rows of distances."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split("\n")
    lines = [ln.strip() for ln in tokens if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise MetricError("empty metric file")
    try:
        n = int(lines[0])
    except ValueError:
        raise MetricError(f"first line must be the point count, got {lines[0]!r}")
    if len(lines) < 2 + n:
        raise MetricError(f"expected {2 + n} lines, got {len(lines)}")
    labels = lines[1].split()
    if len(labels) != n:
        raise MetricError(f"expected {n} labels, got {len(labels)}")
    rows = []
    for ln in lines[2:2 + n]:
        parts = ln.split()
        if len(parts) != n:
            raise MetricError(f"expected {n} distances per row, got {len(parts)}")
        rows.append([float(x) for x in parts])
    return validate_metric(rows, labels)


def write_metric_file(space: FiniteMetricSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{space.n}\n")
        fh.write(" ".join(space.labels) + "\n")
        for row in space.dist:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
