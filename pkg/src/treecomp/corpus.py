"""Instance corpus: paper-anchored examples, generators, and batch runners.

Corpus instances are JSON files (one instance per file).  A space is given
either as an explicit matrix, as a seeded generator spec, or is absent
(placeholder slots awaiting external data).  Reports are deterministic:
fixed seeds produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import sphere
from .metric import (
    FiniteMetricSpace,
    MetricError,
    centered_matrix,
    matrix_inequality_check,
    validate_metric,
)
from .solver import (
    FEASIBLE,
    INFEASIBLE,
    UNDECIDED,
    problem_from_graph,
    problem_from_tree,
    solve,
)
from .trees import graph_to_constraints, parse_tree

PENTAGON_LABELS = ("v0", "v1", "v2", "v3", "v4", "c")

# squared perturbations below roughly this scale drown in the solver's
# feasibility tolerance; verdicts there carry a resolution caveat
RESOLUTION_EPS = 1e-7


class NotAMetric(MetricError):
    def __init__(self, eps, delta, cause):
        super().__init__(f"pentagon perturbation (eps={eps:g}, delta={delta:g}) "
                         f"breaks the metric: {cause}")
        self.eps = eps
        self.delta = delta


def pentagon_space(eps: float = 0.0, delta: float = 0.0) -> FiniteMetricSpace:
    """Regular pentagon of diameter 1 plus its center.

    Diagonals (the diameter pairs) grow by eps, sides shrink by delta; the
    five center distances stay at the circumradius.
    """
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be nonnegative")
    R = 1.0 / (2.0 * np.sin(2.0 * np.pi / 5.0))
    pts = np.array([[R * np.cos(2.0 * np.pi * i / 5.0),
                     R * np.sin(2.0 * np.pi * i / 5.0)] for i in range(5)])
    D = np.zeros((6, 6))
    for i in range(5):
        D[5, i] = D[i, 5] = R
        for j in range(i + 1, 5):
            d = float(np.linalg.norm(pts[i] - pts[j]))
            if (j - i) % 5 in (1, 4):
                d -= delta
            else:
                d += eps
            D[i, j] = D[j, i] = d
    try:
        return validate_metric(D, PENTAGON_LABELS)
    except MetricError as exc:
        raise NotAMetric(eps, delta, exc) from exc


def pentagon_report(eps: float, delta: float, seed: int = 0,
                    max_iter: int = 400000) -> dict:
    """Matrix inequality at all six poles plus the 5-leaf comparison at the center."""
    space = pentagon_space(eps, delta)
    mins = []
    holds = True
    for pole in range(6):
        res = matrix_inequality_check(centered_matrix(space, pole))
        mins.append(res.min_value)
        holds = holds and res.holds
    tree = parse_tree("c/v0,v1,v2,v3,v4")
    assignment = {lbl: i for i, lbl in enumerate(PENTAGON_LABELS)}
    cert = solve(problem_from_tree(space, tree, assignment), seed=seed,
                 max_iter=max_iter)
    return {
        "eps": float(eps),
        "delta": float(delta),
        "matrix_inequality_all_poles": bool(holds),
        "matrix_inequality_min_by_pole": [float(x) for x in mins],
        "five_pole_comparison": cert.status,
        "comparison_gap": float(cert.gap),
        "comparison_iterations": int(cert.iterations),
        "resolution_caveat": bool(eps < RESOLUTION_EPS),
    }


def pentagon_grid_search(eps_ladder=(1e-4, 3e-5, 1e-5, 3e-6, 1e-6),
                         delta_factor: float = 1e3, seed: int = 0,
                         max_iter: int = 400000, stop_at_first: bool = True) -> dict:
    """Scan (eps, 1000 eps) pairs for: matrix inequality holds everywhere while
    the center comparison is Infeasible.  Largest eps first (most decidable)."""
    reports = []
    found = None
    for eps in eps_ladder:
        delta = delta_factor * eps
        try:
            rep = pentagon_report(eps, delta, seed=seed, max_iter=max_iter)
        except NotAMetric as exc:
            reports.append({"eps": float(eps), "delta": float(delta),
                            "error": str(exc)})
            continue
        reports.append(rep)
        if rep["matrix_inequality_all_poles"] and rep["five_pole_comparison"] == INFEASIBLE:
            if found is None:
                found = {"eps": float(eps), "delta": float(delta)}
                if stop_at_first:
                    break
    return {"found": found, "reports": reports}


@dataclass(frozen=True)
class CorpusInstance:
    id: str
    expected: str  # Feasible | Infeasible | Unknown
    comparison: dict
    space_spec: dict | None
    provenance: str = ""
    solver_opts: dict | None = None

    @staticmethod
    def from_json_dict(obj: dict) -> "CorpusInstance":
        return CorpusInstance(
            id=str(obj["id"]),
            expected=str(obj.get("expected", "Unknown")),
            comparison=obj.get("comparison", {}),
            space_spec=obj.get("space"),
            provenance=str(obj.get("provenance", "")),
            solver_opts=obj.get("solver"),
        )


def _space_from_spec(spec: dict):
    """Materialize a space spec; returns (space, assignment_hint or None)."""
    if "matrix" in spec:
        return validate_metric(spec["matrix"], spec["labels"]), None
    gen = spec["generator"]
    kind = gen["type"]
    if kind == "plant":
        from .solver import plant_feasible

        tree = parse_tree(gen["tree"])
        space, assignment = plant_feasible(tree, int(gen.get("dim", 3)),
                                           int(gen["seed"]))
        return space, assignment
    if kind == "sphere_sample":
        rng = np.random.default_rng(int(gen["seed"]))
        pts = sphere.sample_points(rng, int(gen["count"]), int(gen.get("dim", 2)))
        n = len(pts)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = sphere.dist(pts[i], pts[j])
        labels = tuple(f"a{i}" for i in range(n))
        return FiniteMetricSpace(labels=labels, dist=D), None
    if kind == "pentagon":
        return pentagon_space(float(gen.get("eps", 0.0)),
                              float(gen.get("delta", 0.0))), None
    raise ValueError(f"unknown generator type {kind!r}")


def run_instance(inst: CorpusInstance, seed: int = 0, max_iter: int = 200000,
                 feas_tol: float = 1e-9) -> dict:
    """Run one corpus instance; never raises on well-formed instances."""
    out = {"id": inst.id, "expected": inst.expected}
    if inst.space_spec is None:
        out["verdict"] = "Skipped"
        out["note"] = "no distance data transcribed for this slot"
        out["match"] = None
        return out
    opts = dict(inst.solver_opts or {})
    seed = int(opts.pop("seed", seed))
    max_iter = int(opts.pop("max_iter", max_iter))
    space, assignment_hint = _space_from_spec(inst.space_spec)
    comp = inst.comparison
    if "tree" in comp:
        tree = parse_tree(comp["tree"])
        assignment = comp.get("assignment")
        if assignment is None:
            if assignment_hint is not None:
                assignment = assignment_hint
            elif tree.labels and all(l in space.labels for l in tree.labels.values()):
                assignment = {l: space.index(l) for l in tree.labels.values()}
            else:
                assignment = {v: v for v in range(tree.n_vertices)}
        problem = problem_from_tree(space, tree, assignment,
                                    geometry=comp.get("geometry", "euclidean"))
    else:
        g = comp["graph"]
        cg = graph_to_constraints([tuple(e) for e in g.get("minus", [])],
                                  [tuple(e) for e in g.get("plus", [])], space.n)
        problem = problem_from_graph(space, cg,
                                     geometry=comp.get("geometry", "euclidean"))
    cert = solve(problem, seed=seed, max_iter=max_iter, feas_tol=feas_tol)
    out["verdict"] = cert.status
    out["max_violation"] = float(cert.max_violation)
    out["gap"] = float(cert.gap)
    out["iterations"] = int(cert.iterations)
    out["seed"] = int(cert.seed)
    if inst.expected in (FEASIBLE, INFEASIBLE):
        out["match"] = bool(cert.status == inst.expected)
    else:
        out["match"] = None
    return out


def load_corpus(directory) -> list[CorpusInstance]:
    path = Path(directory)
    instances = []
    for f in sorted(path.glob("*.json")):
        with open(f, "r", encoding="utf-8") as fh:
            instances.append(CorpusInstance.from_json_dict(json.load(fh)))
    ids = [i.id for i in instances]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate corpus instance ids")
    return instances


def default_corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


def run_corpus(instances, seed: int = 0, max_iter: int = 200000) -> str:
    """JSON-lines report, one line per instance sorted by id, plus a summary."""
    lines = []
    n_match = n_mismatch = n_open = 0
    for inst in sorted(instances, key=lambda i: i.id):
        rec = run_instance(inst, seed=seed, max_iter=max_iter)
        if rec["match"] is True:
            n_match += 1
        elif rec["match"] is False:
            n_mismatch += 1
        else:
            n_open += 1
        lines.append(json.dumps(rec, sort_keys=True))
    summary = {"summary": True, "instances": len(lines), "matched": n_match,
               "mismatched": n_mismatch, "open": n_open}
    lines.append(json.dumps(summary, sort_keys=True))
    return "\n".join(lines) + "\n"
