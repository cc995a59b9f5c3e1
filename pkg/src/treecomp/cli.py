"""Command-line front end.

Subcommands: check, pentagon, mtw-scan, pivotal, sphere-sample, plant,
corpus-run.  Exit codes for ``check``: 0 Feasible, 1 Infeasible, 2 Undecided,
64 usage errors, 65 bad input data.  All reports are JSON or JSON-lines with
sorted keys; fixed seeds give byte-identical output.

Option precedence: command line > --config file (flat key=value lines) >
defaults.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import corpus as corpus_mod
from . import mtw, pivotal, sphere
from .metric import MetricError, read_metric_file, write_metric_file
from .solver import (
    FEASIBLE,
    INFEASIBLE,
    plant_feasible,
    problem_from_tree,
    solve,
)
from .trees import DuplicateLabel, EmptyTree, TreeSyntaxError, parse_tree

EX_USAGE = 64
EX_DATAERR = 65


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_assignment(text: str) -> dict:
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"assignment item {item!r} is not label=point")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def cmd_check(args) -> int:
    try:
        space = read_metric_file(args.metric_file)
    except (OSError, MetricError) as exc:
        print(f"check: metric file error: {exc}", file=sys.stderr)
        return EX_DATAERR
    try:
        tree = parse_tree(args.notation)
    except (TreeSyntaxError, DuplicateLabel, EmptyTree) as exc:
        print(f"check: notation error: {exc}", file=sys.stderr)
        return EX_USAGE
    if args.assignment:
        try:
            raw = _parse_assignment(args.assignment)
            assignment = {}
            for key, val in raw.items():
                idx = space.index(val) if val in space.labels else int(val)
                assignment[key] = idx
        except (ValueError, KeyError) as exc:
            print(f"check: assignment error: {exc}", file=sys.stderr)
            return EX_USAGE
    elif tree.labels and all(l in space.labels for l in tree.labels.values()):
        assignment = {l: space.index(l) for l in tree.labels.values()}
    elif tree.n_vertices == space.n:
        assignment = {v: v for v in range(tree.n_vertices)}
    else:
        print("check: no assignment given and labels do not match the metric file",
              file=sys.stderr)
        return EX_USAGE
    try:
        problem = problem_from_tree(space, tree, assignment, geometry=args.geometry)
        cert = solve(problem, feas_tol=args.tol, max_iter=args.max_iter,
                     seed=args.seed)
    except (ValueError, KeyError) as exc:
        print(f"check: {exc}", file=sys.stderr)
        return EX_USAGE
    _emit(cert.to_json() + "\n", args.out)
    return {FEASIBLE: 0, INFEASIBLE: 1}.get(cert.status, 2)


def cmd_pentagon(args) -> int:
    if args.grid:
        report = corpus_mod.pentagon_grid_search(seed=args.seed,
                                                 max_iter=args.max_iter)
        _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
        return 0 if report["found"] else 1
    try:
        report = corpus_mod.pentagon_report(args.eps, args.delta, seed=args.seed,
                                            max_iter=args.max_iter)
    except corpus_mod.NotAMetric as exc:
        print(f"pentagon: {exc}", file=sys.stderr)
        return EX_DATAERR
    _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
    return 0


def cmd_mtw_scan(args) -> int:
    lines = []
    worst = -np.inf
    failures = 0
    for s in range(args.seeds):
        rng = np.random.default_rng(s)
        p = sphere.random_point(rng, args.dim)
        wnorm = rng.uniform(0.0, args.wmax)
        W = sphere.random_tangent(rng, p, norm=wnorm) if wnorm > 1e-12 else np.zeros(args.dim + 1)
        X = sphere.random_tangent(rng, p)
        q = sphere.exp(p, W)
        Y = sphere.random_tangent(rng, q)
        try:
            sample = mtw.cost_curvature(p, W, X, Y, step=args.step)
        except mtw.CutLocusContact:
            lines.append(json.dumps({"seed": s, "skipped": "cut locus"},
                                    sort_keys=True))
            continue
        rec = sample.to_json_dict()
        rec["seed"] = s
        worst = max(worst, sample.fourth_derivative)
        if sample.fourth_derivative > args.fail_above:
            failures += 1
        lines.append(json.dumps(rec, sort_keys=True))
    summary = {"summary": True, "seeds": args.seeds, "failures": failures,
               "worst_fourth_derivative": float(worst)}
    lines.append(json.dumps(summary, sort_keys=True))
    _emit("\n".join(lines) + "\n", args.out)
    return 1 if failures else 0


def cmd_pivotal(args) -> int:
    shape = {"2(2)": (2, 2), "3(1)": (3, 1)}.get(args.tree)
    if shape is None:
        print("pivotal: --tree must be 2(2) or 3(1)", file=sys.stderr)
        return EX_USAGE
    lines = []
    failures = 0
    for s in range(args.seeds):
        rng = np.random.default_rng(s)
        tree = pivotal.sample_bipolar_tree(rng, *shape, dim=args.dim)
        outcome = pivotal.pivotal_comparison(tree, seed=s)
        rec = {
            "seed": s,
            "success": outcome.success,
            "energy": float(outcome.energy),
            "max_alpha": float(np.max(outcome.alphas)),
            "equal_error": float(outcome.equal_error),
            "atleast_margin": float(outcome.atleast_margin),
        }
        if not outcome.success:
            failures += 1
            rec["failure_reason"] = outcome.failure_reason
        lines.append(json.dumps(rec, sort_keys=True))
    summary = {"summary": True, "seeds": args.seeds, "failures": failures}
    lines.append(json.dumps(summary, sort_keys=True))
    _emit("\n".join(lines) + "\n", args.out)
    return 1 if failures else 0


def cmd_sphere_sample(args) -> int:
    try:
        tree = parse_tree(args.tree)
    except (TreeSyntaxError, EmptyTree) as exc:
        print(f"sphere-sample: bad tree: {exc}", file=sys.stderr)
        return EX_USAGE
    if tree.n_vertices != args.count:
        print(f"sphere-sample: tree has {tree.n_vertices} vertices, --count is "
              f"{args.count}", file=sys.stderr)
        return EX_USAGE
    lines = []
    hard_failures = 0
    undecided = 0
    for s in range(args.seeds):
        rng = np.random.default_rng(s)
        pts = sphere.sample_points(rng, args.count, dim=args.dim)
        n = len(pts)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = sphere.dist(pts[i], pts[j])
        from .metric import FiniteMetricSpace

        space = FiniteMetricSpace(labels=tuple(f"a{i}" for i in range(n)), dist=D)
        problem = problem_from_tree(space, tree, {v: v for v in range(n)},
                                    geometry=args.geometry)
        cert = solve(problem, seed=s, feas_tol=args.tol, max_iter=args.max_iter)
        if cert.status == INFEASIBLE:
            hard_failures += 1
        elif cert.status != FEASIBLE:
            undecided += 1
        lines.append(json.dumps({"seed": s, "status": cert.status,
                                 "max_violation": float(cert.max_violation),
                                 "iterations": int(cert.iterations)},
                                sort_keys=True))
    summary = {"summary": True, "seeds": args.seeds, "infeasible": hard_failures,
               "undecided": undecided}
    lines.append(json.dumps(summary, sort_keys=True))
    _emit("\n".join(lines) + "\n", args.out)
    return 1 if hard_failures else 0


def cmd_plant(args) -> int:
    try:
        tree = parse_tree(args.tree)
    except (TreeSyntaxError, EmptyTree) as exc:
        print(f"plant: bad tree: {exc}", file=sys.stderr)
        return EX_USAGE
    space, assignment = plant_feasible(tree, args.dim, args.seed)
    if args.out:
        write_metric_file(space, args.out)
    record = {
        "labels": list(space.labels),
        "assignment": {space.labels[v]: int(i) for v, i in assignment.items()},
        "tree": args.tree,
        "seed": args.seed,
    }
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


def cmd_corpus_run(args) -> int:
    directory = args.corpus or corpus_mod.default_corpus_dir()
    try:
        instances = corpus_mod.load_corpus(directory)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"corpus-run: {exc}", file=sys.stderr)
        return EX_DATAERR
    report = corpus_mod.run_corpus(instances, seed=args.seed,
                                   max_iter=args.max_iter)
    _emit(report, args.out)
    last = json.loads(report.strip().split("\n")[-1])
    return 0 if last["mismatched"] == 0 else 1


def _read_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {line!r} is not key=value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


_CONFIG_TYPES = {
    "seed": int, "tol": float, "max_iter": int, "step": float, "seeds": int,
    "dim": int, "count": int, "eps": float, "delta": float, "wmax": float,
    "fail_above": float, "out": str, "tree": str, "geometry": str,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treecomp",
                                     description="tree/graph metric comparison workbench")
    parser.add_argument("--config", help="flat key=value config file", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-9,
                       help="feasibility tolerance")
        p.add_argument("--max-iter", type=int, default=200000)
        p.add_argument("--out", default=None)

    p = sub.add_parser("check", help="decide one comparison instance")
    p.add_argument("metric_file")
    p.add_argument("notation")
    p.add_argument("--assignment", default=None,
                   help="vertex=point pairs, e.g. p=a,x=b or p=0,x=1")
    p.add_argument("--geometry", choices=["euclidean", "spherical"],
                   default="euclidean")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("pentagon", help="perturbed pentagon+center report")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--grid", action="store_true",
                   help="scan the (eps, 1000 eps) ladder instead")
    common(p)
    p.set_defaults(func=cmd_pentagon, max_iter=400000)

    p = sub.add_parser("mtw-scan", help="cost-curvature scan on the sphere")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--step", type=float, default=0.02)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--wmax", type=float, default=1.0)
    p.add_argument("--fail-above", type=float, default=1e-3)
    common(p)
    p.set_defaults(func=cmd_mtw_scan)

    p = sub.add_parser("pivotal", help="pivotal construction scan")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--tree", default="2(2)")
    p.add_argument("--dim", type=int, default=2,
                   help="sphere dimension for sampling")
    common(p)
    p.set_defaults(func=cmd_pivotal)

    p = sub.add_parser("sphere-sample", help="random sphere samples vs a tree comparison")
    p.add_argument("--count", type=int, default=7)
    p.add_argument("--tree", default="4(1)")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--geometry", choices=["euclidean", "spherical"],
                   default="euclidean")
    common(p)
    p.set_defaults(func=cmd_sphere_sample)

    p = sub.add_parser("plant", help="write a planted-feasible metric file")
    p.add_argument("--tree", required=True)
    p.add_argument("--dim", type=int, default=3)
    common(p)
    p.set_defaults(func=cmd_plant)

    p = sub.add_parser("corpus-run", help="run every corpus instance")
    p.add_argument("--corpus", default=None, help="corpus directory")
    common(p)
    p.set_defaults(func=cmd_corpus_run)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # config file values sit between defaults and explicit flags
    if "--config" in argv:
        idx = argv.index("--config")
        try:
            config = _read_config(argv[idx + 1])
        except (OSError, ValueError, IndexError) as exc:
            print(f"treecomp: bad config: {exc}", file=sys.stderr)
            return EX_USAGE
        typed = {}
        for key, val in config.items():
            if key not in _CONFIG_TYPES:
                print(f"treecomp: unknown config key {key!r}", file=sys.stderr)
                return EX_USAGE
            typed[key] = _CONFIG_TYPES[key](val)
        parser.set_defaults(**typed)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EX_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
