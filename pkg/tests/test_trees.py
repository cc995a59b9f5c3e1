import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treecomp.trees import (
    AT_LEAST,
    AT_MOST,
    EQUAL,
    FREE,
    ComparisonTree,
    DuplicateLabel,
    EmptyTree,
    OverlappingColors,
    TreeSyntaxError,
    UnassignedVertex,
    contains_induced_tripod,
    format_tree,
    graph_to_constraints,
    parse_tree,
    tree_isomorphic,
    tree_to_constraints,
)


def strip_labels(t: ComparisonTree) -> ComparisonTree:
    return ComparisonTree(n_vertices=t.n_vertices, edges=t.edges, labels=None)


def test_parse_labeled_example():
    t = parse_tree("p/xy(q/vw)")
    assert t.n_vertices == 6
    by_label = {v: k for k, v in t.labels.items()}
    edges = {(t.labels[i], t.labels[j]) for i, j in t.edges}
    assert edges == {("p", "x"), ("p", "y"), ("p", "q"), ("q", "v"), ("q", "w")}
    assert by_label["p"] == t.root


def test_shape_matches_labeled_shape():
    t = parse_tree("p/xy(q/vw)")
    s = parse_tree("2(2)")
    assert tree_isomorphic(strip_labels(t), s)


def test_alternative_shape_encoding():
    assert tree_isomorphic(parse_tree("(1(2))"), parse_tree("2(2)"))


def test_path_shape():
    t = parse_tree("1(1)")
    assert t.n_vertices == 4
    assert sorted(t.degree(v) for v in range(4)) == [1, 1, 2, 2]


def test_syntax_errors():
    with pytest.raises(TreeSyntaxError) as exc:
        parse_tree("p/xy(q/vw")
    assert exc.value.position == 9
    with pytest.raises(EmptyTree):
        parse_tree("   ")
    with pytest.raises(TreeSyntaxError):
        parse_tree("0(1)")
    with pytest.raises(DuplicateLabel):
        parse_tree("p/xx")


def test_apostrophe_labels():
    t = parse_tree("p/xx'yy'(q'/z)")
    assert t.n_vertices == 7
    assert set(t.labels.values()) == {"p", "x", "x'", "y", "y'", "q'", "z"}


def test_multichar_labels_need_commas():
    t = parse_tree("pole/ab,cd")
    assert set(t.labels.values()) == {"pole", "ab", "cd"}
    t2 = parse_tree("p/ab,cd(q/xy)")
    assert set(t2.labels.values()) == {"p", "ab", "cd", "q", "x", "y"}


def test_format_reroot_examples():
    t = parse_tree("p/xy(q/vw)")
    q = next(v for v, s in t.labels.items() if s == "q")
    x = next(v for v, s in t.labels.items() if s == "x")
    assert format_tree(t, q) == "q/vw(p/xy)"
    assert format_tree(t, x) == "x/(p/y(q/vw))"


def test_format_single_edge():
    t = parse_tree("a/b")
    assert format_tree(t, 0) == "a/b"
    assert format_tree(t, 1) == "b/a"
    assert tree_isomorphic(parse_tree(format_tree(t, 1)), t, respect_labels=True)


def test_format_root_out_of_range():
    with pytest.raises(IndexError):
        format_tree(parse_tree("a/b"), 5)


def test_isomorphism_examples():
    assert not tree_isomorphic(parse_tree("3(1)"), parse_tree("2(2)"))
    t = parse_tree("p/xy(q/vw)")
    t2 = parse_tree("q/vw(p/xy)")
    assert tree_isomorphic(t, t2, respect_labels=True)
    # same shape but different labels is not label-isomorphic
    t3 = parse_tree("p/xy(q/vz)")
    assert not tree_isomorphic(t, t3, respect_labels=True)
    assert tree_isomorphic(t, t3, respect_labels=False)


def test_tree_to_constraints_tripod():
    t = parse_tree("p/xyz")
    cg = tree_to_constraints(t, {"p": 0, "x": 1, "y": 2, "z": 3})
    assert cg.counts() == {EQUAL: 3, AT_LEAST: 3}
    eq_pairs = {pair for pair, rel in cg.relation.items() if rel == EQUAL}
    assert eq_pairs == {(0, 1), (0, 2), (0, 3)}


def test_tree_to_constraints_single_edge():
    cg = tree_to_constraints(parse_tree("a/b"), {"a": 0, "b": 1})
    assert cg.counts() == {EQUAL: 1}


def test_tree_to_constraints_probe_tree():
    t = parse_tree("p/xx'yy'(q'/z)")
    assign = {lbl: i for i, lbl in enumerate(t.labels.values())}
    cg = tree_to_constraints(t, assign)
    assert cg.counts() == {EQUAL: 6, AT_LEAST: 15}


def test_unassigned_vertex():
    with pytest.raises(UnassignedVertex):
        tree_to_constraints(parse_tree("p/xyz"), {"p": 0, "x": 1})


def test_repeated_point_assignment_allowed():
    t = parse_tree("p/xy")
    cg = tree_to_constraints(t, {"p": 0, "x": 1, "y": 1})
    assert cg.n == 3


def test_graph_to_constraints_square():
    cg = graph_to_constraints([(0, 1), (1, 2), (2, 3), (3, 0)],
                              [(0, 2), (1, 3)], 4)
    assert cg.counts() == {AT_MOST: 4, AT_LEAST: 2}


def test_graph_to_constraints_colored_chain():
    # (2n+2)-comparison style: solid (-) edges plus dashed (+) diagonals
    n = 6
    minus = [(i, i + 1) for i in range(n - 1)]
    plus = [(0, n - 1)]
    cg = graph_to_constraints(minus, plus, n)
    counts = cg.counts()
    assert counts[AT_MOST] == n - 1
    assert counts[AT_LEAST] == 1
    assert counts[FREE] == n * (n - 1) // 2 - n


def test_graph_to_constraints_empty_all_free():
    cg = graph_to_constraints([], [], 4)
    assert cg.counts() == {FREE: 6}


def test_graph_overlapping_colors():
    with pytest.raises(OverlappingColors):
        graph_to_constraints([(0, 1)], [(1, 0)], 3)


def test_contains_induced_tripod():
    assert not contains_induced_tripod(parse_tree("1(1)"))
    assert contains_induced_tripod(parse_tree("3(1)"))
    assert contains_induced_tripod(parse_tree("2(2)"))


def test_constraint_partition_counts():
    for notation in ["2(2)", "3(1)", "4(1)", "1(1)", "p/xy(q/vw)"]:
        t = parse_tree(notation)
        cg = tree_to_constraints(t)
        n = t.n_vertices
        counts = cg.counts()
        assert counts.get(EQUAL, 0) + counts.get(AT_LEAST, 0) == n * (n - 1) // 2
        assert counts.get(EQUAL, 0) == n - 1


def test_bipolar_shape_has_two_poles():
    for m in range(1, 4):
        for n in range(1, 4):
            if m + n < 3:
                continue
            t = parse_tree(f"{m}({n})")
            assert len(t.poles()) == 2


_LABEL_POOL = [c for c in "abcdefghijklmnopqrstuvwxyz"] + ["x'", "y'", "q'", "z2"]


def random_labeled_tree(rng, max_vertices=12):
    n = int(rng.integers(2, max_vertices + 1))
    edges = set()
    for v in range(1, n):
        parent = int(rng.integers(0, v))
        edges.add((parent, v))
    labels = {v: lbl for v, lbl in
              enumerate(rng.choice(_LABEL_POOL, size=n, replace=False))}
    return ComparisonTree(n_vertices=n, edges=frozenset(edges), labels=labels)


def test_round_trip_random_trees_every_root():
    rng = np.random.default_rng(2024)
    for _ in range(60):
        t = random_labeled_tree(rng)
        for root in range(t.n_vertices):
            back = parse_tree(format_tree(t, root))
            assert tree_isomorphic(t, back, respect_labels=True)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    t = random_labeled_tree(rng, max_vertices=9)
    root = int(rng.integers(0, t.n_vertices))
    back = parse_tree(format_tree(t, root))
    assert tree_isomorphic(t, back, respect_labels=True)
    assert tree_isomorphic(strip_labels(t), strip_labels(back))
