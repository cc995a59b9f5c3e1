import numpy as np
import pytest

from treecomp import metric
from treecomp.metric import (
    AsymmetricMatrix,
    DuplicatePoint,
    NonzeroDiagonal,
    NotEmbeddable,
    TriangleViolation,
    centered_matrix,
    euclidean_embed,
    matrix_inequality_check,
    read_metric_file,
    validate_metric,
    write_metric_file,
)


def pentagon_coords():
    R = 1.0 / (2.0 * np.sin(2.0 * np.pi / 5.0))
    pts = [np.array([R * np.cos(2 * np.pi * i / 5), R * np.sin(2 * np.pi * i / 5)])
           for i in range(5)]
    pts.append(np.zeros(2))
    return pts


def test_minimal_two_point_space():
    sp = validate_metric([[0, 1], [1, 0]], ["a", "b"])
    assert sp.n == 2
    assert sp.dist[0, 1] == 1.0


def test_triangle_violation_indices():
    with pytest.raises(TriangleViolation) as exc:
        validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]], list("abc"))
    i, j, k = exc.value.triple
    assert k == 1 and {i, j} == {0, 2}
    assert exc.value.excess == pytest.approx(1.0)


def test_pentagon_plus_center_is_a_metric():
    # distances computed from explicit plane coordinates
    pts = pentagon_coords()
    D = [[float(np.linalg.norm(a - b)) for b in pts] for a in pts]
    sp = validate_metric(D, ["v0", "v1", "v2", "v3", "v4", "c"])
    assert sp.n == 6
    assert max(D[0][2], D[0][3]) == pytest.approx(1.0)  # diameter pairs


def test_validation_errors():
    with pytest.raises(AsymmetricMatrix):
        validate_metric([[0, 1], [2, 0]], ["a", "b"])
    with pytest.raises(NonzeroDiagonal):
        validate_metric([[0.1, 1], [1, 0]], ["a", "b"])
    with pytest.raises(DuplicatePoint):
        validate_metric([[0, 0], [0, 0]], ["a", "b"])
    with pytest.raises(DuplicatePoint):
        validate_metric([[0, 1], [1, 0]], ["a", "a"])
    with pytest.raises(metric.MetricError):
        validate_metric([[0, 1, 1], [1, 0, 1]], ["a", "b", "c"])


def test_centered_matrix_collinear():
    sp = validate_metric([[0, 1, 1], [1, 0, 2], [1, 2, 0]], list("pab"))
    cm = centered_matrix(sp, 0)
    assert np.allclose(cm.m, [[1, -1], [-1, 1]])


def tripod_space():
    return validate_metric(
        [[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]], list("pxyz"))


def test_centered_matrix_tripod():
    cm = centered_matrix(tripod_space(), 0)
    assert np.allclose(cm.m, [[1, -1, -1], [-1, 1, -1], [-1, -1, 1]])


def test_centered_matrix_single_leaf():
    sp = validate_metric([[0, 1, 1], [1, 0, 2], [1, 2, 0]], list("pab"))
    cm = centered_matrix(sp, 0, points=[2])
    assert cm.m.shape == (1, 1)
    assert cm.m[0, 0] == pytest.approx(1.0)


def test_centered_matrix_pole_out_of_range():
    with pytest.raises(IndexError):
        centered_matrix(tripod_space(), 7)


def test_centered_matrix_relabeling_conjugation():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((5, 3))
    D = np.sqrt(((X[:, None] - X[None, :]) ** 2).sum(-1))
    sp = validate_metric(D, [f"a{i}" for i in range(5)])
    cm = centered_matrix(sp, 0)
    perm = [0, 3, 1, 4, 2]
    sp2 = validate_metric(D[np.ix_(perm, perm)], [f"a{i}" for i in perm])
    cm2 = centered_matrix(sp2, 0)
    # permuting non-pole points permutes rows/columns of m identically
    inner = [perm.index(i) for i in (1, 2, 3, 4)]
    order = np.argsort(inner)
    assert np.allclose(cm2.m, cm.m[np.ix_(order, order)])


def test_matrix_inequality_collinear_holds():
    sp = validate_metric([[0, 1, 1], [1, 0, 2], [1, 2, 0]], list("pab"))
    res = matrix_inequality_check(centered_matrix(sp, 0))
    assert res.holds
    assert res.min_value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(res.argmin, [0.5, 0.5], atol=1e-6)


def test_matrix_inequality_tripod_fails_at_barycenter():
    res = matrix_inequality_check(centered_matrix(tripod_space(), 0))
    assert not res.holds
    assert res.min_value == pytest.approx(-1.0 / 3.0, abs=1e-9)
    assert np.allclose(res.argmin, [1 / 3] * 3, atol=1e-6)


def test_matrix_inequality_methods_agree():
    res1 = matrix_inequality_check(centered_matrix(tripod_space(), 0))
    res2 = matrix_inequality_check(centered_matrix(tripod_space(), 0),
                                   method="vertex-multistart")
    assert res1.min_value == pytest.approx(res2.min_value, abs=1e-10)
    with pytest.raises(ValueError):
        matrix_inequality_check(centered_matrix(tripod_space(), 0), method="nope")


def test_matrix_inequality_perturbed_pentagon_center_holds():
    # the paper's perturbation keeps the inequality at the center
    from treecomp.corpus import pentagon_space

    sp = pentagon_space(1e-9, 1e-6)
    res = matrix_inequality_check(centered_matrix(sp, 5))
    assert res.holds


def test_psd_implies_copositive_at_every_pole():
    rng = np.random.default_rng(11)
    for _ in range(5):
        X = rng.standard_normal((5, 3))
        D = np.sqrt(((X[:, None] - X[None, :]) ** 2).sum(-1))
        sp = validate_metric(D, [f"a{i}" for i in range(5)])
        euclidean_embed(sp)  # sanity: embeddable
        for pole in range(5):
            assert matrix_inequality_check(centered_matrix(sp, pole)).holds


def test_matrix_inequality_scale_covariance():
    sp = tripod_space()
    res1 = matrix_inequality_check(centered_matrix(sp, 0))
    sp2 = validate_metric(3.0 * np.asarray(sp.dist), list("pxyz"))
    res2 = matrix_inequality_check(centered_matrix(sp2, 0))
    assert res2.min_value == pytest.approx(9.0 * res1.min_value, rel=1e-9)


def test_euclidean_embed_square():
    s2 = np.sqrt(2)
    sp = validate_metric(
        [[0, 1, s2, 1], [1, 0, 1, s2], [s2, 1, 0, 1], [1, s2, 1, 0]], list("abcd"))
    X = euclidean_embed(sp)
    D = np.sqrt(((X[:, None] - X[None, :]) ** 2).sum(-1))
    assert np.abs(D - sp.dist).max() <= 1e-9


def test_euclidean_embed_tripod_rejected():
    with pytest.raises(NotEmbeddable) as exc:
        euclidean_embed(tripod_space())
    assert exc.value.min_eigenvalue == pytest.approx(-1.0, abs=1e-10)


def test_euclidean_embed_two_points():
    sp = validate_metric([[0, 2.5], [2.5, 0]], ["a", "b"])
    X = euclidean_embed(sp, base=0)
    assert np.allclose(X[0], 0.0)
    assert np.linalg.norm(X[1]) == pytest.approx(2.5)


def test_metric_file_round_trip(tmp_path):
    sp = tripod_space()
    path = tmp_path / "tripod.metric"
    write_metric_file(sp, path)
    sp2 = read_metric_file(path)
    assert sp2.labels == sp.labels
    assert np.array_equal(sp2.dist, sp.dist)


def test_metric_file_errors(tmp_path):
    path = tmp_path / "bad.metric"
    path.write_text("2\na b\n0 1\n")
    with pytest.raises(metric.MetricError):
        read_metric_file(path)
    path.write_text("x\n")
    with pytest.raises(metric.MetricError):
        read_metric_file(path)
