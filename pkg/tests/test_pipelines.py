import numpy as np
import pytest

from accsinkhorn.data import BilingualDictionary, PointCloud
from accsinkhorn.errors import DegenerateColumn, EmptyDictionary
from accsinkhorn.otcore import PlanDense
from accsinkhorn.pipelines import (
    EPS_GRID,
    barycentric_projection,
    nn_propagate,
    predict_translations,
    random_rotation,
    rotation_fixture,
    run_color_transfer,
    run_word_alignment,
    synthetic_image,
    topk_accuracy,
)

SRC = np.array([[0.1, 0.2, 0.3], [0.9, 0.8, 0.7], [0.5, 0.0, 1.0]])


def test_barycentric_permutation():
    P = PlanDense.from_matrix(np.eye(3)[[2, 0, 1]] / 3)
    # target j receives the source i with P[i, j] > 0
    np.testing.assert_allclose(barycentric_projection(P, SRC), SRC[[1, 2, 0]])


def test_barycentric_uniform_and_convex():
    np.testing.assert_allclose(barycentric_projection(PlanDense.from_matrix(np.full((3, 3), 1 / 9)), SRC), np.tile(SRC.mean(0), (3, 1)))
    rng = np.random.default_rng(0)
    P = rng.uniform(size=(3, 5))
    out = barycentric_projection(PlanDense.from_matrix(P / P.sum()), SRC)
    assert np.all(out >= SRC.min(0) - 1e-15) and np.all(out <= SRC.max(0) + 1e-15)


def test_barycentric_degenerate():
    with pytest.raises(DegenerateColumn):
        barycentric_projection(PlanDense.from_matrix([[0.5, 0.0], [0.5, 0.0]]), SRC[:2])


def test_nn_propagate_contracts():
    S = PointCloud(np.array([[0.0, 0, 0], [1.0, 1, 1]]))
    T = np.array([[0.2, 0.2, 0.2], [0.7, 0.7, 0.7]])
    np.testing.assert_array_equal(nn_propagate(S, T, S.points), T)
    one = PointCloud(np.array([[0.3, 0.3, 0.3]]))
    out = nn_propagate(one, [[0.9, 0.1, 0.5]], np.random.default_rng(0).uniform(size=(50, 3)))
    np.testing.assert_array_equal(out, np.tile([0.9, 0.1, 0.5], (50, 1)))
    tie = nn_propagate(S, T, [[0.5, 0.5, 0.5]])
    np.testing.assert_array_equal(tie, T[:1])


def test_nn_propagate_matches_brute_force_and_clips():
    rng = np.random.default_rng(1)
    S = PointCloud(rng.uniform(size=(30, 3)))
    T = rng.uniform(-0.2, 1.2, size=(30, 3))
    full = rng.integers(0, 4, size=(500, 3)) / 3.0
    idx = np.argmin(((full[:, None] - S.points[None]) ** 2).sum(-1), axis=1)
    np.testing.assert_array_equal(nn_propagate(S, T, full), np.clip(T[idx], 0, 1))


def test_predict_translations():
    P = PlanDense.from_matrix(np.array([[0.1, 0.7, 0.2], [0.4, 0.4, 0.2], [0.0, 0.0, 1.0]]))
    assert predict_translations(P) == [1, 0, 2]
    assert predict_translations(PlanDense.from_matrix(np.eye(4))) == [0, 1, 2, 3]


def test_topk_accuracy():
    P = PlanDense.from_matrix(np.eye(4) / 4)
    ident = BilingualDictionary([(i, i) for i in range(4)])
    assert topk_accuracy(P, ident, 1) == 1.0
    shifted = BilingualDictionary([(i, (i + 1) % 4) for i in range(4)])
    assert topk_accuracy(P, shifted, 1) == 0.0
    assert topk_accuracy(P, shifted, 4) == 1.0
    # a source word with several gold targets counts once
    multi = BilingualDictionary([(0, 0), (0, 1), (1, 3)])
    assert topk_accuracy(P, multi, 1) == 0.5
    with pytest.raises(EmptyDictionary):
        topk_accuracy(P, BilingualDictionary([]), 1)
    with pytest.raises(ValueError):
        topk_accuracy(P, ident, 0)


def test_random_rotation_is_orthogonal():
    for angle in (None, 0.3):
        R = random_rotation(8, 3, angle)
        np.testing.assert_allclose(R @ R.T, np.eye(8), atol=1e-13)
    R = random_rotation(8, 3, 0.3)
    eig = np.linalg.eigvals(R)
    assert np.abs(np.angle(eig)).max() <= 0.3 + 1e-12


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_rotation_alignment_top1(eps):
    src, tgt, d = rotation_fixture(100, 16, 0)
    rep = run_word_alignment(src, tgt, d, eps)
    assert rep.top1 == 1.0 and rep.top1 <= rep.top5
    assert rep.solver_stats["converged"]


def test_alignment_grid_and_ordering():
    src, tgt, d = rotation_fixture(60, 12, 4)
    for eps in EPS_GRID:
        reps = {s: run_word_alignment(src, tgt, d, eps, s) for s in ("sinkhorn", "acc-homotopy")}
        for r in reps.values():
            assert r.top1 <= r.top5
            assert {"iterations", "seconds", "converged"} <= set(r.solver_stats)


def test_alignment_empty_dictionary():
    src, tgt, _ = rotation_fixture(20, 4, 0)
    rep = run_word_alignment(src, tgt, BilingualDictionary([]), 1e-1)
    assert rep.top1 is None and rep.top5 is None and rep.evaluated_pairs == 0


def test_alignment_dictionary_path(tmp_path):
    src, tgt, d = rotation_fixture(30, 8, 1)
    path = tmp_path / "dict.txt"
    path.write_text("".join(f"w{i} w{i}\n" for i in range(30)) + "zzz w1\n")
    rep = run_word_alignment(src, tgt, path, 1e-2)
    assert rep.evaluated_pairs == 30
    ref = run_word_alignment(src, tgt, d, 1e-2)
    assert (rep.top1, rep.top5) == (ref.top1, ref.top5)


def test_color_self_transfer():
    img = synthetic_image(40, 50, 3)
    res = run_color_transfer(img, img, 1e-3, "acc-homotopy", seed=1, n=300)
    assert res.full_image.shape == img.shape
    assert np.abs(res.full_image - img / 255.0).max() <= 0.05
    assert res.full_image.min() >= 0 and res.full_image.max() <= 1


def test_color_transfer_deterministic_and_ordering():
    a, b = synthetic_image(30, 40, 1), synthetic_image(30, 40, 2)
    r1 = run_color_transfer(a, b, 1e-2, "acc-homotopy", seed=5, n=300)
    r2 = run_color_transfer(a, b, 1e-2, "acc-homotopy", seed=5, n=300)
    assert r1.full_image.tobytes() == r2.full_image.tobytes()
    rs = run_color_transfer(a, b, 1e-2, "sinkhorn", seed=5, n=300)
    assert r1.solver_stats["iterations"] < rs.solver_stats["iterations"]


def test_alignment_records_raw_cost_range():
    src, tgt, d = rotation_fixture(20, 4, 1)
    rep = run_word_alignment(src, tgt, d, 1e-1)
    raw = 1.0 - src.points @ tgt.points.T
    assert rep.solver_stats["cost_min"] == raw.min() and rep.solver_stats["cost_max"] == raw.max()
    assert 0.0 <= rep.solver_stats["cost_min"] < rep.solver_stats["cost_max"] <= 2.0
