import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accsinkhorn.dualfn import dual_F, grad_f, hessian_f, reduced_f, row_solve, row_solve_state
from accsinkhorn.errors import DimensionTooLarge
from accsinkhorn.otcore import DualPotentials, TransportProblem, rescale_problem
from accsinkhorn.sinkhorn import SolveConfig, sinkhorn_solve

from conftest import e2_row_potentials, random_problem

E2_F0 = 1.0 - (0.7 * e2_row_potentials()[0] + 0.3 * e2_row_potentials()[1])


def brute_F(p, u, v):
    # direct sum, no log-domain tricks
    return float(np.exp(u[:, None] + v[None, :] - p.C).sum() - u @ p.a - v @ p.b)


def test_dual_F_single_cell():
    p = TransportProblem([1.0], [1.0], [[0.0]])
    assert dual_F(p, DualPotentials(np.zeros(1), np.zeros(1))) == 1.0


def test_dual_F_shift_invariance(e2):
    rng = np.random.default_rng(3)
    u, v = rng.normal(size=2), rng.normal(size=2)
    base = dual_F(e2, DualPotentials(u, v))
    assert dual_F(e2, DualPotentials(u + 0.7, v - 0.7)) == pytest.approx(base, abs=1e-10)
    assert base == pytest.approx(brute_F(e2, u, v), rel=1e-13)


def test_dual_F_e2_after_row_solve(e2):
    u = row_solve(e2, np.zeros(2))
    assert dual_F(e2, DualPotentials(u, np.zeros(2))) == pytest.approx(E2_F0, rel=1e-14)
    assert E2_F0 == pytest.approx(1.924126, abs=1e-6)


def test_row_solve_examples(e2, uniform2):
    np.testing.assert_allclose(row_solve(uniform2, np.zeros(2)), [-math.log(4)] * 2, rtol=1e-15)
    u = row_solve(e2, np.zeros(2))
    np.testing.assert_allclose(u, e2_row_potentials(), rtol=1e-14)
    np.testing.assert_allclose(u, [-0.669937, -1.517235], atol=1e-6)


def test_row_solve_shift_covariance(e2):
    v = np.array([0.3, -1.1])
    np.testing.assert_allclose(row_solve(e2, v + 0.9), row_solve(e2, v) - 0.9, atol=1e-14)


def test_row_solve_is_exact_minimizer(e2):
    v = np.array([0.4, -0.2])
    st_ = row_solve_state(e2, v)
    P = np.exp(st_.u[:, None] + v[None, :] - e2.C)
    np.testing.assert_allclose(P.sum(axis=1), e2.a, rtol=1e-14)
    np.testing.assert_allclose(st_.col, P.sum(axis=0), rtol=1e-14)


def test_reduced_f_examples(e2):
    v = np.array([0.2, -0.5])
    assert reduced_f(e2, v + 1.3) == pytest.approx(reduced_f(e2, v), abs=1e-10)
    p1 = TransportProblem([1.0], [1.0], [[0.0]])
    for x in (-2.0, 0.0, 5.0):
        assert reduced_f(p1, [x]) == pytest.approx(1.0, abs=1e-15)
    assert reduced_f(e2, np.zeros(2)) == pytest.approx(E2_F0, rel=1e-14)


def test_grad_examples(e2, uniform2):
    c1 = (0.7 + 0.3 * math.exp(-1.0)) / (1.0 + math.exp(-1.0))
    np.testing.assert_allclose(grad_f(e2, np.zeros(2)), [c1 - 0.5, 0.5 - c1], rtol=1e-12)
    np.testing.assert_allclose(grad_f(e2, np.zeros(2)), [0.092425, -0.092425], atol=5e-6)
    np.testing.assert_array_equal(grad_f(uniform2, np.zeros(2)), 0.0)


def test_grad_vanishes_at_optimum(e2):
    res = sinkhorn_solve(e2, cfg=SolveConfig(tol_l1=1e-13, max_iters=1000, record_trace=False))
    assert np.abs(grad_f(e2, res.potentials.v)).max() < 1e-13


def test_hessian_kernel_and_loewner_bound():
    rng = np.random.default_rng(11)
    for _ in range(10):
        p = random_problem(rng, 5, 4, scale=3.0)
        v = rng.normal(size=4)
        H = hessian_f(p, v)
        np.testing.assert_allclose(H @ np.ones(4), 0.0, atol=1e-14)
        c = row_solve_state(p, v).col
        S = H / np.sqrt(c)[:, None] / np.sqrt(c)[None, :]
        assert np.linalg.eigvalsh(S).max() <= 1 + 1e-10
        assert np.linalg.eigvalsh(H).min() >= -1e-14


def test_hessian_matches_finite_differences(e2):
    h = 1e-5
    H = hessian_f(e2, np.zeros(2))
    fd = np.column_stack([(grad_f(e2, h * e) - grad_f(e2, -h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(H, fd, rtol=1e-6)


def test_hessian_cap():
    p = TransportProblem([1.0], [0.5, 0.5], [[0.0, 0.0]])
    with pytest.raises(DimensionTooLarge):
        hessian_f(p, np.zeros(2), cap=1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.integers(0, 2**31), st.floats(1e-3, 1.0))
def test_log_domain_survives_small_eps(n, m, seed, eps):
    rng = np.random.default_rng(seed)
    q = rescale_problem(random_problem(rng, n, m, eps))
    st_ = row_solve_state(q, np.zeros(m))
    assert np.all(np.isfinite(st_.u)) and np.all(np.isfinite(st_.log_col))
    assert abs(st_.col.sum() - 1.0) < 1e-12
    assert st_.f == pytest.approx(reduced_f(q, np.zeros(m)), rel=1e-12, abs=1e-12)
