"""Conjugate gradient solver tests against dense oracles."""

import numpy as np
import pytest
import scipy.sparse as sp

from bingham.linalg import CgConfig, IterationLimitError, cg_solve


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n))
    return G.T @ G + n * np.eye(n)


def test_identity_converges_immediately():
    A = sp.identity(5, format="csr")
    b = np.arange(1.0, 6.0)
    res = cg_solve(A, b)
    assert res.iterations <= 1
    assert np.abs(res.x - b).max() < 1e-12


def test_small_dense_solve():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    res = cg_solve(A, np.array([3.0, 3.0]))
    assert np.abs(res.x - 1.0).max() < 1e-10


def test_matches_dense_oracle_50x50():
    A = random_spd(50, seed=123)
    rng = np.random.default_rng(7)
    b = rng.standard_normal(50)
    expected = np.linalg.solve(A, b)
    res = cg_solve(sp.csr_matrix(A), b, CgConfig(rel_tol=1e-12))
    assert np.abs(res.x - expected).max() < 1e-8
    assert res.residual <= 1e-12 * np.linalg.norm(b)


def test_zero_rhs():
    A = sp.identity(4, format="csr")
    res = cg_solve(A, np.zeros(4))
    assert res.iterations == 0
    assert np.abs(res.x).max() == 0.0


def test_warm_start_with_exact_solution():
    A = random_spd(20, seed=3)
    x = np.random.default_rng(0).standard_normal(20)
    b = A @ x
    res = cg_solve(sp.csr_matrix(A), b, x0=x)
    assert res.iterations == 0


def test_residual_history_monotone():
    A = random_spd(40, seed=11)
    b = np.random.default_rng(1).standard_normal(40)
    res = cg_solve(sp.csr_matrix(A), b)
    h = np.asarray(res.history)
    assert np.all(h[1:] <= h[:-1] + 1e-12 * np.linalg.norm(b))


def test_dimension_mismatch():
    A = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        cg_solve(A, np.zeros(4))


def test_iteration_limit_error_carries_residual():
    A = random_spd(30, seed=5)
    b = np.random.default_rng(2).standard_normal(30)
    with pytest.raises(IterationLimitError) as info:
        cg_solve(sp.csr_matrix(A), b, CgConfig(rel_tol=1e-14, max_iter=2))
    assert info.value.residual > 0
    assert len(info.value.history) == 3


def test_preconditioner_options():
    A = random_spd(25, seed=9)
    b = np.random.default_rng(3).standard_normal(25)
    for pc in ("diagonal", "none"):
        res = cg_solve(sp.csr_matrix(A), b, CgConfig(preconditioner=pc))
        assert np.linalg.norm(b - A @ res.x) <= 1e-10 * np.linalg.norm(b) * 1.01
    with pytest.raises(ValueError):
        CgConfig(preconditioner="ilu")
    with pytest.raises(ValueError):
        CgConfig(rel_tol=0.0)
