"""Projected Uzawa iteration tests."""

import numpy as np
import pytest

from bingham.mesh import generate_circle, generate_square
from bingham.spaces import build_space
from bingham.assembly import (
    apply_dirichlet,
    assemble_coupling,
    assemble_load,
    assemble_stiffness,
)
from bingham.linalg import cg_solve
from bingham.solver import (
    BinghamParams,
    UzawaConvergenceError,
    project_ball,
    uzawa_solve,
)


def grad_norm(field):
    A1 = assemble_stiffness(field.space, 1.0)
    return np.sqrt(max(field.coeffs @ (A1 @ field.coeffs), 0.0))


def test_project_ball_inside():
    assert np.allclose(project_ball((0.3, 0.4)), (0.3, 0.4))


def test_project_ball_scales():
    assert np.allclose(project_ball((3.0, 4.0)), (0.6, 0.8))


def test_project_ball_zero():
    assert np.allclose(project_ball((0.0, 0.0)), (0.0, 0.0))


def test_project_ball_rows_and_idempotence():
    rng = np.random.default_rng(0)
    v = 3.0 * rng.standard_normal((50, 2))
    pv = project_ball(v)
    norms = np.hypot(pv[:, 0], pv[:, 1])
    assert norms.max() <= 1.0 + 1e-15
    assert np.allclose(project_ball(pv), pv)


def test_params_validation():
    with pytest.raises(ValueError):
        BinghamParams(mu=0.0, g=0.1, f=1.0, rho=1.0)
    with pytest.raises(ValueError):
        BinghamParams(mu=1.0, g=-0.1, f=1.0, rho=1.0)
    with pytest.raises(ValueError):
        BinghamParams(mu=1.0, g=0.1, f=1.0, rho=0.0)
    with pytest.raises(ValueError):
        BinghamParams(mu=1.0, g=0.1, f=1.0, rho=1.0, tol=0.0)


def test_zero_yield_matches_poisson():
    mesh = generate_circle(1)
    res = uzawa_solve(mesh, "p2p0", BinghamParams(mu=1.0, g=0.0, f=0.5, rho=10.0))
    V = res.u.space
    A = assemble_stiffness(V, 1.0)
    b = assemble_load(V, 0.5)
    A2, b2 = apply_dirichlet(A, b, V)
    direct = cg_solve(A2, b2).x
    assert np.abs(res.u.coeffs - direct).max() < 1e-12
    assert res.iterations <= 2


@pytest.mark.parametrize("fam", ("p3p1", "mini"))
def test_fully_plugged_pipe(fam):
    # plug radius 2g/f = 2 exceeds the pipe radius: the exact flow is zero;
    # linear multipliers carry the plug stress exactly on straight meshes
    mesh = generate_circle(1, curved=False)
    res = uzawa_solve(mesh, fam, BinghamParams(mu=1.0, g=0.1, f=0.1, rho=10.0))
    assert grad_norm(res.u) <= 1e-6


def test_admissibility_invariant():
    mesh = generate_circle(1)
    res = uzawa_solve(mesh, "p2p0", BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0))
    assert res.lam.admissible
    assert res.lam.max_nodal_norm() <= 1.0 + 1e-12


def test_discrete_vi_residual():
    # g (grad u_h, mu_h - L_h) <= eps for all admissible mu_h at the fixed point
    mesh = generate_circle(1)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0)
    res = uzawa_solve(mesh, "p2p0", p)
    V, Q = res.u.space, res.lam.space
    B = assemble_coupling(V, Q)
    Bu = B.T @ res.u.coeffs
    eps = 1e-5 * grad_norm(res.u)
    rng = np.random.default_rng(17)
    for _ in range(100):
        trial = project_ball(2.0 * rng.standard_normal((Q.n_nodes, 2))).ravel()
        assert p.g * (Bu @ (trial - res.lam.coeffs)) <= eps


@pytest.mark.parametrize("fam", ("p2p0", "p3p1", "mini"))
def test_galerkin_orthogonality(fam):
    mesh = generate_circle(1)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0)
    res = uzawa_solve(mesh, fam, p)
    V, Q = res.u.space, res.lam.space
    A = assemble_stiffness(V, p.mu)
    B = assemble_coupling(V, Q)
    b = assemble_load(V, p.f)
    resid = A @ res.u.coeffs + p.g * (B @ res.lam.coeffs) - b
    free = np.ones(V.ndof, dtype=bool)
    free[V.boundary_dofs] = False
    assert np.abs(resid[free]).max() <= 1e-9


def test_determinism():
    mesh = generate_circle(1)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0)
    a = uzawa_solve(mesh, "mini", p)
    b = uzawa_solve(mesh, "mini", p)
    assert a.iterations == b.iterations
    assert np.array_equal(a.u.coeffs, b.u.coeffs)
    assert np.array_equal(a.lam.coeffs, b.lam.coeffs)


def test_warm_start_validation():
    mesh = generate_circle(0)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0)
    V = build_space(mesh, "p2p0", "velocity")
    Q = build_space(mesh, "p2p0", "multiplier")
    bad_lam = np.full(Q.ndof, 2.0)
    with pytest.raises(ValueError):
        uzawa_solve(mesh, "p2p0", p, init=(np.zeros(V.ndof), bad_lam))
    with pytest.raises(ValueError):
        uzawa_solve(mesh, "p2p0", p, init=(np.zeros(3), np.zeros(Q.ndof)))


def test_warm_start_speeds_convergence():
    mesh = generate_circle(2)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0)
    cold = uzawa_solve(mesh, "p2p0", p)
    warm = uzawa_solve(mesh, "p2p0", p, init=(cold.u.coeffs, cold.lam.coeffs))
    assert warm.iterations <= max(2, cold.iterations // 4)
    assert np.abs(warm.u.coeffs - cold.u.coeffs).max() < 1e-6


def test_nonconvergence_error_carries_history():
    mesh = generate_circle(1)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0, max_uzawa_iter=3)
    with pytest.raises(UzawaConvergenceError) as info:
        uzawa_solve(mesh, "p2p0", p)
    assert len(info.value.increments) == 3


def test_increment_history_reaches_tolerance():
    mesh = generate_circle(1)
    p = BinghamParams(mu=1.0, g=0.1, f=0.5, rho=10.0, tol=1e-5)
    res = uzawa_solve(mesh, "p2p0", p)
    assert res.converged
    assert res.increments[-1] < 1e-5
    assert len(res.increments) == res.iterations
