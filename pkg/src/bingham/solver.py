"""Projected Uzawa iteration for the velocity/multiplier saddle point.

Each sweep solves the elliptic velocity problem

    (mu grad(u_h), grad(v_h)) = (f, v_h) - g (L_h, grad(v_h)),

projects the gradient into the multiplier space and applies the pointwise
ball projection at the multiplier Lagrange nodes,

    L_h <- P(L_h + rho pi_h grad(u_h)),     P(v) = v / max(1, |v|),

until the relative H1-seminorm increment of the velocity drops below the
tolerance.  For multiplier degrees at most one the nodal projection keeps
|L_h| <= 1 almost everywhere by convexity on each triangle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    MassSolver,
    ScalarField,
    VectorField,
    apply_dirichlet,
    as_callable,
    assemble_coupling,
    assemble_load,
    assemble_stiffness,
    dirichlet_mask,
)
from .linalg import CgConfig, cg_solve
from .spaces import build_space, family


@dataclass
class BinghamParams:
    """Physics and iteration parameters.

    mu is the viscosity, g the yield threshold (stress at which solid turns
    liquid), f the load (pressure drop), rho the Uzawa step size and tol the
    relative-increment stopping tolerance.
    """

    mu: float
    g: float
    f: object
    rho: float
    tol: float = 1e-7
    max_uzawa_iter: int = 100000

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("viscosity mu must be positive")
        if self.g < 0:
            raise ValueError("yield threshold g must be non-negative")
        if self.rho <= 0:
            raise ValueError("Uzawa step rho must be positive")
        if self.tol <= 0:
            raise ValueError("stopping tolerance must be positive")
        if self.max_uzawa_iter < 1:
            raise ValueError("iteration budget must be positive")


@dataclass
class UzawaResult:
    u: ScalarField
    lam: VectorField
    iterations: int
    increments: list
    converged: bool


class UzawaConvergenceError(RuntimeError):
    """Raised when the fixed-point iteration exhausts its budget."""

    def __init__(self, message, increments):
        super().__init__(message)
        self.increments = increments


def project_ball(v):
    """Scale 2-vectors to length at most one: v / max(1, |v|).

    Accepts a single vector or an (n, 2) array of rows; idempotent.
    """
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    rows = np.atleast_2d(v)
    norms = np.hypot(rows[:, 0], rows[:, 1])
    scale = np.maximum(1.0, norms)
    out = rows / scale[:, None]
    return out[0] if single else out


def uzawa_solve(mesh, fam, params, init=None, cg_config=None):
    """Run the projected Uzawa iteration to its fixed point.

    ``init`` may carry warm-start coefficient vectors ``(u0, lam0)`` sized
    for the spaces this call builds (the multiplier must be admissible).
    Returns the converged pair together with the increment history; raises
    :class:`UzawaConvergenceError` when the budget is exhausted.
    """
    if isinstance(fam, str):
        fam = family(fam)
    V = build_space(mesh, fam, "velocity")
    Q = build_space(mesh, fam, "multiplier")

    A = assemble_stiffness(V, params.mu)
    A1 = A * (1.0 / params.mu)            # seminorm matrix |grad w|^2 = w' A1 w
    b = assemble_load(V, as_callable(params.f))
    B = assemble_coupling(V, Q)
    Bt = B.T.tocsr()
    mass = MassSolver(Q, cg_config)
    Abc, _ = apply_dirichlet(A, b, V)
    fixed = dirichlet_mask(V)
    cfg = cg_config or CgConfig()

    if init is not None:
        u = np.array(init[0], dtype=float)
        lam = np.array(init[1], dtype=float)
        if u.shape != (V.ndof,) or lam.shape != (Q.ndof,):
            raise ValueError("warm start does not match the discrete spaces")
        nodal = lam.reshape(-1, 2)
        if np.hypot(nodal[:, 0], nodal[:, 1]).max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError("warm-start multiplier is not admissible")
        u[fixed] = 0.0
    else:
        u = np.zeros(V.ndof)
        lam = np.zeros(Q.ndof)

    increments = []
    converged = False
    iterations = 0
    for i in range(1, params.max_uzawa_iter + 1):
        rhs = b - params.g * (B @ lam)
        rhs[fixed] = 0.0
        u_new = cg_solve(Abc, rhs, cfg, x0=u).x
        xi = mass.solve(Bt @ u_new)
        lam = project_ball(lam.reshape(-1, 2) + params.rho * xi.reshape(-1, 2)).ravel()

        du = u_new - u
        inc = np.sqrt(max(du @ (A1 @ du), 0.0))
        den = np.sqrt(max(u @ (A1 @ u), 0.0))
        rel = inc / den if den >= 1e-14 else inc
        increments.append(rel)
        u = u_new
        iterations = i
        if rel < params.tol:
            converged = True
            break
    if not converged:
        raise UzawaConvergenceError(
            f"Uzawa iteration did not converge within {params.max_uzawa_iter} sweeps "
            f"(last relative increment {increments[-1]:.3e})", increments)

    # one more velocity solve against the final multiplier so the returned
    # pair satisfies the discrete elliptic equation to solver accuracy
    rhs = b - params.g * (B @ lam)
    rhs[fixed] = 0.0
    u = cg_solve(Abc, rhs, cfg, x0=u).x

    return UzawaResult(ScalarField(V, u), VectorField(Q, lam, admissible=True),
                       iterations, increments, True)
