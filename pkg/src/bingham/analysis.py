"""Closed-form circle solution, error norms, estimators and marking.

For constant load f on the disk of radius R the flow develops a rigid plug
of radius R_p = 2 g / f around the axis.  Outside the plug the velocity is

    u(r) = (1 / mu) * (R - r) / 2 * ( f (R + r) / 2 - 2 g ),

inside it is frozen at u(R_p); u is C^1 across the plug boundary.  The
normalized stress direction is radial, L = -e_r in the liquid annulus and
L = -(f / 2g) r e_r in the plug, which fixes its divergence to -1/r and
-f/g respectively.  These expressions feed the H1 velocity error and the
mesh-dependent multiplier norm

    |div(L - L_h)|_{-1,h}^2 = sum_T h_T^2 |div(L - L_h)|_{0,T}^2
                            + sum_E h_E |[(L - L_h) . n]|_{0,E}^2.

The residual a posteriori estimator consists of an element residual, an
edge flux jump and a consistency term measuring how far L_h is from being
aligned with grad(u_h):

    eta_T^2   = h_T^2 |mu lap(u_h) + g div(L_h) + f|_{0,T}^2
    eta_E^2   = h_E |[(mu grad(u_h) + g L_h) . n]|_{0,E}^2
    eta_con^2 = g int_T ( |grad u_h| - L_h . grad u_h ).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    as_callable,
    project_gradient,
    scalar_gradients,
    scalar_gradients_per_cell,
    scalar_laplacians,
    scalar_values,
    vector_divergences,
    vector_values,
    vector_values_per_cell,
)
from .solver import project_ball
from .spaces import edge_rule, triangle_rule


@dataclass(frozen=True)
class CircleExact:
    """Parameters of the closed-form circular-pipe solution."""

    R: float
    f: float
    g: float
    mu: float = 1.0

    @property
    def R_p(self):
        """Plug radius 2 g / f."""
        return 2.0 * self.g / self.f


def _profile(r, c):
    return (c.R - r) / 2.0 * (c.f * (c.R + r) / 2.0 - 2.0 * c.g) / c.mu


def exact_velocity(r, c):
    """Exact velocity at radius r (constant inside the plug, zero at r = R)."""
    r = np.asarray(r, dtype=float)
    if np.any(r > c.R * (1.0 + 1e-12)) or np.any(r < 0):
        raise ValueError("radius outside the pipe cross-section")
    r = np.minimum(r, c.R)
    plug = _profile(c.R_p, c) if c.R_p < c.R else 0.0
    out = np.where(r >= min(c.R_p, c.R), _profile(r, c), plug)
    return out if out.ndim else float(out)


def exact_velocity_gradient(x, y, c):
    """Gradient of the exact velocity at physical points (zero in the plug)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    liquid = r > c.R_p
    safe = np.maximum(r, 1e-300)
    slope = np.where(liquid, (c.g / safe - c.f / 2.0) / c.mu, 0.0)
    return np.stack([slope * x, slope * y], axis=-1)


def exact_div_lambda(r, c):
    """Divergence of the exact multiplier: -1/r outside the plug, -f/g inside."""
    r = np.asarray(r, dtype=float)
    plug_val = -c.f / c.g if c.g > 0 else 0.0
    out = np.where(r > c.R_p, -1.0 / np.maximum(r, 1e-300), plug_val)
    return out if out.ndim else float(out)


def exact_lambda(x, y, c):
    """The canonical radial multiplier: -e_r in the liquid, -(f/2g) r e_r inside."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    safe = np.maximum(r, 1e-300)
    scale = np.where(r > c.R_p, -1.0 / safe, -c.f / (2.0 * c.g) if c.g > 0 else 0.0)
    return np.stack([scale * x, scale * y], axis=-1)


# -- error norms -----------------------------------------------------------------


def h1_error(u, c):
    """Seminorm and full H1 norm of u - u_h against the circle solution."""
    space = u.space
    deg = _estimator_degree(space)
    rule = triangle_rule(deg)
    md = space.geometry.evaluate(rule.xy)
    x, y = md.x[..., 0], md.x[..., 1]
    r = np.minimum(np.hypot(x, y), c.R)

    vals = scalar_values(u, rule.xy)
    grads = scalar_gradients(u, rule.xy)
    dv = vals - exact_velocity(r, c)
    dg = grads - exact_velocity_gradient(x, y, c)

    w = rule.weights
    l2_sq = np.einsum("cq,cq,q->", dv ** 2, md.detJ, w)
    semi_sq = np.einsum("cqX,cq,q->", dg ** 2, md.detJ, w)
    return np.sqrt(semi_sq), np.sqrt(semi_sq + l2_sq)


def _edge_ref_points(mesh, edge_ids, side, s):
    """Per-side reference coordinates of points at fractions s along edges.

    Interior edges are straight, so the pull-back along an edge is affine in
    the arclength fraction measured from the smaller-index endpoint.
    """
    tris = mesh.e2t[edge_ids, side]
    loc = np.argmax(mesh.t2e[tris] == edge_ids[:, None], axis=1)
    i1 = (loc + 1) % 3
    i2 = (loc + 2) % 3
    lo = mesh.edges[edge_ids, 0]
    flip = mesh.triangles[tris, i1] != lo
    lo_local = np.where(flip, i2, i1)
    hi_local = np.where(flip, i1, i2)
    m, ns = len(edge_ids), len(s)
    lam = np.zeros((m, ns, 3))
    one_lo = np.eye(3)[lo_local]      # (m, 3)
    one_hi = np.eye(3)[hi_local]
    lam += one_lo[:, None, :] * (1.0 - s)[None, :, None]
    lam += one_hi[:, None, :] * s[None, :, None]
    return tris, lam[:, :, 1:]


def _edge_flux_jump_sq(mesh, edge_ids, s, w, flux_of_side):
    """Integral of the squared normal jump of a flux over interior edges."""
    d = mesh.vertices[mesh.edges[edge_ids, 1]] - mesh.vertices[mesh.edges[edge_ids, 0]]
    lens = np.hypot(d[:, 0], d[:, 1])
    n = np.stack([d[:, 1], -d[:, 0]], axis=-1) / lens[:, None]
    sides = []
    for side in (0, 1):
        tris, ref = _edge_ref_points(mesh, edge_ids, side, s)
        sides.append(np.einsum("cqX,cX->cq", flux_of_side(tris, ref), n))
    jump = sides[0] - sides[1]
    return np.einsum("cq,q->c", jump ** 2, w) * lens


def _multiplier_norm_sq(lam, div_exact):
    """Squared mesh-dependent norm of div(L - L_h) for normal-continuous L."""
    space = lam.space
    mesh = space.mesh
    rule = triangle_rule(_estimator_degree(space))
    md = space.geometry.evaluate(rule.xy)
    div_h = vector_divergences(lam, rule.xy)
    div_ex = div_exact(md.x[..., 0], md.x[..., 1])
    h_T = mesh.diameters()
    elem = h_T ** 2 * np.einsum("cq,cq,q->c", (div_h - div_ex) ** 2, md.detJ,
                                rule.weights)

    interior = mesh.interior_edges()
    edge = np.zeros(mesh.n_edges)
    if interior.size:
        s, w = edge_rule(space.family.multiplier_degree + 2)

        def flux(tris, ref):
            return vector_values_per_cell(lam, tris, ref)

        jumps = _edge_flux_jump_sq(mesh, interior, s, w, flux)
        h_E = np.hypot(*(mesh.vertices[mesh.edges[interior, 0]]
                         - mesh.vertices[mesh.edges[interior, 1]]).T)
        edge[interior] = h_E * jumps
    return elem.sum() + edge.sum()


def multiplier_error(lam, c):
    """Mesh-dependent norm |div(L - L_h)|_{-1,h} against the circle solution."""
    return np.sqrt(_multiplier_norm_sq(
        lam, lambda x, y: exact_div_lambda(np.hypot(x, y), c)))


# -- a posteriori estimators -------------------------------------------------------


@dataclass
class EstimatorReport:
    """Per-element and per-edge estimator contributions (squared)."""

    eta_T_sq: np.ndarray
    eta_E_sq: np.ndarray          # full edge array; zero on boundary edges
    eta_con_sq: np.ndarray
    eta_global: float
    robust_variant: bool

    def totals(self):
        return (np.sqrt(self.eta_T_sq.sum()),
                np.sqrt(self.eta_E_sq.sum()),
                np.sqrt(max(self.eta_con_sq.sum(), 0.0)))


def _estimator_degree(space):
    deg = 2 * space.family.velocity_degree + 2
    if space.geometry.is_curved.any():
        deg += 2
    return min(deg, 10)


def estimate(u, lam, params, robust=False, rho=None, pi_grad=None):
    """Residual a posteriori estimator for a discrete velocity/multiplier pair.

    With ``robust=True`` the consistency term uses the projected update
    direction P(L_h + rho pi_h grad u_h) instead of L_h, which is less
    sensitive to a loose fixed-point tolerance; ``pi_grad`` may pass in a
    precomputed gradient projection.
    """
    space = u.space
    mesh = space.mesh
    fam = space.family
    mu, g = params.mu, params.g
    f = as_callable(params.f)

    rule = triangle_rule(_estimator_degree(space))
    md = space.geometry.evaluate(rule.xy)
    w = rule.weights
    x, y = md.x[..., 0], md.x[..., 1]

    lap = scalar_laplacians(u, rule.xy)
    grads = scalar_gradients(u, rule.xy)
    lam_vals = vector_values(lam, rule.xy)
    div_lam = vector_divergences(lam, rule.xy)

    h_T = mesh.diameters()
    resid = mu * lap + g * div_lam + f(x, y)
    eta_T_sq = h_T ** 2 * np.einsum("cq,cq,q->c", resid ** 2, md.detJ, w)

    gnorm = np.sqrt(grads[..., 0] ** 2 + grads[..., 1] ** 2)
    if robust:
        if pi_grad is None:
            pi_grad = project_gradient(u, lam.space)
        pg = vector_values(pi_grad, rule.xy)
        direction = project_ball(
            (lam_vals + (rho if rho is not None else params.rho) * pg)
            .reshape(-1, 2)).reshape(pg.shape)
        integrand = gnorm - np.einsum("cqX,cqX->cq", direction, pg)
    else:
        integrand = gnorm - np.einsum("cqX,cqX->cq", lam_vals, grads)
    eta_con_sq = g * np.einsum("cq,cq,q->c", integrand, md.detJ, w)

    eta_E_sq = np.zeros(mesh.n_edges)
    interior = mesh.interior_edges()
    if interior.size:
        s, we = edge_rule(fam.velocity_degree + 2)

        def flux(tris, ref):
            gr = scalar_gradients_per_cell(u, tris, ref)
            lv = vector_values_per_cell(lam, tris, ref)
            return mu * gr + g * lv

        jumps = _edge_flux_jump_sq(mesh, interior, s, we, flux)
        h_E = np.hypot(*(mesh.vertices[mesh.edges[interior, 0]]
                         - mesh.vertices[mesh.edges[interior, 1]]).T)
        eta_E_sq[interior] = h_E * jumps

    total = eta_T_sq.sum() + eta_E_sq.sum() + eta_con_sq.sum()
    return EstimatorReport(eta_T_sq, eta_E_sq, eta_con_sq,
                           np.sqrt(max(total, 0.0)), robust)


def mark(report, mesh, theta=0.5):
    """Maximum-strategy marking: triangles with E_T > theta * max E_T.

    The element indicator collects the element residual, the consistency
    term and half of each adjacent edge estimator:
    E_T^2 = eta_T^2 + sum_edges (eta_E / 2)^2 + eta_con^2.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("marking fraction must lie in [0, 1]")
    e_sq = (report.eta_T_sq + report.eta_con_sq
            + 0.25 * report.eta_E_sq[mesh.t2e].sum(axis=1))
    e = np.sqrt(np.maximum(e_sq, 0.0))
    cutoff = theta * e.max()
    return np.nonzero(e > cutoff)[0]
