"""Sparse operator assembly and discrete field handling.

Builds the stiffness matrix (mu grad(u), grad(v)), load vector (f, v), the
velocity/multiplier coupling (grad(v), psi), the multiplier mass matrix and
the L2 projection of velocity gradients into the multiplier space.  Vector
multiplier unknowns are interleaved: scalar node j owns coefficients
(2j, 2j+1) for the x and y components.

Assembly is vectorised over elements; quadrature degrees are raised by two
on meshes with curved boundary elements, where the integrands are rational
in the reference coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linalg import CgConfig, cg_solve
from .spaces import FeSpace, build_space, ref_basis, triangle_rule


@dataclass
class ScalarField:
    """Coefficient vector over a velocity space."""

    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError("coefficient length does not match space")


@dataclass
class VectorField:
    """Interleaved 2-vector coefficients over a multiplier space."""

    space: FeSpace
    coeffs: np.ndarray
    admissible: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.ndof,):
            raise ValueError("coefficient length does not match space")

    def nodal(self):
        """Coefficients as an (n_nodes, 2) array of nodal vectors."""
        return self.coeffs.reshape(-1, 2)

    def max_nodal_norm(self):
        v = self.nodal()
        return np.hypot(v[:, 0], v[:, 1]).max() if len(v) else 0.0


def as_callable(f):
    """Wrap a constant load as a vectorised callable of (x, y)."""
    if callable(f):
        return f
    value = float(f)
    return lambda x, y: np.full_like(np.asarray(x, dtype=float), value)


def _quad_degree(space, base):
    # curved-element integrands are rational in the reference coordinates;
    # over-integrate so the consistency error sits well below the
    # discretisation error (degree 10 is the largest stored rule)
    return min(base + 4, 10) if space.geometry.is_curved.any() else base


def _stiffness_tables(space, rule):
    """Quadrature, map data and physical basis gradients for a space."""
    md = space.geometry.evaluate(rule.xy)
    val, grad, _ = ref_basis(space.kind, rule.xy)
    phys = np.einsum("cqdX,iqd->ciqX", md.Jinv, grad)
    return md, val, phys


def _scatter(nrows, ncols, rows, cols, data):
    mat = sp.coo_matrix((data.ravel(), (rows.ravel(), cols.ravel())),
                        shape=(nrows, ncols))
    out = mat.tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def assemble_stiffness(space, mu):
    """Symmetric matrix A with A_ij = (mu grad(phi_j), grad(phi_i))."""
    if mu <= 0:
        raise ValueError("viscosity must be positive")
    rule = triangle_rule(_quad_degree(space, 2 * (space.family.velocity_degree - 1)))
    md, _, phys = _stiffness_tables(space, rule)
    local = mu * np.einsum("ciqX,cjqX,cq,q->cij", phys, phys, md.detJ, rule.weights)
    dofs = space.cell_dofs
    rows = np.broadcast_to(dofs[:, :, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :], local.shape)
    return _scatter(space.ndof, space.ndof, rows, cols, local)


def assemble_load(space, f):
    """Load vector b_i = (f, phi_i) by quadrature."""
    f = as_callable(f)
    rule = triangle_rule(_quad_degree(space, 2 * space.family.velocity_degree + 2))
    md = space.geometry.evaluate(rule.xy)
    val, _, _ = ref_basis(space.kind, rule.xy)
    fv = f(md.x[:, :, 0], md.x[:, :, 1])
    local = np.einsum("iq,cq,cq,q->ci", val, fv, md.detJ, rule.weights)
    b = np.zeros(space.ndof)
    np.add.at(b, space.cell_dofs, local)
    return b


def assemble_coupling(v_space, q_space):
    """Matrix B with B_iJ = (grad(phi_i), psi_J) for vector multipliers psi."""
    if v_space.mesh is not q_space.mesh:
        raise ValueError("velocity and multiplier spaces live on different meshes")
    base = v_space.family.velocity_degree - 1 + q_space.family.multiplier_degree
    rule = triangle_rule(_quad_degree(v_space, base))
    md, _, phys = _stiffness_tables(v_space, rule)
    qval, _, _ = ref_basis(q_space.kind, rule.xy)
    local = np.einsum("ciqX,jq,cq,q->cijX", phys, qval, md.detJ, rule.weights)
    rows = np.broadcast_to(v_space.cell_dofs[:, :, None, None], local.shape)
    cols = (2 * q_space.cell_dofs[:, None, :, None]
            + np.arange(2)[None, None, None, :])
    cols = np.broadcast_to(cols, local.shape)
    return _scatter(v_space.ndof, q_space.ndof, rows, cols, local)


def assemble_multiplier_mass(q_space):
    """Mass matrix of the vector multiplier space (interleaved components)."""
    rule = triangle_rule(_quad_degree(q_space, 2 * q_space.family.multiplier_degree))
    md = q_space.geometry.evaluate(rule.xy)
    val, _, _ = ref_basis(q_space.kind, rule.xy)
    local = np.einsum("iq,jq,cq,q->cij", val, val, md.detJ, rule.weights)
    dofs = q_space.cell_dofs
    n = q_space.n_local
    rows = np.broadcast_to((2 * dofs)[:, :, None, None],
                           (len(dofs), n, n, 2)) + np.arange(2)
    cols = np.broadcast_to((2 * dofs)[:, None, :, None],
                           (len(dofs), n, n, 2)) + np.arange(2)
    data = np.broadcast_to(local[:, :, :, None], rows.shape)
    return _scatter(q_space.ndof, q_space.ndof, rows, cols, data)


class MassSolver:
    """Applies the inverse multiplier mass matrix.

    Discontinuous spaces invert their element blocks once; the continuous
    multiplier of the MINI pair requires a global solve, done with
    Jacobi-preconditioned conjugate gradients and warm starts.
    """

    def __init__(self, q_space, cg_config=None):
        self.space = q_space
        self.continuous = (q_space.family.multiplier_continuity == "continuous"
                           and q_space.kind != "p0")
        rule = triangle_rule(_quad_degree(q_space, 2 * q_space.family.multiplier_degree))
        md = q_space.geometry.evaluate(rule.xy)
        val, _, _ = ref_basis(q_space.kind, rule.xy)
        if self.continuous:
            self.matrix = assemble_multiplier_mass(q_space)
            self.config = cg_config or CgConfig()
            self._warm = None
        elif q_space.kind == "p0":
            self.areas = np.einsum("cq,q->c", md.detJ, rule.weights)
        else:
            blocks = np.einsum("iq,jq,cq,q->cij", val, val, md.detJ, rule.weights)
            self.block_inv = np.linalg.inv(blocks)

    def solve(self, r):
        if self.continuous:
            res = cg_solve(self.matrix, r, self.config, x0=self._warm)
            self._warm = res.x.copy()
            return res.x
        if self.space.kind == "p0":
            return (r.reshape(-1, 2) / self.areas[:, None]).ravel()
        nt = len(self.block_inv)
        rb = r.reshape(nt, self.space.n_local, 2)
        return np.einsum("cij,cjk->cik", self.block_inv, rb).reshape(-1)


def project_gradient(u, q_space, coupling=None, mass=None):
    """L2 projection of grad(u_h) into the multiplier space.

    Solves M x = r with r_J = (grad(u_h), psi_J); the coupling matrix and
    mass solver can be passed in to reuse work across calls.
    """
    if coupling is None:
        coupling = assemble_coupling(u.space, q_space)
    if mass is None:
        mass = MassSolver(q_space)
    r = coupling.T @ u.coeffs
    return VectorField(q_space, mass.solve(r))


def l2_project_vector(fn, q_space, mass=None):
    """L2 projection of a vector-valued callable into the multiplier space."""
    rule = triangle_rule(_quad_degree(q_space, 2 * q_space.family.multiplier_degree + 2))
    md = q_space.geometry.evaluate(rule.xy)
    val, _, _ = ref_basis(q_space.kind, rule.xy)
    fv = np.asarray(fn(md.x[:, :, 0], md.x[:, :, 1]))  # (nc, nq, 2)
    local = np.einsum("jq,cqX,cq,q->cjX", val, fv, md.detJ, rule.weights)
    r = np.zeros(q_space.ndof)
    np.add.at(r, (2 * q_space.cell_dofs)[:, :, None] + np.arange(2), local)
    if mass is None:
        mass = MassSolver(q_space)
    return VectorField(q_space, mass.solve(r))


def dirichlet_mask(space):
    mask = np.zeros(space.ndof, dtype=bool)
    mask[space.boundary_dofs] = True
    return mask


def apply_dirichlet(A, b, space):
    """Eliminate homogeneous Dirichlet rows and columns symmetrically.

    Constrained rows and columns are zeroed, the diagonal set to one and the
    right-hand side entries to zero, so the reduced matrix stays symmetric
    positive definite.
    """
    mask = dirichlet_mask(space)
    free = sp.diags((~mask).astype(float))
    fixed = sp.diags(mask.astype(float))
    A2 = (free @ A @ free + fixed).tocsr()
    A2.sum_duplicates()
    A2.sort_indices()
    b2 = np.where(mask, 0.0, b)
    return A2, b2


# -- field evaluation ----------------------------------------------------------


def scalar_values(u, ref_pts, cells=None):
    val, _, _ = ref_basis(u.space.kind, ref_pts)
    dofs = u.space.cell_dofs if cells is None else u.space.cell_dofs[cells]
    return np.einsum("ci,iq->cq", u.coeffs[dofs], val)


def scalar_gradients(u, ref_pts, cells=None):
    md = u.space.geometry.evaluate(ref_pts, cells=cells)
    _, grad, _ = ref_basis(u.space.kind, ref_pts)
    dofs = u.space.cell_dofs if cells is None else u.space.cell_dofs[cells]
    ref = np.einsum("ci,iqd->cqd", u.coeffs[dofs], grad)
    return np.einsum("cqdX,cqd->cqX", md.Jinv, ref)


def scalar_laplacians(u, ref_pts, cells=None):
    """Laplacian of the discrete field, exact through curved element maps."""
    md = u.space.geometry.evaluate(ref_pts, cells=cells, hessian=True)
    _, grad, hess = ref_basis(u.space.kind, ref_pts)
    dofs = u.space.cell_dofs if cells is None else u.space.cell_dofs[cells]
    c = u.coeffs[dofs]
    ref_g = np.einsum("ci,iqd->cqd", c, grad)
    ref_h = np.einsum("ci,iqab->cqab", c, hess)
    phys_g = np.einsum("cqdX,cqd->cqX", md.Jinv, ref_g)
    corr = ref_h - np.einsum("cqX,cXab->cqab", phys_g, md.H)
    hphys = np.einsum("cqaX,cqab,cqbY->cqXY", md.Jinv, corr, md.Jinv)
    return hphys[..., 0, 0] + hphys[..., 1, 1]


def vector_values(lam, ref_pts, cells=None):
    val, _, _ = ref_basis(lam.space.kind, ref_pts)
    dofs = lam.space.cell_dofs if cells is None else lam.space.cell_dofs[cells]
    c = lam.coeffs.reshape(-1, 2)[dofs]           # (nc, nb, 2)
    return np.einsum("cik,iq->cqk", c, val)


def vector_divergences(lam, ref_pts, cells=None):
    md = lam.space.geometry.evaluate(ref_pts, cells=cells)
    _, grad, _ = ref_basis(lam.space.kind, ref_pts)
    dofs = lam.space.cell_dofs if cells is None else lam.space.cell_dofs[cells]
    c = lam.coeffs.reshape(-1, 2)[dofs]
    ref = np.einsum("cik,iqd->cqdk", c, grad)
    phys = np.einsum("cqdX,cqdk->cqXk", md.Jinv, ref)
    return phys[..., 0, 0] + phys[..., 1, 1]


def scalar_values_per_cell(u, cells, ref_pts):
    """Field values when every cell has its own reference points (m, nq, 2)."""
    m, nq = ref_pts.shape[:2]
    val, _, _ = ref_basis(u.space.kind, ref_pts.reshape(-1, 2))
    val = val.reshape(-1, m, nq)
    return np.einsum("ci,icq->cq", u.coeffs[u.space.cell_dofs[cells]], val)


def scalar_gradients_per_cell(u, cells, ref_pts):
    m, nq = ref_pts.shape[:2]
    md = u.space.geometry.evaluate_per_cell(cells, ref_pts)
    _, grad, _ = ref_basis(u.space.kind, ref_pts.reshape(-1, 2))
    grad = grad.reshape(-1, m, nq, 2)
    ref = np.einsum("ci,icqd->cqd", u.coeffs[u.space.cell_dofs[cells]], grad)
    return np.einsum("cqdX,cqd->cqX", md.Jinv, ref)


def vector_values_per_cell(lam, cells, ref_pts):
    m, nq = ref_pts.shape[:2]
    val, _, _ = ref_basis(lam.space.kind, ref_pts.reshape(-1, 2))
    val = val.reshape(-1, m, nq)
    c = lam.coeffs.reshape(-1, 2)[lam.space.cell_dofs[cells]]
    return np.einsum("cik,icq->cqk", c, val)


# -- interpolation ---------------------------------------------------------------


def interpolate(space, fn):
    """Nodal interpolant of a callable into a velocity space.

    MINI bubble coefficients are set so the interpolant matches the function
    value at element centroids, which reproduces any field already in the
    space.
    """
    fn_x = as_callable(fn)
    coords = space.node_coords
    coeffs = fn_x(coords[:, 0], coords[:, 1]).astype(float)
    if space.kind == "p1b":
        nv = space.mesh.n_vertices
        centre_vals = coeffs[nv:]
        p1_at_c = coeffs[space.mesh.triangles].mean(axis=1)
        coeffs = np.concatenate([coeffs[:nv], centre_vals - p1_at_c])
    return ScalarField(space, coeffs)


def interpolate_vector(q_space, fn):
    """Nodal interpolant of a vector callable into a multiplier space."""
    coords = q_space.node_coords
    vals = np.asarray(fn(coords[:, 0], coords[:, 1]), dtype=float)
    if vals.shape != (q_space.n_nodes, 2):
        raise ValueError("vector interpolant must return (n_nodes, 2) values")
    return VectorField(q_space, vals.reshape(-1))
