"""Reference bases, quadrature and degree-of-freedom maps.

Three velocity/multiplier pairs are supported:

* ``P2P0``  -- continuous quadratic velocity, element-wise constant
  vector multiplier,
* ``P3P1``  -- continuous cubic velocity, element-wise linear vector
  multiplier,
* ``MINI``  -- continuous linear velocity enriched with the cubic interior
  bubble, vertex-continuous linear vector multiplier.

Elements owning a curved boundary edge are mapped with the quadratic
(six-node) geometry map so that the circle boundary is represented to
quadratic accuracy; all other elements reduce to the affine map exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, MeshError


# -- quadrature ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle {x, y >= 0, x + y <= 1}."""

    points: np.ndarray        # (nq, 3) barycentric coordinates
    weights: np.ndarray       # (nq,), sums to the reference area 1/2
    exactness_degree: int

    @property
    def xy(self):
        return self.points[:, 1:]


def _orbit1():
    return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]


def _orbit3(a):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _orbit6(a, b):
    c = 1.0 - a - b
    return [(c, a, b), (c, b, a), (a, c, b), (b, c, a), (a, b, c), (b, a, c)]


def _make_rule(degree, chunks):
    pts, wts = [], []
    for w, orbit in chunks:
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    points = np.array(pts)
    weights = 0.5 * np.array(wts)      # tables are normalised to unit total
    return QuadratureRule(points, weights, degree)


_S15 = np.sqrt(15.0)
_TRI_RULES = [
    _make_rule(1, [(1.0, _orbit1())]),
    _make_rule(2, [(1.0 / 3.0, _orbit3(1.0 / 6.0))]),
    _make_rule(4, [(0.223381589678011, _orbit3(0.445948490915965)),
                   (0.109951743655322, _orbit3(0.091576213509771))]),
    _make_rule(5, [(9.0 / 40.0, _orbit1()),
                   ((155.0 + _S15) / 1200.0, _orbit3((6.0 + _S15) / 21.0)),
                   ((155.0 - _S15) / 1200.0, _orbit3((6.0 - _S15) / 21.0))]),
    _make_rule(6, [(0.116786275726379, _orbit3(0.249286745170910)),
                   (0.050844906370207, _orbit3(0.063089014491502)),
                   (0.082851075618374, _orbit6(0.310352451033785, 0.053145049844816))]),
    _make_rule(8, [(0.144315607677787, _orbit1()),
                   (0.095091634267285, _orbit3(0.459292588292723)),
                   (0.103217370534718, _orbit3(0.170569307751760)),
                   (0.032458497623198, _orbit3(0.050547228317031)),
                   (0.027230314174435, _orbit6(0.263112829634638, 0.728492392955404))]),
    _make_rule(10, [(0.090817990382754, _orbit1()),
                    (0.036725957756467, _orbit3(0.485577633383657)),
                    (0.045321059435528, _orbit3(0.109481575485037)),
                    (0.072757916845420, _orbit6(0.141707219414880, 0.307939838764121)),
                    (0.028327242531057, _orbit6(0.025003534762686, 0.246672560639903)),
                    (0.009421666963733, _orbit6(0.009540815400299, 0.066803251012200))]),
]


def triangle_rule(degree):
    """Smallest stored rule integrating polynomials of the given degree."""
    for rule in _TRI_RULES:
        if rule.exactness_degree >= degree:
            return rule
    raise ValueError(f"no triangle quadrature rule of degree {degree}")


def edge_rule(npts):
    """Gauss-Legendre points and weights on [0, 1]; weights sum to one."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


# -- reference bases ----------------------------------------------------------

# gradients of the barycentric coordinates on the reference triangle
_GL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _bary(pts):
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([1.0 - x - y, x, y])


def ref_basis(kind, pts):
    """Values, gradients and Hessians of a reference basis at given points.

    Parameters
    ----------
    kind : str
        'p1', 'p2', 'p3', 'p1b' (linear plus cubic bubble) or 'p0'.
    pts : (nq, 2) array of reference coordinates.

    Returns
    -------
    val : (nb, nq), grad : (nb, nq, 2), hess : (nb, nq, 2, 2)
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    nq = len(pts)
    lam = _bary(pts)                       # (3, nq)
    g = _GL
    outer = np.einsum("ad,be->abde", g, g)  # g_a g_b^T

    if kind == "p0":
        val = np.ones((1, nq))
        return val, np.zeros((1, nq, 2)), np.zeros((1, nq, 2, 2))

    if kind == "p1":
        val = lam.copy()
        grad = np.broadcast_to(g[:, None, :], (3, nq, 2)).copy()
        return val, grad, np.zeros((3, nq, 2, 2))

    def bubble():
        v = 27.0 * lam[0] * lam[1] * lam[2]
        gr = 27.0 * (lam[1] * lam[2] * g[0][:, None]
                     + lam[0] * lam[2] * g[1][:, None]
                     + lam[0] * lam[1] * g[2][:, None]).T
        he = 27.0 * (lam[2][:, None, None] * (outer[0, 1] + outer[1, 0])
                     + lam[1][:, None, None] * (outer[0, 2] + outer[2, 0])
                     + lam[0][:, None, None] * (outer[1, 2] + outer[2, 1]))
        return v, gr, he

    if kind == "p1b":
        val = np.empty((4, nq))
        grad = np.empty((4, nq, 2))
        hess = np.zeros((4, nq, 2, 2))
        val[:3] = lam
        grad[:3] = np.broadcast_to(g[:, None, :], (3, nq, 2))
        val[3], grad[3], hess[3] = bubble()
        return val, grad, hess

    if kind == "p2":
        val = np.empty((6, nq))
        grad = np.empty((6, nq, 2))
        hess = np.empty((6, nq, 2, 2))
        for i in range(3):
            val[i] = lam[i] * (2.0 * lam[i] - 1.0)
            grad[i] = ((4.0 * lam[i] - 1.0)[:, None] * g[i])
            hess[i] = 4.0 * outer[i, i]
        # local edge k is opposite vertex k: basis 3+k couples lam_{k+1}, lam_{k+2}
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            val[3 + k] = 4.0 * lam[i] * lam[j]
            grad[3 + k] = 4.0 * (lam[j][:, None] * g[i] + lam[i][:, None] * g[j])
            hess[3 + k] = np.broadcast_to(4.0 * (outer[i, j] + outer[j, i]),
                                          (nq, 2, 2))
        return val, grad, hess

    if kind == "p3":
        val = np.empty((10, nq))
        grad = np.empty((10, nq, 2))
        hess = np.empty((10, nq, 2, 2))
        for i in range(3):
            li = lam[i]
            val[i] = 0.5 * li * (3.0 * li - 1.0) * (3.0 * li - 2.0)
            grad[i] = (0.5 * (27.0 * li ** 2 - 18.0 * li + 2.0))[:, None] * g[i]
            hess[i] = (27.0 * li - 9.0)[:, None, None] * outer[i, i]
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            for s, (a, b) in enumerate(((i, j), (j, i))):
                la, lb = lam[a], lam[b]
                n = 3 + 2 * k + s
                val[n] = 4.5 * la * lb * (3.0 * la - 1.0)
                grad[n] = 4.5 * (((6.0 * la - 1.0) * lb)[:, None] * g[a]
                                 + (la * (3.0 * la - 1.0))[:, None] * g[b])
                hess[n] = 4.5 * (6.0 * lb[:, None, None] * outer[a, a]
                                 + (6.0 * la - 1.0)[:, None, None]
                                 * (outer[a, b] + outer[b, a]))
        val[9], grad[9], hess[9] = bubble()
        return val, grad, hess

    raise ValueError(f"unknown basis kind {kind!r}")


# -- element families ----------------------------------------------------------


@dataclass(frozen=True)
class ElementFamily:
    tag: str
    velocity_degree: int
    multiplier_degree: int
    multiplier_continuity: str     # 'discontinuous' or 'continuous'
    velocity_kind: str
    multiplier_kind: str


_FAMILIES = {
    "p2p0": ElementFamily("P2P0", 2, 0, "discontinuous", "p2", "p0"),
    "p3p1": ElementFamily("P3P1", 3, 1, "discontinuous", "p3", "p1"),
    "mini": ElementFamily("MINI", 3, 1, "continuous", "p1b", "p1"),
}


def family(name):
    """Look up an element family by tag (case-insensitive)."""
    try:
        return _FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown element family {name!r}") from None


# -- geometry map ---------------------------------------------------------------


@dataclass
class MapData:
    x: np.ndarray        # (nc, nq, 2) physical points
    J: np.ndarray        # (nc, nq, 2, 2) Jacobian dx/dxi
    detJ: np.ndarray     # (nc, nq)
    Jinv: np.ndarray     # (nc, nq, 2, 2) inverse Jacobian dxi/dx
    H: np.ndarray | None = None   # (nc, 2, 2, 2) map Hessians d2x_X/dxi_a dxi_b


class GeometryMap:
    """Per-element quadratic geometry map (exactly affine when straight)."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        p = mesh.vertices
        t = mesh.triangles
        nodes = np.empty((len(t), 6, 2))
        nodes[:, :3] = p[t]
        # mid-edge geometry nodes in local-edge order (edge k opposite vertex k)
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            nodes[:, 3 + k] = 0.5 * (p[t[:, i]] + p[t[:, j]])
        curved = np.zeros(len(t), dtype=bool)
        for key, xy in mesh.curved_edge_nodes.items():
            eid = _edge_index(mesh, key)
            tri = mesh.e2t[eid, 0]
            local = int(np.nonzero(mesh.t2e[tri] == eid)[0][0])
            nodes[tri, 3 + local] = xy
            curved[tri] = True
        self.nodes = nodes
        self.is_curved = curved

    def evaluate(self, ref_pts, cells=None, hessian=False):
        """Map data at shared reference points for the selected cells."""
        nodes = self.nodes if cells is None else self.nodes[cells]
        val, grad, hess = ref_basis("p2", ref_pts)
        x = np.einsum("ceX,eq->cqX", nodes, val)
        J = np.einsum("ceX,eqd->cqXd", nodes, grad)
        detJ, Jinv = _inv2(J)
        H = None
        if hessian:
            # p2 Hessians are constant in the reference coordinates
            H = np.einsum("ceX,eab->cXab", nodes, hess[:, 0])
        return MapData(x, J, detJ, Jinv, H)

    def evaluate_per_cell(self, cells, ref_pts, hessian=False):
        """Map data when each cell has its own reference points (m, nq, 2)."""
        cells = np.asarray(cells, dtype=np.intp)
        m, nq = ref_pts.shape[:2]
        nodes = self.nodes[cells]
        val, grad, hess = ref_basis("p2", ref_pts.reshape(-1, 2))
        val = val.reshape(6, m, nq)
        grad = grad.reshape(6, m, nq, 2)
        x = np.einsum("ceX,ecq->cqX", nodes, val)
        J = np.einsum("ceX,ecqd->cqXd", nodes, grad)
        detJ, Jinv = _inv2(J)
        H = None
        if hessian:
            H = np.einsum("ceX,eab->cXab", nodes, hess.reshape(6, m, nq, 2, 2)[:, 0, 0])
        return MapData(x, J, detJ, Jinv, H)


def _inv2(J):
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0):
        raise MeshError("element map has non-positive Jacobian")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1]
    inv[..., 1, 1] = J[..., 0, 0]
    inv[..., 0, 1] = -J[..., 0, 1]
    inv[..., 1, 0] = -J[..., 1, 0]
    return det, inv / det[..., None, None]


# -- finite element spaces ------------------------------------------------------


@dataclass
class FeSpace:
    """Degree-of-freedom map binding a basis to a mesh.

    ``cell_dofs`` lists scalar dof indices per triangle in the fixed local
    order: vertices, then per-edge dofs (oriented by the global vertex pair
    of each edge), then interior dofs.  For multiplier spaces the unknowns
    are 2-vectors; ``ndof`` counts individual scalar unknowns so a vector
    space with n nodes has ``ndof == 2 * n``.
    """

    mesh: Mesh
    family: ElementFamily
    role: str
    kind: str
    ndof: int
    n_nodes: int
    cell_dofs: np.ndarray
    node_coords: np.ndarray
    boundary_dofs: np.ndarray = field(default_factory=lambda: np.empty(0, np.intp))
    geometry: GeometryMap = None

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    @property
    def components(self):
        return 2 if self.role == "multiplier" else 1


def build_space(mesh, fam, role):
    """Construct the velocity or multiplier space of a family on a mesh."""
    if isinstance(fam, str):
        fam = family(fam)
    if role not in ("velocity", "multiplier"):
        raise ValueError(f"unsupported role {role!r}")
    geom = GeometryMap(mesh)
    if role == "velocity":
        return _build_velocity(mesh, fam, geom)
    return _build_multiplier(mesh, fam, geom)


def _edge_index(mesh, key):
    """Row of a sorted vertex pair in the lexicographically ordered edge list."""
    enc = mesh.edges[:, 0] * mesh.n_vertices + mesh.edges[:, 1]
    i = int(np.searchsorted(enc, key[0] * mesh.n_vertices + key[1]))
    if i >= len(enc) or tuple(mesh.edges[i]) != tuple(key):
        raise MeshError(f"edge {key} not in mesh")
    return i


def _edge_points(mesh, fractions):
    """Points at given fractions along each edge, on the quadratic geometry."""
    p = mesh.vertices
    e = mesh.edges
    a, b = p[e[:, 0]], p[e[:, 1]]
    mid = 0.5 * (a + b)
    for key, xy in mesh.curved_edge_nodes.items():
        mid[_edge_index(mesh, key)] = xy
    out = []
    for t in fractions:
        na = (1.0 - t) * (1.0 - 2.0 * t)
        nb = t * (2.0 * t - 1.0)
        nm = 4.0 * t * (1.0 - t)
        out.append(na * a + nb * b + nm * mid)
    return out


def _build_velocity(mesh, fam, geom):
    nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    t, t2e = mesh.triangles, mesh.t2e
    kind = fam.velocity_kind
    bmask = mesh.boundary_edge_mask

    if kind == "p2":
        ndof = nv + ne
        cell_dofs = np.hstack([t, nv + t2e])
        coords = np.vstack([mesh.vertices] + [_edge_points(mesh, [0.5])[0]])
        bdofs = np.concatenate([np.nonzero(mesh.boundary_vertex_flags)[0],
                                nv + np.nonzero(bmask)[0]])
    elif kind == "p3":
        ndof = nv + 2 * ne + nt
        cell_dofs = np.empty((nt, 10), dtype=np.intp)
        cell_dofs[:, :3] = t
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            base = nv + 2 * t2e[:, k]
            # first local edge basis peaks near local vertex i; the first
            # global dof of an edge is the node nearer its smaller vertex id
            swap = t[:, i] != mesh.edges[t2e[:, k], 0]
            cell_dofs[:, 3 + 2 * k] = np.where(swap, base + 1, base)
            cell_dofs[:, 4 + 2 * k] = np.where(swap, base, base + 1)
        cell_dofs[:, 9] = nv + 2 * ne + np.arange(nt)
        third, two_third = _edge_points(mesh, [1.0 / 3.0, 2.0 / 3.0])
        edge_coords = np.empty((2 * ne, 2))
        edge_coords[0::2] = third
        edge_coords[1::2] = two_third
        centroids = geom.evaluate(np.array([[1 / 3, 1 / 3]])).x[:, 0]
        coords = np.vstack([mesh.vertices, edge_coords, centroids])
        eb = np.nonzero(bmask)[0]
        bdofs = np.concatenate([np.nonzero(mesh.boundary_vertex_flags)[0],
                                nv + 2 * eb, nv + 2 * eb + 1])
    elif kind == "p1b":
        ndof = nv + nt
        cell_dofs = np.hstack([t, (nv + np.arange(nt))[:, None]])
        centroids = geom.evaluate(np.array([[1 / 3, 1 / 3]])).x[:, 0]
        coords = np.vstack([mesh.vertices, centroids])
        bdofs = np.nonzero(mesh.boundary_vertex_flags)[0]
    else:
        raise ValueError(f"unsupported velocity kind {kind!r}")

    return FeSpace(mesh, fam, "velocity", kind, ndof, ndof, cell_dofs, coords,
                   np.sort(bdofs.astype(np.intp)), geom)


def _build_multiplier(mesh, fam, geom):
    nv, nt = mesh.n_vertices, mesh.n_triangles
    kind = fam.multiplier_kind
    if kind == "p0":
        n_nodes = nt
        cell_dofs = np.arange(nt, dtype=np.intp)[:, None]
        coords = geom.evaluate(np.array([[1 / 3, 1 / 3]])).x[:, 0]
        skind = "p0"
    elif kind == "p1" and fam.multiplier_continuity == "discontinuous":
        n_nodes = 3 * nt
        cell_dofs = (3 * np.arange(nt, dtype=np.intp))[:, None] + np.arange(3)
        coords = mesh.vertices[mesh.triangles].reshape(-1, 2)
        skind = "p1"
    elif kind == "p1":
        n_nodes = nv
        cell_dofs = mesh.triangles.copy()
        coords = mesh.vertices.copy()
        skind = "p1"
    else:
        raise ValueError(f"unsupported multiplier kind {kind!r}")
    return FeSpace(mesh, fam, "multiplier", skind, 2 * n_nodes, n_nodes,
                   cell_dofs, coords, np.empty(0, np.intp), geom)


def eval_basis(space, tri, point):
    """Basis values and physical gradients at one barycentric point.

    Returns ``(values, gradients)`` with one row per local degree of
    freedom, gradients taken through the (affine or curved) element map.
    """
    point = np.asarray(point, dtype=float)
    if point.shape != (3,) or np.any(point < -1e-12) or abs(point.sum() - 1) > 1e-12:
        raise ValueError("point must be barycentric coordinates of the reference triangle")
    xy = point[1:][None, :]
    val, grad, _ = ref_basis(space.kind, xy)
    md = space.geometry.evaluate(xy, cells=np.array([tri]))
    phys = np.einsum("qdX,iqd->iqX", md.Jinv[0], grad)
    return val[:, 0], phys[:, 0]
