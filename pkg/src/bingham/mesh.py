"""Conforming triangulations of circle and square cross-sections.

A :class:`Mesh` stores vertices, counter-clockwise triangles, derived edge
connectivity and, for circular domains, a quadratic description of the
boundary: each boundary edge may carry a mid-edge geometry node placed on
the circle so that boundary-touching elements can use an isoparametric
quadratic map and the geometry error is negligible.

Refinement is red-green-blue: marked triangles are split into four similar
children (red) and neighbours are closed with two-child (green) or
three-child (blue) splits so no hanging nodes appear.  Every triangle keeps
its vertices ordered so that the refinement edge -- the longest edge at
creation time -- sits in slot (1, 2); green/blue children that are refined
again are escalated to a full red split, which keeps the shape regularity
of repeated local refinement under control.  Meshes are immutable: all
operations return new Mesh objects.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

# refinement lineage tags
RED, GREEN, BLUE = 0, 1, 2


class MeshError(Exception):
    """Raised when a mesh violates a structural or geometric invariant."""


class CircleBoundary:
    """Radial projection onto the circle of given radius."""

    def __init__(self, radius, center=(0.0, 0.0)):
        if radius <= 0:
            raise ValueError("circle radius must be positive")
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def project(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        r = np.hypot(p[:, 0], p[:, 1])
        if np.any(r == 0.0):
            raise ValueError("cannot project the circle center onto the circle")
        out = self.center + p * (self.radius / r)[:, None]
        return out if np.ndim(points) > 1 else out[0]


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class Mesh:
    """Immutable conforming triangulation.

    Parameters
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Vertex indices; orientation is fixed to counter-clockwise on
        construction.
    curved_edge_nodes : dict, optional
        Maps a boundary edge, given as a sorted vertex-index pair, to the
        coordinates of its mid-edge geometry node.
    boundary_curve : optional
        Object with a ``project(points)`` method used to place new boundary
        nodes during refinement (e.g. :class:`CircleBoundary`).
    refinement_tags : (nt,) int array, optional
        Red/green/blue lineage of each triangle; defaults to red.
    normalize : bool
        If true, rotate each triangle so its longest edge is the refinement
        edge (slot (1, 2)).  Refinement passes False to preserve the edge
        assignment of green/blue children.
    """

    def __init__(self, vertices, triangles, curved_edge_nodes=None,
                 boundary_curve=None, refinement_tags=None, normalize=True):
        vertices = np.array(vertices, dtype=float, order="C")
        triangles = np.array(triangles, dtype=np.intp, order="C")
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("triangle vertex index out of range")

        # enforce counter-clockwise orientation
        a = vertices[triangles[:, 1]] - vertices[triangles[:, 0]]
        b = vertices[triangles[:, 2]] - vertices[triangles[:, 0]]
        flipped = _cross2(a, b) < 0
        if np.any(flipped):
            triangles = triangles.copy()
            triangles[flipped] = triangles[flipped][:, [0, 2, 1]]

        self.vertices = vertices
        self.triangles = triangles
        if normalize:
            self.triangles = self._longest_edge_first(self.triangles)
        if refinement_tags is None:
            self.refinement_tags = np.full(len(self.triangles), RED, dtype=np.uint8)
        else:
            self.refinement_tags = np.ascontiguousarray(refinement_tags, dtype=np.uint8)
            if self.refinement_tags.shape != (len(self.triangles),):
                raise MeshError("refinement_tags length mismatch")
        self.boundary_curve = boundary_curve
        self._build_edges()

        self.curved_edge_nodes = {}
        if curved_edge_nodes:
            bset = {tuple(e) for e in self.edges[self.boundary_edge_mask]}
            for key, xy in curved_edge_nodes.items():
                key = tuple(sorted(int(i) for i in key))
                if key not in bset:
                    raise MeshError(f"curved node attached to non-boundary edge {key}")
                self.curved_edge_nodes[key] = np.asarray(xy, dtype=float)

        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    # -- construction helpers ------------------------------------------------

    def _longest_edge_first(self, triangles):
        """Rotate vertex order so the longest edge is opposite vertex 0."""
        p = self.vertices
        # squared length of the edge opposite each local vertex
        sq = np.empty((len(triangles), 3))
        for k in range(3):
            d = p[triangles[:, (k + 1) % 3]] - p[triangles[:, (k + 2) % 3]]
            sq[:, k] = d[:, 0] ** 2 + d[:, 1] ** 2
        shift = np.argmax(sq, axis=1)  # ties break toward lower local index
        out = triangles.copy()
        for s in (1, 2):
            rows = shift == s
            out[rows] = np.roll(triangles[rows], -s, axis=1)
        return out

    def _build_edges(self):
        t = self.triangles
        nt = len(t)
        # local edge k is opposite local vertex k
        pairs = np.concatenate([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        pairs = np.sort(pairs, axis=1)
        if nt and np.any(pairs[:, 0] == pairs[:, 1]):
            raise MeshError("degenerate triangle with a repeated vertex")
        edges, inv = np.unique(pairs, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        self.edges = edges
        self.t2e = inv.reshape(3, nt).T.copy()

        counts = np.bincount(inv, minlength=len(edges))
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        e2t = np.full((len(edges), 2), -1, dtype=np.intp)
        tri_ids = np.tile(np.arange(nt, dtype=np.intp), 3)
        order = np.argsort(inv, kind="stable")
        eidx = inv[order]
        first = np.ones(len(eidx), dtype=bool)
        first[1:] = eidx[1:] != eidx[:-1]
        e2t[eidx[first], 0] = tri_ids[order][first]
        e2t[eidx[~first], 1] = tri_ids[order][~first]
        self.e2t = e2t
        self.boundary_edge_mask = counts == 1
        flags = np.zeros(len(self.vertices), dtype=bool)
        flags[self.edges[self.boundary_edge_mask].ravel()] = True
        self.boundary_vertex_flags = flags

    # -- basic queries ---------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def signed_areas(self):
        p = self.vertices
        t = self.triangles
        return 0.5 * _cross2(p[t[:, 1]] - p[t[:, 0]], p[t[:, 2]] - p[t[:, 0]])

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])

    def diameters(self):
        """Element diameter h_T (longest straight edge of each triangle)."""
        return self.edge_lengths()[self.t2e].max(axis=1)

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_edges(self):
        return np.nonzero(self.boundary_edge_mask)[0]

    def interior_edges(self):
        return np.nonzero(~self.boundary_edge_mask)[0]

    def min_angle_deg(self):
        p = self.vertices[self.triangles]
        amin = np.full(len(p), np.inf)
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            c = (u * v).sum(axis=1) / (np.hypot(u[:, 0], u[:, 1]) * np.hypot(v[:, 0], v[:, 1]))
            amin = np.minimum(amin, np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
        return amin.min() if len(p) else np.inf

    def edge_midpoint(self, key):
        """Geometric midpoint of an edge: the curved node when one is stored."""
        key = tuple(sorted(key))
        node = self.curved_edge_nodes.get(key)
        if node is not None:
            return node
        return 0.5 * (self.vertices[key[0]] + self.vertices[key[1]])


def validate_mesh(mesh, min_angle_deg=15.0, check_hanging=True):
    """Full conformity check; raises :class:`MeshError` on any violation.

    Checks positive areas, the 1-or-2 triangles-per-edge property, boundary
    flag consistency, absence of hanging nodes (no vertex in the interior
    of another triangle's edge), curved-node placement, and the minimum
    angle floor (pass ``min_angle_deg=None`` to skip the angle check).
    """
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        raise MeshError(f"non-positive triangle area (min {areas.min():.3e})")

    tmp = np.ascontiguousarray(mesh.vertices)
    if len(np.unique(tmp.view([("", tmp.dtype)] * 2))) != len(tmp):
        raise MeshError("duplicate vertices")

    counts = np.zeros(mesh.n_edges, dtype=int)
    np.add.at(counts, mesh.t2e.ravel(), 1)
    if not np.all((counts == 1) | (counts == 2)):
        raise MeshError("edge not shared by exactly 1 or 2 triangles")
    if np.any((counts == 1) != mesh.boundary_edge_mask):
        raise MeshError("boundary edge bookkeeping inconsistent")

    flags = np.zeros(mesh.n_vertices, dtype=bool)
    flags[mesh.edges[mesh.boundary_edge_mask].ravel()] = True
    if np.any(flags != mesh.boundary_vertex_flags):
        raise MeshError("boundary vertex flags inconsistent")

    bset = {tuple(e) for e in mesh.edges[mesh.boundary_edge_mask]}
    for key, xy in mesh.curved_edge_nodes.items():
        if key not in bset:
            raise MeshError(f"curved node on non-boundary edge {key}")
        if not np.all(np.isfinite(xy)):
            raise MeshError("non-finite curved node")

    if check_hanging:
        _check_hanging_nodes(mesh)

    if min_angle_deg is not None and mesh.n_triangles:
        amin = mesh.min_angle_deg()
        if amin < min_angle_deg:
            raise MeshError(f"minimum angle {amin:.2f} deg below floor {min_angle_deg}")


def _check_hanging_nodes(mesh):
    """No vertex may lie strictly inside another edge."""
    p = mesh.vertices
    e = mesh.edges
    mids = 0.5 * (p[e[:, 0]] + p[e[:, 1]])
    lens = mesh.edge_lengths()
    tree = cKDTree(p)
    hits = tree.query_ball_point(mids, lens / 2 * (1 + 1e-9))
    counts = np.fromiter((len(h) for h in hits), dtype=np.intp, count=len(hits))
    if counts.sum() == 0:
        return
    eid = np.repeat(np.arange(len(e)), counts)
    vid = np.fromiter((v for h in hits for v in h), dtype=np.intp, count=counts.sum())
    keep = (vid != e[eid, 0]) & (vid != e[eid, 1])
    eid, vid = eid[keep], vid[keep]
    pa = p[e[eid, 0]]
    d = p[e[eid, 1]] - pa
    L2 = (d * d).sum(axis=1)
    s = np.clip(((p[vid] - pa) * d).sum(axis=1) / L2, 0.0, 1.0)
    gap = pa + s[:, None] * d - p[vid]
    bad = np.hypot(gap[:, 0], gap[:, 1]) < 1e-12 * np.sqrt(L2)
    if np.any(bad):
        i = np.nonzero(bad)[0][0]
        raise MeshError(
            f"hanging node: vertex {vid[i]} lies on edge ({e[eid[i], 0]}, {e[eid[i], 1]})")


# -- generators ------------------------------------------------------------


def generate_square(n):
    """Structured triangulation of the unit square with 2*n^2 triangles.

    Each of the n x n grid cells is split along its lower-left/upper-right
    diagonal, producing right isosceles triangles (min angle 45 deg).
    """
    if n < 1:
        raise ValueError("subdivision count must be at least 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    a, b = vid(i, j), vid(i + 1, j)
    c, d = vid(i + 1, j + 1), vid(i, j + 1)
    triangles = np.concatenate([np.column_stack([a, b, c]),
                                np.column_stack([a, c, d])])
    return Mesh(vertices, triangles)


def generate_circle(levels, radius=1.0, curved=True, segments=16):
    """Mesh of the disk of given radius with a quadratic boundary.

    Starts from a fan of ``segments`` triangles around the center and
    applies ``levels`` uniform refinements.  Boundary vertices lie exactly
    on the circle and every boundary edge carries a curved mid-edge node at
    the arc midpoint; ``curved=False`` strips the quadratic boundary data,
    leaving the inscribed straight-sided polygon.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if levels < 0:
        raise ValueError("refinement count must be non-negative")
    curve = CircleBoundary(radius)
    ang = 2 * np.pi * np.arange(segments) / segments
    vertices = np.vstack([[0.0, 0.0],
                          np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])])
    k = np.arange(segments, dtype=np.intp)
    triangles = np.column_stack([np.zeros(segments, dtype=np.intp),
                                 k + 1, (k + 1) % segments + 1])
    nodes = {}
    for t in triangles:
        a, b = sorted((int(t[1]), int(t[2])))
        nodes[(a, b)] = curve.project(0.5 * (vertices[a] + vertices[b]))
    mesh = Mesh(vertices, triangles, curved_edge_nodes=nodes, boundary_curve=curve)
    for _ in range(levels):
        mesh = uniform_refine(mesh)
    if not curved:
        mesh = Mesh(mesh.vertices, mesh.triangles, refinement_tags=mesh.refinement_tags,
                    normalize=False)
    return mesh


# -- refinement --------------------------------------------------------------


def uniform_refine(mesh):
    """Red-split every triangle into four similar children."""
    return _refine(mesh, np.ones(mesh.n_edges, dtype=bool))


def rgb_refine(mesh, marked):
    """Refine the marked triangles red and close neighbours green/blue."""
    marked = np.asarray(sorted(set(int(i) for i in marked)), dtype=np.intp)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_triangles):
        raise ValueError("marked triangle index out of range")
    if marked.size == 0:
        return mesh
    edge_marked = _closure(mesh, marked)
    return _refine(mesh, edge_marked)


def _closure(mesh, marked):
    """Mark edges for splitting until every triangle has a legal pattern.

    Marked triangles get all three edges.  A red-lineage triangle touched by
    a marked edge additionally marks its refinement edge; green/blue
    triangles touched by a marked edge escalate to a full red split.
    """
    em = np.zeros(mesh.n_edges, dtype=bool)
    em[mesh.t2e[marked].ravel()] = True
    tags = mesh.refinement_tags
    while True:
        touched = em[mesh.t2e].any(axis=1)
        escalate = touched & (tags != RED)
        need_ref = touched & (tags == RED) & ~em[mesh.t2e[:, 0]]
        add = np.zeros_like(em)
        add[mesh.t2e[escalate].ravel()] = True
        add[mesh.t2e[need_ref, 0]] = True
        new = add & ~em
        if not new.any():
            return em
        em |= add


def _refine(mesh, edge_marked):
    p = mesh.vertices
    t = mesh.triangles
    nv = len(p)

    split_ids = np.nonzero(edge_marked)[0]
    mid_of_edge = np.full(mesh.n_edges, -1, dtype=np.intp)
    mid_of_edge[split_ids] = nv + np.arange(len(split_ids))
    new_pts = np.array([mesh.edge_midpoint(tuple(e)) for e in mesh.edges[split_ids]],
                       dtype=float).reshape(len(split_ids), 2)
    vertices = np.vstack([p, new_pts])

    me = edge_marked[mesh.t2e]                     # (nt, 3), column k = local edge k
    if np.any(me[:, 1:].any(axis=1) & ~me[:, 0]):
        raise MeshError("refinement closure failed to mark a refinement edge")
    m = mid_of_edge[mesh.t2e]                      # midpoint vertex ids (-1 if unsplit)
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
    m0, m1, m2 = m[:, 0], m[:, 1], m[:, 2]

    keep = ~me.any(axis=1)
    red = me.all(axis=1)
    green = me[:, 0] & ~me[:, 1] & ~me[:, 2]
    blue1 = me[:, 0] & me[:, 1] & ~me[:, 2]        # refinement edge + edge (v2, v0)
    blue2 = me[:, 0] & me[:, 2] & ~me[:, 1]        # refinement edge + edge (v0, v1)

    chunks, tags = [], []

    def emit(cols, tag):
        tri = np.column_stack(cols)
        chunks.append(tri)
        tags.append(np.full(len(tri), tag, dtype=np.uint8))

    if keep.any():
        chunks.append(t[keep])
        tags.append(mesh.refinement_tags[keep])
    if green.any():
        g = green
        emit((m0[g], v0[g], v1[g]), GREEN)
        emit((m0[g], v2[g], v0[g]), GREEN)
    if blue1.any():
        s = blue1
        emit((m0[s], v0[s], v1[s]), BLUE)
        emit((m1[s], m0[s], v2[s]), BLUE)
        emit((m1[s], v0[s], m0[s]), BLUE)
    if blue2.any():
        s = blue2
        emit((m2[s], m0[s], v0[s]), BLUE)
        emit((m2[s], v1[s], m0[s]), BLUE)
        emit((m0[s], v2[s], v0[s]), BLUE)
    if red.any():
        r = red
        emit((v0[r], m2[r], m1[r]), RED)
        emit((v1[r], m0[r], m2[r]), RED)
        emit((v2[r], m1[r], m0[r]), RED)
        emit((m0[r], m1[r], m2[r]), RED)

    triangles = np.vstack(chunks) if chunks else np.empty((0, 3), dtype=np.intp)
    new_tags = np.concatenate(tags) if tags else np.empty(0, dtype=np.uint8)

    tmp = Mesh(vertices, triangles, refinement_tags=new_tags, normalize=False)
    # restore the longest-edge convention for red-lineage children only
    renorm = new_tags == RED
    tri = tmp.triangles.copy()
    tri[renorm] = tmp._longest_edge_first(tmp.triangles)[renorm]

    # rebuild curved boundary nodes: keep stored nodes of unsplit edges and
    # project fresh arc midpoints for the halves of split boundary edges
    curved = {}
    curve = mesh.boundary_curve
    if mesh.curved_edge_nodes or curve is not None:
        tmp2 = Mesh(vertices, tri, refinement_tags=new_tags, normalize=False)
        for e in tmp2.edges[tmp2.boundary_edge_mask]:
            key = (int(e[0]), int(e[1]))
            if key in mesh.curved_edge_nodes:
                curved[key] = mesh.curved_edge_nodes[key]
            elif curve is not None:
                curved[key] = curve.project(0.5 * (vertices[key[0]] + vertices[key[1]]))

    return Mesh(vertices, tri, curved_edge_nodes=curved, boundary_curve=curve,
                refinement_tags=new_tags, normalize=False)


# -- smoothing ---------------------------------------------------------------


def laplacian_smooth(mesh, iters=1):
    """Move interior vertices to the mean of their edge neighbours.

    One iteration is a Gauss-Seidel sweep in vertex order; a move that would
    make any incident triangle non-positively oriented is skipped outright.
    Boundary vertices, curved nodes and the topology are untouched.
    """
    if iters < 0:
        raise ValueError("iteration count must be non-negative")
    if iters == 0 or mesh.n_triangles == 0:
        return mesh

    nv = mesh.n_vertices
    # vertex -> neighbour adjacency in CSR form
    e = mesh.edges
    heads = np.concatenate([e[:, 0], e[:, 1]])
    tails = np.concatenate([e[:, 1], e[:, 0]])
    order = np.argsort(heads, kind="stable")
    nbr = tails[order]
    deg = np.bincount(heads, minlength=nv)
    nptr = np.concatenate([[0], np.cumsum(deg)])
    # vertex -> incident triangle adjacency
    tv = mesh.triangles.ravel()
    tid = np.repeat(np.arange(mesh.n_triangles), 3)
    order = np.argsort(tv, kind="stable")
    inc = tid[order]
    ideg = np.bincount(tv, minlength=nv)
    iptr = np.concatenate([[0], np.cumsum(ideg)])

    p = mesh.vertices.copy()
    t = mesh.triangles
    interior = np.nonzero(~mesh.boundary_vertex_flags)[0]
    for _ in range(iters):
        for v in interior:
            old = p[v].copy()
            p[v] = p[nbr[nptr[v]:nptr[v + 1]]].mean(axis=0)
            tris = t[inc[iptr[v]:iptr[v + 1]]]
            areas = _cross2(p[tris[:, 1]] - p[tris[:, 0]], p[tris[:, 2]] - p[tris[:, 0]])
            if np.any(areas <= 0):
                p[v] = old
    return Mesh(p, mesh.triangles, curved_edge_nodes=mesh.curved_edge_nodes,
                boundary_curve=mesh.boundary_curve,
                refinement_tags=mesh.refinement_tags, normalize=False)


# -- point location ----------------------------------------------------------


def locate_points(mesh, points, k=12):
    """Find containing triangles and barycentric coordinates for points.

    Candidates are the k triangles with nearest centroids; points outside
    the mesh (e.g. between a chord and the curved boundary) fall back to the
    candidate with the least-negative barycentric coordinate, clamped and
    renormalised.  Returns ``(tri_indices, bary)`` with bary of shape (n, 3).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    npts = len(points)
    k = min(k, mesh.n_triangles)
    tree = cKDTree(mesh.centroids())
    _, cand = tree.query(points, k=k)
    cand = cand.reshape(npts, k)

    p = mesh.vertices
    t = mesh.triangles[cand]                       # (npts, k, 3)
    a = p[t[:, :, 0]]
    d1 = p[t[:, :, 1]] - a
    d2 = p[t[:, :, 2]] - a
    det = _cross2(d1, d2)
    rhs = points[:, None, :] - a
    l1 = _cross2(rhs, d2) / det
    l2 = _cross2(d1, rhs) / det
    bary = np.stack([1.0 - l1 - l2, l1, l2], axis=-1)  # (npts, k, 3)

    worst = bary.min(axis=-1)
    inside = worst >= -1e-10
    # first inside candidate, else the least-bad one
    first = np.argmax(inside, axis=1)
    none_inside = ~inside.any(axis=1)
    first[none_inside] = np.argmax(worst[none_inside], axis=1)
    rows = np.arange(npts)
    tri = cand[rows, first]
    b = bary[rows, first]
    b = np.clip(b, 0.0, None)
    b /= b.sum(axis=1, keepdims=True)
    return tri, b


# -- text format -------------------------------------------------------------


def write_mesh_text(mesh, path):
    """Line-oriented mesh snapshot (vertices, triangles, curved nodes)."""
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        if mesh.curved_edge_nodes:
            fh.write(f"curved {len(mesh.curved_edge_nodes)}\n")
            for (i, j), (x, y) in sorted(mesh.curved_edge_nodes.items()):
                fh.write(f"{i} {j} {x:.17g} {y:.17g}\n")


def read_mesh_text(path):
    """Read a mesh written by :func:`write_mesh_text`.

    The curved-boundary projection rule is not part of the format, so
    refining a loaded mesh keeps stored curved nodes but places newly
    created boundary midpoints on straight chords.
    """
    with open(path) as fh:
        tokens = fh.read().split("\n")
    lines = [ln for ln in tokens if ln.strip()]
    pos = 0

    def expect(tag):
        nonlocal pos
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != tag:
            raise MeshError(f"expected '{tag} N' header, got {lines[pos]!r}")
        pos += 1
        return int(parts[1])

    nv = expect("vertices")
    vertices = np.array([[float(w) for w in lines[pos + i].split()] for i in range(nv)])
    pos += nv
    nt = expect("triangles")
    triangles = np.array([[int(w) for w in lines[pos + i].split()] for i in range(nt)],
                         dtype=np.intp)
    pos += nt
    curved = {}
    if pos < len(lines):
        nc = expect("curved")
        for i in range(nc):
            w = lines[pos + i].split()
            curved[(int(w[0]), int(w[1]))] = np.array([float(w[2]), float(w[3])])
    return Mesh(vertices, triangles, curved_edge_nodes=curved, normalize=False)
