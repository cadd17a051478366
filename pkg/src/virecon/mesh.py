"""Conforming triangulations of rectangles with newest-vertex bisection.

Every triangle is stored counterclockwise with its refinement edge first:
for local vertices ``(a, b, c)`` the edge ``(a, b)`` is bisected next and
``c`` is the newest vertex.  Local edge ``i`` joins local vertices ``i`` and
``(i + 1) % 3``.
"""

from dataclasses import dataclass, field

import numpy as np

from virecon.errors import InvalidArgument

ALL = "all"


@dataclass(frozen=True)
class Rectangle:
    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise InvalidArgument(f"degenerate rectangle {self}")

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def diameter(self):
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    def on_boundary(self, points, tol=1e-12):
        x, y = points[..., 0], points[..., 1]
        scale = tol * max(1.0, self.diameter)
        return (
            (np.abs(x - self.x0) < scale)
            | (np.abs(x - self.x1) < scale)
            | (np.abs(y - self.y0) < scale)
            | (np.abs(y - self.y1) < scale)
        )


UNIT_SQUARE = Rectangle()


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation with full edge topology.

    Use :func:`build_structured_mesh`, :func:`refine` or :meth:`from_triangles`
    rather than the constructor.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    edge_elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_vertices: np.ndarray
    areas: np.ndarray
    h_K: np.ndarray
    h_e: np.ndarray
    domain: Rectangle = None
    parent: "Mesh" = field(default=None, repr=False)
    parent_elements: np.ndarray = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior_edges(self):
        return np.flatnonzero(~self.boundary_edges)

    @property
    def max_h(self):
        return float(self.h_K.max())

    @classmethod
    def from_triangles(cls, vertices, triangles, domain=None, parent=None,
                       parent_elements=None, longest_edge_first=False):
        """Build the topology for a vertex/triangle list.

        Orientation is normalized to counterclockwise.  With
        ``longest_edge_first`` each triangle is rotated so its longest edge
        becomes the refinement edge.
        """
        vertices = np.ascontiguousarray(vertices, dtype=float)
        tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        p = vertices[tri]
        cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                 - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        if np.any(cross == 0.0):
            raise InvalidArgument("degenerate triangle")
        cw = cross < 0
        tri[cw] = tri[cw][:, [1, 0, 2]]
        if longest_edge_first:
            p = vertices[tri]
            lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
            shift = np.argmax(lengths, axis=1)
            idx = (shift[:, None] + np.arange(3)) % 3
            tri = np.take_along_axis(tri, idx, axis=1)
        return _with_topology(vertices, tri, domain, parent, parent_elements)


def _with_topology(vertices, tri, domain, parent, parent_elements):
    nt = len(tri)
    local = np.stack([tri, np.roll(tri, -1, axis=1)], axis=2).reshape(-1, 2)
    keys = np.sort(local, axis=1)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True,
                                       return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise InvalidArgument("non-manifold edge (shared by more than two triangles)")
    triangle_edges = inverse.reshape(nt, 3)

    edge_elements = np.full((len(edges), 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nt), 3)
    order = np.argsort(inverse, kind="stable")
    sorted_edges = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_edges[1:] != sorted_edges[:-1]
    edge_elements[sorted_edges[first], 0] = owner[order[first]]
    edge_elements[sorted_edges[~first], 1] = owner[order[~first]]

    boundary_edges = counts == 1
    boundary_vertices = np.zeros(len(vertices), dtype=bool)
    boundary_vertices[edges[boundary_edges].ravel()] = True

    p = vertices[tri]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    h_e = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    h_K = h_e[triangle_edges].max(axis=1)

    for a in (vertices, tri, edges, triangle_edges, edge_elements,
              boundary_edges, boundary_vertices, areas, h_K, h_e):
        a.setflags(write=False)
    if parent_elements is not None:
        parent_elements = np.asarray(parent_elements, dtype=np.int64)
        parent_elements.setflags(write=False)
    return Mesh(vertices, tri, edges, triangle_edges, edge_elements,
                boundary_edges, boundary_vertices, areas, h_K, h_e,
                domain, parent, parent_elements)


def build_structured_mesh(n, domain=UNIT_SQUARE):
    """``n x n`` grid of cells, each split along its lower-left/upper-right diagonal."""
    if not isinstance(domain, Rectangle):
        domain = Rectangle(*domain)
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n!r}")
    n = int(n)
    xs = np.linspace(domain.x0, domain.x1, n + 1)
    ys = np.linspace(domain.y0, domain.y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    p00 = j * (n + 1) + i
    p10 = p00 + 1
    p01 = p00 + n + 1
    p11 = p01 + 1
    # diagonal (p00, p11) is the longest edge of both halves
    lower = np.column_stack([p11, p00, p10])
    upper = np.column_stack([p00, p11, p01])
    tri = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return _with_topology(vertices, tri, domain, None, None)


def refine(mesh, marks=ALL):
    """Newest-vertex bisection of the marked elements plus conforming closure.

    Returns a new mesh whose ``parent`` is ``mesh`` and whose
    ``parent_elements[i]`` is the element of ``mesh`` containing child ``i``.
    Coarse vertices keep their indices.
    """
    nt = mesh.n_triangles
    if isinstance(marks, str):
        if marks != ALL:
            raise InvalidArgument(f"unknown marks {marks!r}")
        marked = np.ones(nt, dtype=bool)
    else:
        idx = np.asarray(list(marks) if not isinstance(marks, np.ndarray) else marks,
                         dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= nt):
            raise InvalidArgument("mark outside element range")
        marked = np.zeros(nt, dtype=bool)
        marked[idx] = True

    ref_edge = mesh.triangle_edges[:, 0]
    edge_marked = np.zeros(mesh.n_edges, dtype=bool)
    edge_marked[ref_edge[marked]] = True
    # closure: an element with any bisected edge must bisect its refinement edge
    while True:
        touched = edge_marked[mesh.triangle_edges].any(axis=1)
        new = touched & ~edge_marked[ref_edge]
        if not new.any():
            break
        edge_marked[ref_edge[new]] = True

    bisect = edge_marked[mesh.triangle_edges].any(axis=1)
    marked_edges = mesh.edges[edge_marked]
    n_old = mesh.n_vertices
    midpoint_of = {(int(a), int(b)): n_old + k for k, (a, b) in enumerate(marked_edges)}
    new_vertices = 0.5 * (mesh.vertices[marked_edges[:, 0]]
                          + mesh.vertices[marked_edges[:, 1]])
    vertices = np.vstack([mesh.vertices, new_vertices])

    keep = np.flatnonzero(~bisect)
    children = [mesh.triangles[keep]]
    parents = [keep]
    out_tri, out_parent = [], []

    def split(a, b, c, parent):
        m = midpoint_of.get((a, b) if a < b else (b, a))
        if m is None:
            out_tri.append((a, b, c))
            out_parent.append(parent)
            return
        split(c, a, m, parent)
        split(b, c, m, parent)

    for t in np.flatnonzero(bisect):
        a, b, c = (int(v) for v in mesh.triangles[t])
        split(a, b, c, int(t))

    if out_tri:
        children.append(np.array(out_tri, dtype=np.int64))
        parents.append(np.array(out_parent, dtype=np.int64))
    tri = np.concatenate(children)
    parent_elements = np.concatenate(parents)
    # deterministic element order: by parent, then creation order
    order = np.argsort(parent_elements, kind="stable")
    return _with_topology(vertices, tri[order], mesh.domain, mesh,
                          parent_elements[order])


def uniform_refine(mesh, levels=1):
    """Halve the mesh size ``levels`` times (two bisection sweeps per level)."""
    for _ in range(2 * levels):
        mesh = refine(mesh, ALL)
    return mesh


def mesh_metrics(mesh):
    """Return ``(h_K, h_e, max_h)``: element diameters, edge lengths, largest diameter."""
    return mesh.h_K, mesh.h_e, mesh.max_h


def ancestor_map(fine, coarse):
    """Element of ``coarse`` containing each element of ``fine``.

    Raises ``InvalidArgument`` if ``fine`` was not obtained from ``coarse``
    by a sequence of :func:`refine` calls.
    """
    elems = np.arange(fine.n_triangles)
    m = fine
    while m is not coarse:
        if m.parent is None:
            raise InvalidArgument("mesh is not a refinement descendant")
        elems = m.parent_elements[elems]
        m = m.parent
    return elems


def check_mesh(mesh, rtol=1e-12):
    """List violated mesh invariants; an empty list means the mesh is valid."""
    problems = []
    if np.any(mesh.areas <= 0):
        problems.append("non-positive or clockwise triangle")
    n_adj = (mesh.edge_elements >= 0).sum(axis=1)
    if np.any((n_adj < 1) | (n_adj > 2)):
        problems.append("edge with wrong number of neighbours")
    if mesh.domain is not None:
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        on_bd = mesh.domain.on_boundary(mids)
        if np.any(mesh.boundary_edges & ~on_bd):
            problems.append("hanging node: one-sided edge inside the domain")
        if np.any(~mesh.boundary_edges & on_bd):
            problems.append("two-sided edge on the domain boundary")
        area = mesh.areas.sum()
        if abs(area - mesh.domain.area) > rtol * mesh.domain.area:
            problems.append(f"area {area!r} != domain area {mesh.domain.area!r}")
    if np.any(mesh.h_e[mesh.triangle_edges] > mesh.h_K[:, None]):
        problems.append("edge longer than element diameter")
    if mesh.parent is not None:
        nv = mesh.parent.n_vertices
        if not np.array_equal(mesh.vertices[:nv], mesh.parent.vertices):
            problems.append("coarse vertex moved")
    return problems
