"""Lagrange P1/P2 spaces on triangles: assembly, interpolation, prolongation, norms.

Shape functions are written in barycentric coordinates.  Local P2 dofs are
ordered ``[v0, v1, v2, m01, m12, m20]`` where ``mij`` is the midpoint of
local edge ``(i, j)``; global P2 dofs are the vertices followed by one dof
per mesh edge.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from virecon.errors import InvalidArgument, NumericError
from virecon.mesh import ancestor_map
from virecon.quadrature import TRI_BARY, TRI_WEIGHTS


@dataclass(frozen=True, eq=False)
class Space:
    mesh: object
    degree: int
    dof_coords: np.ndarray
    elem_dofs: np.ndarray
    boundary: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_dofs(self):
        return len(self.dof_coords)

    @property
    def free(self):
        return np.flatnonzero(~self.boundary)

    @property
    def n_local(self):
        return self.elem_dofs.shape[1]

    # cached assembled operators, used by the solvers and estimators
    @property
    def stiffness(self):
        if "K" not in self._cache:
            self._cache["K"] = assemble_stiffness(self)
        return self._cache["K"]

    @property
    def mass(self):
        if "M" not in self._cache:
            self._cache["M"] = assemble_mass(self)
        return self._cache["M"]

    @property
    def lumped_mass(self):
        if "ML" not in self._cache:
            self._cache["ML"] = assemble_mass(self, lumped=True)
        return self._cache["ML"]

    @property
    def grad_lambda(self):
        if "gl" not in self._cache:
            self._cache["gl"] = barycentric_gradients(self.mesh)
        return self._cache["gl"]

    @property
    def quad(self):
        """Cached ``quadrature_points`` of the mesh."""
        if "quad" not in self._cache:
            self._cache["quad"] = quadrature_points(self.mesh)
        return self._cache["quad"]

    @property
    def value_operator(self):
        """Sparse map from coefficients to values at all quadrature nodes, ``[nt*6, n]``."""
        if "E" not in self._cache:
            nt = self.mesh.n_triangles
            phi = shape_values(self.degree, TRI_BARY)
            rows = np.repeat(np.arange(nt * len(TRI_BARY)), self.n_local)
            cols = np.repeat(self.elem_dofs[:, None, :], len(TRI_BARY), axis=1).ravel()
            vals = np.broadcast_to(phi, (nt,) + phi.shape).ravel()
            E = sp.csr_matrix((vals, (rows, cols)), shape=(nt * len(TRI_BARY), self.n_dofs))
            self._cache["E"] = E
        return self._cache["E"]

    def function(self, coef=None):
        if coef is None:
            coef = np.zeros(self.n_dofs)
        return FeFunction(self, coef)


@dataclass(eq=False)
class FeFunction:
    space: Space
    coef: np.ndarray

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (self.space.n_dofs,):
            raise InvalidArgument(
                f"coefficient vector has shape {self.coef.shape}, "
                f"expected ({self.space.n_dofs},)")

    def _coef_of(self, other):
        if isinstance(other, FeFunction):
            if other.space is not self.space:
                raise InvalidArgument("functions live on different spaces")
            return other.coef
        return other

    def __add__(self, other):
        return FeFunction(self.space, self.coef + self._coef_of(other))

    def __sub__(self, other):
        return FeFunction(self.space, self.coef - self._coef_of(other))

    def __mul__(self, scalar):
        return FeFunction(self.space, self.coef * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FeFunction(self.space, self.coef / scalar)

    def __neg__(self):
        return FeFunction(self.space, -self.coef)


def build_space(mesh, k):
    if k not in (1, 2):
        raise InvalidArgument(f"unsupported polynomial degree {k!r}")
    if k == 1:
        coords = mesh.vertices
        elem_dofs = mesh.triangles
        boundary = mesh.boundary_vertices
    else:
        nv = mesh.n_vertices
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        coords = np.vstack([mesh.vertices, mids])
        elem_dofs = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
        boundary = np.concatenate([mesh.boundary_vertices, mesh.boundary_edges])
    return Space(mesh, k, np.asarray(coords), np.asarray(elem_dofs), np.asarray(boundary))


# ---------------------------------------------------------------------------
# shape functions

def shape_values(k, bary):
    """Basis values at barycentric points ``bary[..., 3]`` -> ``[..., nloc]``."""
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    if k == 1:
        return np.array(bary, dtype=float)
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0], axis=-1)


def shape_dlambda(k, bary):
    """Derivatives with respect to the barycentric coordinates -> ``[..., nloc, 3]``."""
    if k == 1:
        d = np.broadcast_to(np.eye(3), bary.shape[:-1] + (3, 3))
        return np.array(d)
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    z = np.zeros_like(l0)
    rows = [
        (4 * l0 - 1, z, z),
        (z, 4 * l1 - 1, z),
        (z, z, 4 * l2 - 1),
        (4 * l1, 4 * l0, z),
        (z, 4 * l2, 4 * l1),
        (4 * l2, z, 4 * l0),
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _shape_hessian_lambda(k):
    """Constant second derivatives in barycentric coordinates -> ``[nloc, 3, 3]``."""
    if k == 1:
        return np.zeros((3, 3, 3))
    H = np.zeros((6, 3, 3))
    for i in range(3):
        H[i, i, i] = 4.0
    for m, (i, j) in enumerate([(0, 1), (1, 2), (2, 0)]):
        H[3 + m, i, j] = H[3 + m, j, i] = 4.0
    return H


def barycentric_gradients(mesh):
    """Constant gradients of the barycentric coordinates, ``[nt, 3, 2]``."""
    p = mesh.vertices[mesh.triangles]
    two_area = 2.0 * mesh.areas
    nxt = p[:, [1, 2, 0]]
    prv = p[:, [2, 0, 1]]
    g = np.empty_like(p)
    g[..., 0] = (nxt[..., 1] - prv[..., 1]) / two_area[:, None]
    g[..., 1] = (prv[..., 0] - nxt[..., 0]) / two_area[:, None]
    return g


def shape_gradients(space, elems, bary):
    """Physical basis gradients on ``elems`` at ``bary[m, nq, 3]`` -> ``[m, nq, nloc, 2]``."""
    dl = shape_dlambda(space.degree, bary)
    return np.einsum("mqij,mjd->mqid", dl, space.grad_lambda[elems])


def shape_laplacians(space):
    """Per-element constant basis Laplacians, ``[nt, nloc]``."""
    H = _shape_hessian_lambda(space.degree)
    gl = space.grad_lambda
    G = np.einsum("tjd,tld->tjl", gl, gl)
    return np.einsum("ijl,tjl->ti", H, G)


def physical_points(mesh, elems, bary):
    """Map barycentric points ``[m, nq, 3]`` on ``elems`` to coordinates ``[m, nq, 2]``."""
    return np.einsum("mqj,mjd->mqd", bary, mesh.vertices[mesh.triangles[elems]])


def evaluate(u, elems, bary):
    """Values of ``u`` at barycentric points ``bary[m, nq, 3]`` on ``elems``."""
    phi = shape_values(u.space.degree, bary)
    return np.einsum("mqi,mi->mq", phi, u.coef[u.space.elem_dofs[elems]])


def quad_values(u):
    """Values of ``u`` at the quadrature nodes of every element, ``[nt, 6]``."""
    return (u.space.value_operator @ u.coef).reshape(-1, len(TRI_BARY))


def evaluate_gradient(u, elems, bary):
    grads = shape_gradients(u.space, elems, bary)
    return np.einsum("mqid,mi->mqd", grads, u.coef[u.space.elem_dofs[elems]])


def laplacian(u):
    """Element-wise constant Laplacian of ``u`` (zero for P1)."""
    space = u.space
    if "lap" not in space._cache:
        space._cache["lap"] = shape_laplacians(space)
    return np.einsum("ti,ti->t", space._cache["lap"], u.coef[space.elem_dofs])


def quadrature_points(mesh):
    """All 6-point-rule nodes: ``(bary[nt, 6, 3], xy[nt, 6, 2], weights[nt, 6])``."""
    nt = mesh.n_triangles
    bary = np.broadcast_to(TRI_BARY, (nt,) + TRI_BARY.shape)
    xy = physical_points(mesh, np.arange(nt), bary)
    return bary, xy, mesh.areas[:, None] * TRI_WEIGHTS[None, :]


def _call_field(g, x, y, t):
    vals = np.broadcast_to(np.asarray(g(x, y, t), dtype=float), x.shape)
    if not np.all(np.isfinite(vals)):
        raise NumericError("field evaluated to a non-finite value")
    return vals


# ---------------------------------------------------------------------------
# assembly

def _threads():
    try:
        return max(1, int(os.environ.get("VIRECON_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(n, fn):
    """Apply ``fn`` to element ranges and concatenate in element order."""
    threads = _threads()
    if threads == 1 or n < 2048:
        return fn(slice(0, n))
    bounds = np.linspace(0, n, threads + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(fn, slices))
    return np.concatenate(parts)


def _scatter(space, local):
    dofs = space.elem_dofs
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.n_dofs
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def local_stiffness(space, elems=slice(None)):
    mesh = space.mesh
    idx = np.arange(mesh.n_triangles)[elems]
    bary = np.broadcast_to(TRI_BARY, (len(idx),) + TRI_BARY.shape)
    g = shape_gradients(space, idx, bary)
    w = mesh.areas[idx, None] * TRI_WEIGHTS[None, :]
    return np.einsum("mq,mqid,mqjd->mij", w, g, g)


def local_mass(space, elems=slice(None)):
    phi = shape_values(space.degree, TRI_BARY)
    ref = np.einsum("q,qi,qj->ij", TRI_WEIGHTS, phi, phi)
    return space.mesh.areas[elems, None, None] * ref[None]


def assemble_stiffness(space):
    """Stiffness matrix of ``a(p, q) = int grad p . grad q`` (no boundary conditions)."""
    local = _chunked(space.mesh.n_triangles, lambda s: local_stiffness(space, s))
    return _scatter(space, local)


def assemble_mass(space, lumped=False):
    """Consistent mass matrix, or a positive lumped diagonal.

    P1 lumping uses row sums.  P2 row sums vanish at the vertices, so P2 uses
    element-wise diagonal scaling (local diagonal rescaled to sum to ``|K|``).
    """
    local = _chunked(space.mesh.n_triangles, lambda s: local_mass(space, s))
    if lumped and space.degree > 1:
        diag = np.einsum("mii->mi", local)
        diag = diag * (space.mesh.areas / diag.sum(axis=1))[:, None]
        d = np.bincount(space.elem_dofs.ravel(), weights=diag.ravel(),
                        minlength=space.n_dofs)
        return sp.diags(d, format="csr")
    M = _scatter(space, local)
    if lumped:
        M = sp.diags(np.asarray(M.sum(axis=1)).ravel(), format="csr")
    return M


def assemble_load(space, f, t=0.0):
    """Vector of ``int f(., t) phi_i`` with the 6-point rule.

    ``f`` is called as ``f(x, y, t)`` on arrays and must broadcast.  The most
    recent ``(f, t)`` is memoized since a time step and the multiplier both
    need it.
    """
    last = space._cache.get("load")
    if last is not None and last[0] is f and last[1] == t:
        return last[2].copy()
    mesh = space.mesh
    xy_all = space.quad[1]

    def chunk(s):
        idx = np.arange(mesh.n_triangles)[s]
        xy = xy_all[idx]
        fq = _call_field(f, xy[..., 0], xy[..., 1], t)
        phi = shape_values(space.degree, TRI_BARY)
        w = mesh.areas[idx, None] * TRI_WEIGHTS[None, :]
        return np.einsum("mq,mq,qi->mi", w, fq, phi)

    local = _chunked(mesh.n_triangles, chunk)
    b = np.bincount(space.elem_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs)
    space._cache["load"] = (f, t, b)
    return b.copy()


def interpolate(space, g, t=0.0):
    """Nodal interpolant of ``g(x, y, t)``."""
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    return FeFunction(space, _call_field(g, x, y, t).copy())


# ---------------------------------------------------------------------------
# nested spaces

def prolongation_matrix(coarse, fine):
    """Sparse matrix mapping coarse coefficients to the identical fine function."""
    if coarse.degree != fine.degree:
        raise InvalidArgument("prolongation needs equal polynomial degree")
    key = ("P", id(coarse))
    if key in fine._cache and fine._cache[key][0] is coarse:
        return fine._cache[key][1]
    anc = ancestor_map(fine.mesh, coarse.mesh)
    dofs = fine.elem_dofs.ravel()
    uniq, first = np.unique(dofs, return_index=True)
    owner = anc[first // fine.n_local]
    x = fine.dof_coords[uniq]
    cmesh = coarse.mesh
    centroid = cmesh.vertices[cmesh.triangles[owner]].mean(axis=1)
    bary = 1.0 / 3.0 + np.einsum("mjd,md->mj", coarse.grad_lambda[owner], x - centroid)
    vals = shape_values(coarse.degree, bary)
    vals[np.abs(vals) < 1e-12] = 0.0
    rows = np.repeat(uniq, coarse.n_local)
    cols = coarse.elem_dofs[owner].ravel()
    P = sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(fine.n_dofs, coarse.n_dofs))
    P.eliminate_zeros()
    fine._cache[key] = (coarse, P)
    return P


def prolong(u, fine):
    """Represent ``u`` exactly on a refinement-descendant space."""
    P = prolongation_matrix(u.space, fine)
    return FeFunction(fine, P @ u.coef)


# ---------------------------------------------------------------------------
# norms

def norm(u, which="L2"):
    if which == "L2":
        A = u.space.mass
    elif which == "H1_semi":
        A = u.space.stiffness
    else:
        raise InvalidArgument(f"unknown norm {which!r}")
    return float(np.sqrt(max(u.coef @ (A @ u.coef), 0.0)))


def l2_error(u, g, t=0.0):
    """``||u - g(., t)||_{L2}`` with the 6-point rule."""
    _, xy, w = u.space.quad
    diff = quad_values(u) - _call_field(g, xy[..., 0], xy[..., 1], t)
    return float(np.sqrt(np.sum(w * diff ** 2)))


def l2_inner(u, v):
    """``(u, v)_{L2}`` of two functions on the same space, by quadrature."""
    if v.space is not u.space:
        raise InvalidArgument("functions live on different spaces")
    w = u.space.quad[2]
    return float(np.sum(w * quad_values(u) * quad_values(v)))
