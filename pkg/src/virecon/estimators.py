"""Residual a posteriori estimators and assembly of the total error bound.

All element residuals have the form ``f + sigma + lap(u) - v`` with a pair
``(u, v)`` of finite element fields, weighted by a power of ``h_K``, plus
normal-flux jumps of ``u`` over interior edges weighted by a power of
``h_e``.  The choice of ``(u, v)`` and of the powers distinguishes

========== ======================= ============ ==========
estimator  residual                element wt   edge wt
========== ======================= ============ ==========
eta0       f + sigma + lap w - w_t h_K^4        h_e^3
eta1       f_t + sigma_t + lap w_t h_K^6        h_e^5
           - w_tt
eta_energy as eta0                 h_K^2        h_e^1
========== ======================= ============ ==========

``printed=True`` swaps the roles of ``u`` and ``v`` in the element residual
(``f + sigma + lap w_t - w`` and its time derivative); jumps are unchanged.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from virecon.errors import InvalidArgument
from virecon.fem import _call_field, l2_inner, laplacian, norm, quad_values, shape_gradients
from virecon.quadrature import EDGE_POINTS, EDGE_WEIGHTS


@dataclass(frozen=True)
class EdgeJumps:
    edges: np.ndarray  # interior edge ids
    values: np.ndarray  # [n_interior, 3] jump at the edge Gauss points
    h_e: np.ndarray

    def squared_l2(self):
        """``||J||^2_{L2(e)}`` per interior edge."""
        return self.h_e * (self.values ** 2 @ EDGE_WEIGHTS)


def _edge_bary(mesh, elems, a, b):
    """Barycentric coordinates of the edge Gauss points of ``(a, b)`` in ``elems``."""
    tri = mesh.triangles[elems]
    loc_a = np.argmax(tri == a[:, None], axis=1)
    loc_b = np.argmax(tri == b[:, None], axis=1)
    m = len(elems)
    bary = np.zeros((m, len(EDGE_POINTS), 3))
    rows = np.arange(m)[:, None]
    q = np.arange(len(EDGE_POINTS))[None, :]
    bary[rows, q, loc_a[:, None]] = 1.0 - EDGE_POINTS[None, :]
    bary[rows, q, loc_b[:, None]] = EDGE_POINTS[None, :]
    return bary


def _jump_operator(space):
    """Sparse map from coefficients to normal-flux jumps at the edge Gauss points."""
    if "jump" in space._cache:
        return space._cache["jump"]
    mesh = space.mesh
    edges = mesh.interior_edges
    a, b = mesh.edges[edges, 0], mesh.edges[edges, 1]
    k1, k2 = mesh.edge_elements[edges, 0], mesh.edge_elements[edges, 1]
    tangent = mesh.vertices[b] - mesh.vertices[a]
    n = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / mesh.h_e[edges, None]
    c1 = mesh.vertices[mesh.triangles[k1]].mean(axis=1)
    c2 = mesh.vertices[mesh.triangles[k2]].mean(axis=1)
    flip = np.einsum("md,md->m", c2 - c1, n) < 0
    n[flip] *= -1.0
    nq = len(EDGE_POINTS)
    rows = np.repeat(np.arange(len(edges) * nq), space.n_local)
    parts = []
    for k, sign in ((k1, 1.0), (k2, -1.0)):
        dn = np.einsum("mqid,md->mqi", shape_gradients(space, k, _edge_bary(mesh, k, a, b)), n)
        cols = np.repeat(space.elem_dofs[k][:, None, :], nq, axis=1).ravel()
        parts.append(sp.csr_matrix((sign * dn.ravel(), (rows, cols)),
                                   shape=(len(edges) * nq, space.n_dofs)))
    space._cache["jump"] = (edges, parts[0] + parts[1])
    return space._cache["jump"]


def jump_residual(w):
    """Normal-flux jumps ``(grad w|_K1 - grad w|_K2) . n`` on interior edges.

    ``n`` points from the first to the second neighbour of each edge.
    """
    edges, J = _jump_operator(w.space)
    values = (J @ w.coef).reshape(len(edges), len(EDGE_POINTS))
    return EdgeJumps(edges, values, w.space.mesh.h_e[edges])


def _residual_estimator(space, lap_field, mass_field, sigma, f, t, elem_pow, edge_pow,
                        jump_field):
    """Per-element squared indicators and the total for one residual estimator.

    Edge contributions are split evenly between the two neighbours.
    """
    mesh = space.mesh
    nt = mesh.n_triangles
    _, xy, w = space.quad
    R = np.zeros(w.shape)
    if f is not None:
        R += _call_field(f, xy[..., 0], xy[..., 1], t)
    if sigma is not None:
        R += quad_values(sigma)
    if lap_field is not None and space.degree > 1:
        R += laplacian(lap_field)[:, None]
    if mass_field is not None:
        R -= quad_values(mass_field)
    per_elem = mesh.h_K ** elem_pow * np.sum(w * R * R, axis=1)
    if jump_field is not None:
        jumps = jump_residual(jump_field)
        edge_sq = jumps.h_e ** edge_pow * jumps.squared_l2()
        half = 0.5 * edge_sq
        k = mesh.edge_elements[jumps.edges]
        per_elem = per_elem + np.bincount(k[:, 0], half, nt) + np.bincount(k[:, 1], half, nt)
    return per_elem, float(np.sqrt(per_elem.sum()))


def _pair(w, wdot, printed):
    # (Laplacian field, mass field) of the element residual
    return (wdot, w) if printed else (w, wdot)


def eta0(space, w, wdot, sigma, f, t, printed=False):
    """L2-type residual estimator; returns ``(per-element squared, total)``."""
    lap, mass = _pair(w, wdot, printed)
    return _residual_estimator(space, lap, mass, sigma, f, t, 4, 3, w)


def eta1(space, wdot, wddot, sigmadot, fdot, t, printed=False):
    """Dual-norm residual estimator of the time derivative (degree >= 2 only)."""
    if space.degree < 2:
        raise InvalidArgument("eta1 needs polynomial degree >= 2; use eta0 of the "
                              "differenced fields for P1")
    lap, mass = _pair(wdot, wddot, printed)
    return _residual_estimator(space, lap, mass, sigmadot, fdot, t, 6, 5, wdot)


def eta_energy(space, w, sigma, wdot, f, t, printed=False):
    """Energy-norm residual estimator of the elliptic reconstruction error."""
    lap, mass = _pair(w, wdot, printed)
    return _residual_estimator(space, lap, mass, sigma, f, t, 2, 1, w)[1]


def complementarity_terms(sigma_record, w, chi, eta0_value, W_pairing=None):
    """``(|(sigma, w - chi)|, negative-part term)`` at one time.

    The negative-part term is ``|(sigma^-, w - chi)| + ||sigma^-||_L2 * eta0``
    unless ``W_pairing`` (the value ``(sigma^-, W_ref - chi)`` computed on a
    reference mesh) is supplied.
    """
    gap = w - chi
    term_comp = abs(l2_inner(sigma_record.sigma, gap))
    if W_pairing is not None:
        term_neg = abs(W_pairing)
    else:
        minus = sigma_record.minus
        term_neg = abs(l2_inner(minus, gap)) + norm(minus) * eta0_value
    return term_comp, term_neg


def accumulate(values, tau):
    """Right-endpoint running integrals ``I_n = I_{n-1} + tau * values[n]``."""
    return np.cumsum(tau * np.asarray(values, dtype=float))


ACCUMULATED_KEYS = ("signeg_dual_sq", "comp", "neg", "coupling", "eta_dt_sq", "eta0")
INITIAL_KEYS = ("init_l2", "eta0_init")


@dataclass
class EstimatorBreakdown:
    """Every addend of the total bound at one time.

    Integral entries hold ``int_0^t`` of the squared (or product) quantity;
    ``addends`` holds what enters the sum after square roots and halving.
    """

    signeg_dual_sq: float
    comp: float
    neg: float
    coupling: float
    eta_dt_sq: float
    eta0: float
    init_l2: float
    eta0_init: float
    k: int
    total: float = 0.0
    eta0_elem_sq: np.ndarray = field(default=None, repr=False)

    @property
    def regime(self):
        return "k>=2" if self.k >= 2 else "k=1"

    @property
    def addends(self):
        return {
            "signeg": np.sqrt(self.signeg_dual_sq),
            "comp": np.sqrt(self.comp),
            "neg": np.sqrt(self.neg),
            "coupling": np.sqrt(self.coupling),
            "eta0": 0.5 * self.eta0,
            "eta_dt": np.sqrt(self.eta_dt_sq),
            "init_l2": 0.5 * self.init_l2,
            "eta0_init": 0.5 * self.eta0_init,
        }

    def recombine(self):
        return float(sum(self.addends.values()))


def total_bound(accumulated, initial_terms, k):
    """Assemble the total a posteriori bound from running integrals and initial terms."""
    missing = [key for key in ACCUMULATED_KEYS if key not in accumulated]
    missing += [key for key in INITIAL_KEYS if key not in initial_terms]
    if missing:
        raise InvalidArgument(f"missing estimator components: {missing}")
    values = {key: float(accumulated[key]) for key in ACCUMULATED_KEYS}
    values.update({key: float(initial_terms[key]) for key in INITIAL_KEYS})
    negative = [key for key, v in values.items() if not v >= 0]
    if negative:
        raise InvalidArgument(f"estimator components must be non-negative: {negative}")
    out = EstimatorBreakdown(k=k, eta0_elem_sq=accumulated.get("eta0_elem_sq"), **values)
    out.total = out.recombine()
    return out
