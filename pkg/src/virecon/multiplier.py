"""Discrete Lagrange multiplier, discrete dual norms and the elliptic reconstruction.

The discrete multiplier ``sigma_h`` is the finite element function with

    (sigma_h, v) = (w_t, v) + a(w, v) - (f, v)    for all interior v,

where ``w_t`` is the backward difference quotient.  ``mode="lumped"`` uses
the row-sum lumped mass on the left, ``mode="consistent"`` the full mass
matrix (so the identity holds against every discrete test function).
"""

from dataclasses import dataclass

import numpy as np

from virecon.errors import InvalidArgument
from virecon.fem import FeFunction, assemble_load, prolong, prolongation_matrix
from virecon.linalg import poisson_solver, restrict, solve_spd

MODES = ("lumped", "consistent")


@dataclass(eq=False)
class SigmaRecord:
    sigma: FeFunction
    plus: FeFunction
    minus: FeFunction
    mode: str
    wdot: FeFunction
    t: float = 0.0


@dataclass(eq=False)
class ReconstructionData:
    """Ingredients of the functional ``v -> (f + sigma_h - w_t, v)`` at time ``t``."""

    f: object
    sigma: FeFunction
    wdot: FeFunction
    t: float

    def __post_init__(self):
        if self.sigma.space is not self.wdot.space:
            raise InvalidArgument("sigma and w_t must live on the same space")

    @property
    def space(self):
        return self.sigma.space


def sign_split(sigma):
    """Nodal positive and negative parts, ``sigma = plus - minus``."""
    plus = np.maximum(sigma.coef, 0.0)
    minus = np.maximum(-sigma.coef, 0.0)
    return FeFunction(sigma.space, plus), FeFunction(sigma.space, minus)


def discrete_residual(space, w_curr, w_prev, tau, f, t, load=None):
    """``M (w - w_prev)/tau + K w - load(f, t)`` over all dofs."""
    if load is None:
        load = assemble_load(space, f, t)
    wdot = (w_curr.coef - w_prev.coef) / tau
    return space.mass @ wdot + space.stiffness @ w_curr.coef - load, wdot


def compute_sigma(space, w_curr, w_prev, tau, f, t, mode="lumped", load=None):
    """Discrete multiplier at time ``t`` from two consecutive solutions.

    ``load`` overrides the quadrature of ``(f(t), phi_i)``; the verification
    path passes a load integrated on a finer nested mesh.
    """
    if mode not in MODES:
        raise InvalidArgument(f"unknown sigma mode {mode!r}")
    if w_curr.space is not space or w_prev.space is not space:
        raise InvalidArgument("solutions must live on the given space")
    if not tau > 0:
        raise InvalidArgument("tau must be positive")
    r, wdot = discrete_residual(space, w_curr, w_prev, tau, f, t, load)
    free = space.free
    sigma = np.zeros(space.n_dofs)
    if mode == "lumped":
        sigma[free] = r[free] / space.lumped_mass.diagonal()[free]
    else:
        sigma[free] = solve_spd(restrict(space.mass, free), r[free], rel_tol=1e-13)
    sigma = FeFunction(space, sigma)
    plus, minus = sign_split(sigma)
    return SigmaRecord(sigma, plus, minus, mode, FeFunction(space, wdot), t)


def dual_norm(space, g):
    """Discrete ``V*`` norm: ``sqrt(z . M g)`` with ``K z = M g`` on interior dofs."""
    if isinstance(g, FeFunction):
        g = g.coef
    rhs = space.mass @ g
    free = space.free
    b = rhs[free]
    if not np.any(b):
        return 0.0
    z = poisson_solver(space)(b)
    return float(np.sqrt(max(z @ b, 0.0)))


def restricted_load(coarse, fine, f, t):
    """Coarse load vector integrated on the nested fine mesh (``P^T b_fine``)."""
    P = prolongation_matrix(coarse, fine)
    return P.T @ assemble_load(fine, f, t)


def reconstruct_reference(fine_space, data):
    """Fine-mesh surrogate of the elliptic reconstruction.

    Solves ``a(W, v) = (f + sigma_h - w_t, v)`` for all fine test functions with
    zero boundary values; ``sigma_h`` and ``w_t`` are prolonged exactly.
    """
    coarse = data.space
    if fine_space.mesh is coarse.mesh:
        raise InvalidArgument("reference space must be strictly finer")
    P = prolongation_matrix(coarse, fine_space)
    g = P @ (data.sigma.coef - data.wdot.coef)
    rhs = fine_space.mass @ g + assemble_load(fine_space, data.f, data.t)
    W = np.zeros(fine_space.n_dofs)
    W[fine_space.free] = poisson_solver(fine_space)(rhs[fine_space.free])
    return FeFunction(fine_space, W)


def check_orthogonality(W_ref, w_h):
    """``max_i |a(W_ref - w_h, phi_i)|`` over interior coarse basis functions."""
    P = prolongation_matrix(w_h.space, W_ref.space)
    d = W_ref.coef - P @ w_h.coef
    r = P.T @ (W_ref.space.stiffness @ d)
    free = w_h.space.free
    return float(np.abs(r[free]).max(initial=0.0))


def reference_pairing(W_ref, g, chi):
    """``(g, W_ref - chi)`` on the fine space, ``g`` and ``chi`` prolonged from coarse."""
    fine = W_ref.space
    gf = prolong(g, fine).coef
    return float(gf @ (fine.mass @ (W_ref.coef - prolong(chi, fine).coef)))
