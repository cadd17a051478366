"""Backward-Euler time stepping of the discrete parabolic obstacle problem.

Each step solves the elliptic obstacle problem

    find w >= chi:  (M/tau + K) w - b >= 0,  complementary to w - chi,

with ``b = M w_prev / tau + load(f, t)`` by a primal-dual active set (PDAS)
iteration.  Dirichlet dofs are eliminated (homogeneous values).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from virecon.errors import ConvergenceFailure, InvalidArgument
from virecon.fem import FeFunction, assemble_load, interpolate
from virecon.linalg import restrict, solve_spd
from virecon.mesh import Rectangle


@dataclass(frozen=True)
class ProblemSpec:
    """Data of a parabolic obstacle problem; all fields are called as ``g(x, y, t)``."""

    name: str
    domain: Rectangle
    f: Callable
    chi: Callable
    w0: Callable
    T: float = 0.5
    exact: Optional[Callable] = None
    sigma_exact: Optional[Callable] = None
    f_t: Optional[Callable] = None


@dataclass(frozen=True)
class PdasResult:
    w: np.ndarray
    lam: np.ndarray
    active: np.ndarray
    iterations: int
    fallback: bool = False


@dataclass(eq=False)
class StepState:
    t: float
    w: FeFunction
    lam: np.ndarray
    active: np.ndarray
    chi: FeFunction
    prev: Optional[FeFunction] = None
    iterations: int = 0
    fallback: bool = False


@dataclass(eq=False)
class Trajectory:
    problem: ProblemSpec
    space: object
    tau: float
    states: list
    sigma: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)


def pdas_solve(A, b, chi, init_active=None, tol_active=None, max_iter=None):
    """Primal-dual active set solver for ``w >= chi``, ``A w - b >= 0``, complementarity.

    Parameters
    ----------
    A : sparse SPD matrix (free dofs only)
    b, chi : arrays
    init_active : indices or boolean mask used as the first active set
    tol_active : threshold of the activation test; ``1e-10 * ||b||_inf`` by default

    Returns
    -------
    PdasResult
        ``lam`` is the multiplier ``A w - b`` on active dofs and 0 elsewhere.
        ``fallback`` is set when a cycling active set forced a projected
        Gauss-Seidel solve.
    """
    b = np.asarray(b, dtype=float)
    chi = np.asarray(chi, dtype=float)
    n = len(b)
    if tol_active is None:
        tol_active = 1e-10 * max(np.abs(b).max(initial=0.0), 1e-300)
    if max_iter is None:
        max_iter = n + 1
    active = np.zeros(n, dtype=bool)
    if init_active is not None:
        init_active = np.asarray(init_active)
        if init_active.dtype == bool:
            active[:] = init_active
        else:
            active[init_active.astype(np.int64)] = True
    c = A.diagonal()
    A = A.tocsr()
    seen = set()
    w = np.maximum(np.zeros(n), chi)
    for it in range(1, max_iter + 1):
        key = np.packbits(active).tobytes()
        if key in seen:
            break
        seen.add(key)
        inactive = ~active
        w = np.where(active, chi, w)
        if inactive.any():
            A_I = A[inactive]
            rhs = b[inactive] - A_I[:, active] @ chi[active]
            w[inactive] = solve_spd(A_I[:, inactive], rhs, x0=w[inactive])
        lam = A @ w - b
        lam[inactive] = 0.0
        new_active = lam + c * (chi - w) > tol_active
        if np.array_equal(new_active, active):
            return PdasResult(w, lam, np.flatnonzero(active), it)
        active = new_active
    w, lam, active = projected_gauss_seidel(A, b, chi, w0=w, tol_active=tol_active)
    return PdasResult(w, lam, np.flatnonzero(active), max_iter, fallback=True)


def projected_gauss_seidel(A, b, chi, w0=None, tol=1e-12, max_sweeps=200000,
                           tol_active=0.0):
    """Projected Gauss-Seidel sweeps until the largest update is below ``tol``."""
    A = A.tocsr()
    n = len(b)
    w = np.maximum(chi, np.zeros(n) if w0 is None else w0).astype(float)
    indptr, indices, data = A.indptr, A.indices, A.data
    diag = A.diagonal()
    for _ in range(max_sweeps):
        delta = 0.0
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            s = b[i] - data[lo:hi] @ w[indices[lo:hi]] + diag[i] * w[i]
            new = max(s / diag[i], chi[i])
            delta = max(delta, abs(new - w[i]))
            w[i] = new
        if delta <= tol * max(1.0, np.abs(w).max()):
            break
    else:
        raise ConvergenceFailure("projected Gauss-Seidel did not converge", residual=delta)
    lam = A @ w - b
    active = (w <= chi) & (lam > tol_active)
    lam[~active] = 0.0
    return w, lam, active


def _step_operator(space, tau):
    key = ("step", float(tau))
    if key not in space._cache:
        A = space.mass / tau + space.stiffness
        space._cache[key] = restrict(A, space.free)
    return space._cache[key]


def step(prev, tau, problem, space, t=None):
    """Advance ``prev`` by one backward-Euler step of length ``tau``.

    ``t`` (default ``prev.t + tau``) is the new time level.
    """
    if not tau > 0:
        raise InvalidArgument(f"time step must be positive, got {tau!r}")
    if t is None:
        t = prev.t + tau
    free = space.free
    chi = interpolate(space, problem.chi, t)
    rhs = space.mass @ prev.w.coef / tau + assemble_load(space, problem.f, t)
    A = _step_operator(space, tau)
    pos = np.full(space.n_dofs, -1)
    pos[free] = np.arange(len(free))
    init = pos[prev.active]
    res = pdas_solve(A, rhs[free], chi.coef[free], init_active=init[init >= 0])
    w = np.zeros(space.n_dofs)
    w[free] = res.w
    lam = np.zeros(space.n_dofs)
    lam[free] = res.lam
    return StepState(t, FeFunction(space, w), lam, free[res.active], chi,
                     prev=prev.w, iterations=res.iterations, fallback=res.fallback)


def initial_state(problem, space):
    """Dof-wise maximum of the interpolated initial data and the obstacle, zero on the boundary."""
    chi = interpolate(space, problem.chi, 0.0)
    w = np.maximum(interpolate(space, problem.w0, 0.0).coef, chi.coef)
    w[space.boundary] = 0.0
    active = np.flatnonzero(~space.boundary & (w <= chi.coef))
    return StepState(0.0, FeFunction(space, w), np.zeros(space.n_dofs), active, chi)


def n_steps(T, tau):
    if not (tau > 0 and T > 0):
        raise InvalidArgument(f"T and tau must be positive, got T={T!r}, tau={tau!r}")
    N = int(round(T / tau))
    if N < 1 or abs(N * tau - T) > 1e-9 * max(1.0, abs(T)):
        raise InvalidArgument(f"T={T!r} is not an integer multiple of tau={tau!r}")
    return N


def run_trajectory(problem, space, tau, T=None):
    T = problem.T if T is None else T
    N = n_steps(T, tau)
    states = [initial_state(problem, space)]
    for n in range(1, N + 1):
        # n * tau avoids drift from repeated addition
        states.append(step(states[-1], tau, problem, space, t=n * tau))
    return Trajectory(problem, space, tau, states)


def kkt_residuals(state):
    """Feasibility, multiplier sign and complementarity measures of one state.

    Returns ``(min(w - chi), min(lam), |lam . (w - chi)|, scale)`` over the
    interior dofs, with ``scale = 1 + ||w||_inf + ||chi||_inf + ||lam||_inf``.
    """
    free = state.w.space.free
    w, chi, lam = state.w.coef[free], state.chi.coef[free], state.lam[free]
    gap = w - chi
    scale = 1.0 + sum(float(np.abs(v).max(initial=0.0)) for v in (w, chi, lam))
    return (float(gap.min(initial=np.inf)), float(lam.min(initial=0.0)),
            float(abs(lam @ gap)), scale)
