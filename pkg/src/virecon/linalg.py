"""Jacobi-preconditioned conjugate gradients and Dirichlet elimination."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from virecon.errors import ConvergenceFailure, InvalidArgument


def solve_spd(A, b, rel_tol=1e-12, x0=None, maxiter=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops once ``||A x - b|| <= rel_tol * ||b||``.  The iteration cap defaults
    to ten times the dimension; exceeding it raises ``ConvergenceFailure``
    carrying the final residual norm.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise InvalidArgument(f"matrix shape {A.shape} does not match rhs length {n}")
    if maxiter is None:
        maxiter = 10 * max(n, 1)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise InvalidArgument("matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = rel_tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            true_r = np.linalg.norm(b - A @ x)
            if true_r <= target:
                return x
            r = b - A @ x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceFailure(
        f"CG did not reach rel_tol={rel_tol:g} in {maxiter} iterations "
        f"(residual {rnorm:.3e}, ||b|| {bnorm:.3e})", residual=rnorm)


def restrict(A, free):
    """Rows and columns of ``A`` belonging to the free (interior) dofs."""
    return A[free][:, free].tocsr()


def solve_dirichlet(A, b, free, rel_tol=1e-12):
    """Solve with homogeneous Dirichlet values on the non-free dofs."""
    x = np.zeros(A.shape[0])
    x[free] = solve_spd(restrict(A, free), b[free], rel_tol=rel_tol)
    return x


def factorized(A):
    """Sparse LU factorization of ``A`` for many right-hand sides; returns ``solve(b)``."""
    return spla.splu(sp.csc_matrix(A)).solve


def poisson_solver(space):
    """Cached solver for the stiffness matrix on the interior dofs of ``space``."""
    if "poisson" not in space._cache:
        space._cache["poisson"] = factorized(restrict(space.stiffness, space.free))
    return space._cache["poisson"]
