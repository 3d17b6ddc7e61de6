"""Sparse storage and the iterative solvers used throughout the package.

Matrices are ``scipy.sparse.csr_matrix`` in canonical form (sorted,
duplicate-free column indices).  Every solver returns a
:class:`SolveReport` next to its solution; non-convergence is flagged in
the report and never silently swallowed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

log = logging.getLogger(__name__)

INNER_TOL = 1e-12
OUTER_TOL = 1e-10

SparseMatrix = sp.csr_matrix


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float
    converged: bool


class SolverError(RuntimeError):
    """Raised by callers that cannot continue after a failed solve."""


def as_csr(A) -> sp.csr_matrix:
    """Canonical CSR copy of ``A``: sorted, summed duplicates, explicit zeros kept out."""
    A = sp.csr_matrix(A, dtype=float, copy=True)
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    return A


def _matvec(A):
    if callable(A) and not hasattr(A, "shape"):
        return A
    if isinstance(A, spla.LinearOperator):
        return A.matvec
    return lambda x: A @ x


def cg_solve(A, b, rel_tol: float = INNER_TOL, max_iter: int | None = None, x0=None,
             project=None):
    """Conjugate gradients for a symmetric positive definite ``A``.

    Parameters
    ----------
    A : sparse matrix, ndarray, LinearOperator or callable ``x -> A x``
    b : right-hand side
    rel_tol : stop when ``||b - A x|| <= rel_tol * ||b||``
    max_iter : iteration cap, default ``10 * len(b)``
    project : optional callable applied to residuals and directions; used to
        keep iterates in a subspace on which ``A`` is definite.

    Returns
    -------
    x, SolveReport
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    matvec = _matvec(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    max_iter = 10 * max(n, 1) if max_iter is None else max_iter
    P = project if project is not None else (lambda v: v)
    x = np.zeros(n) if x0 is None else P(np.array(x0, dtype=float))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    r = P(b - matvec(x))
    rr = r @ r
    d = r.copy()
    it = 0
    res = np.sqrt(rr) / bnorm
    while res > rel_tol and it < max_iter:
        Ad = P(matvec(d))
        dAd = d @ Ad
        if dAd <= 0.0:
            log.warning("cg_solve: non-positive curvature %g at iteration %d", dAd, it)
            break
        alpha = rr / dAd
        x += alpha * d
        r -= alpha * Ad
        rr_new = r @ r
        d = r + (rr_new / rr) * d
        rr = rr_new
        it += 1
        if it % 50 == 0:
            # guard against drift of the recursive residual
            r = P(b - matvec(x))
            rr = r @ r
        res = np.sqrt(rr) / bnorm
    true_res = np.linalg.norm(P(b - matvec(x))) / bnorm
    return x, SolveReport(it, float(true_res), bool(true_res <= rel_tol))


def direct_solver(A):
    """Sparse LU of ``A`` wrapped as ``rhs -> solution``."""
    lu = spla.splu(sp.csc_matrix(A))
    return lu.solve


def saddle_solve(K, B, rhs_u, rhs_p, mean_vector, rel_tol: float = OUTER_TOL,
                 inner_tol: float = INNER_TOL, inner="cg", max_iter: int | None = None):
    """Solve ``K u + B^T p = rhs_u``, ``B u = rhs_p``, ``mean_vector . p = 0``.

    Schur-complement CG: the outer iteration solves
    ``B K^{-1} B^T p = B K^{-1} rhs_u - rhs_p`` with every ``K^{-1}``
    realised by an inner solve.  Constant pressures span the kernel of
    ``B^T``; they are projected out of the outer iterates and the final
    pressure is shifted to satisfy the mean constraint.

    Parameters
    ----------
    inner : "cg", "direct" or a callable ``rhs -> K^{-1} rhs``

    Returns
    -------
    u, p, SolveReport
        The report carries the outer iteration count and the largest of
        the three relative residuals.
    """
    rhs_u = np.asarray(rhs_u, dtype=float)
    rhs_p = np.asarray(rhs_p, dtype=float)
    mean_vector = np.asarray(mean_vector, dtype=float)
    n_p = B.shape[0]
    inner_ok = [True]
    if inner == "cg":
        def Kinv(r):
            x, rep = cg_solve(K, r, inner_tol)
            inner_ok[0] &= rep.converged
            return x
    elif inner == "direct":
        Kinv = direct_solver(K)
    else:
        Kinv = inner
    ones = np.ones(n_p)

    def P(q):
        return q - (q.sum() / n_p) * ones

    def schur(q):
        return B @ Kinv(B.T @ q)

    g = P(B @ Kinv(rhs_u) - rhs_p)
    p, outer = cg_solve(schur, g, rel_tol, max_iter=max_iter, project=P)
    p = p - (mean_vector @ p) / mean_vector.sum() * ones
    u = Kinv(rhs_u - B.T @ p)

    def rel(r, ref):
        nr = np.linalg.norm(r)
        return nr / ref if ref > 0 else nr

    scale_u = max(np.linalg.norm(rhs_u), np.linalg.norm(K @ u))
    scale_p = max(np.linalg.norm(rhs_p), np.linalg.norm(B @ u), np.linalg.norm(rhs_u))
    res = max(
        rel(K @ u + B.T @ p - rhs_u, scale_u),
        rel(B @ u - P(rhs_p), scale_p),
        abs(mean_vector @ p) / max(np.linalg.norm(mean_vector) * np.linalg.norm(p), 1e-300),
    )
    ok = outer.converged and inner_ok[0] and res <= 10 * rel_tol
    return u, p, SolveReport(outer.iterations, float(res), bool(ok))


def smallest_generalized_eig(A, Mmat, tol: float = 1e-8, max_iter: int = 500, solve=None,
                             project=None, x0=None, block: int = 1, seed: int = 0,
                             dual_project=None):
    """Smallest eigenpair of ``A x = lam Mmat x`` by inverse power iteration.

    With ``block > 1`` a block of vectors is iterated and re-orthogonalised
    by Rayleigh-Ritz each step (subspace inverse iteration); the rate then
    depends on ``lam_1 / lam_{block+1}`` instead of ``lam_1 / lam_2``.

    Parameters
    ----------
    A, Mmat : SPD operators (sparse matrices, arrays or callables)
    solve : callable ``rhs -> A^{-1} rhs``; defaults to :func:`cg_solve`
    project : optional projector onto a subspace where ``A`` is definite
        (for example zero-mean pressures)
    dual_project : optional map applied to the residual ``A x - lam M x``;
        defaults to ``project``.  Use it when the residual is a load vector
        that must be projected differently from the iterate.

    Returns
    -------
    lam, x, SolveReport
        Converged when ``||A x - lam M x|| <= tol ||M x||``.
    """
    Av, Mv = _matvec(A), _matvec(Mmat)
    P = project if project is not None else (lambda v: v)
    R = dual_project if dual_project is not None else P
    if solve is None:
        def solve(r):
            x, _ = cg_solve(A, r, INNER_TOL, project=project)
            return x
    n = Mmat.shape[0] if hasattr(Mmat, "shape") else len(x0)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    if x0 is not None:
        X[:, 0] = x0
    X = np.column_stack([P(X[:, j]) for j in range(block)])
    lam, res, x = np.nan, np.inf, X[:, 0]
    for it in range(1, max_iter + 1):
        Y = np.column_stack([P(solve(Mv(X[:, j]))) for j in range(block)])
        AY = np.column_stack([Av(Y[:, j]) for j in range(block)])
        MY = np.column_stack([Mv(Y[:, j]) for j in range(block)])
        if block == 1:
            theta, V = np.array([(Y[:, 0] @ AY[:, 0]) / (Y[:, 0] @ MY[:, 0])]), np.ones((1, 1))
        else:
            Ar, Mr = Y.T @ AY, Y.T @ MY
            theta, V = eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
        X = Y @ V
        AX, MX = AY @ V, MY @ V
        scale = np.sqrt(np.einsum("ij,ij->j", X, MX))
        X, AX, MX = X / scale, AX / scale, MX / scale
        lam, x = float(theta[0]), X[:, 0]
        res = np.linalg.norm(R(AX[:, 0] - lam * MX[:, 0])) / np.linalg.norm(MX[:, 0])
        if res <= tol:
            return lam, x, SolveReport(it, float(res), True)
    return lam, x, SolveReport(max_iter, float(res), False)
