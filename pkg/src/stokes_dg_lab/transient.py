"""Discontinuous Galerkin time stepping for transient Stokes and heat problems.

On each interval ``I_m`` with temporal modes ``phi_0..phi_w`` the unknowns
``U_j`` (and ``P_j`` for Stokes) solve

    sum_j (D_ij + phi_j(0) phi_i(0)) M U_j + tau N_i (K U_i + B^T P_i)
        = F_i + phi_i(0) M u_{m-1}^-,          B U_i = 0,

where ``D`` is the reference derivative matrix, ``N_i`` the basis norms and
``F_i = int_{I_m} (f, .) phi_i``.  On the first interval ``M u_0^-`` is
replaced by the load of the initial datum, ``(u_0, phi_k)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg
from .manufactured import ManufacturedProblem
from .operators import (
    DiscreteField,
    HeatDiscretization,
    StokesDiscretization,
    leray_from_load,
)
from .fespace import ElementTables
from .quadrature import quadrature_rule
from .timegrid import (
    SpaceTimeCoefficients,
    TimePartition,
    basis_norms,
    basis_values,
    derivative_matrix,
    left_values,
    right_values,
    time_quadrature,
)


@dataclass(eq=False)
class DGData:
    """Raw data for a solve: ``f(t, x, y)`` (or None for zero) and ``u0``.

    ``u0`` is a callable ``(x, y)``, a :class:`DiscreteField` or a free
    coefficient vector.
    """

    f: object = None
    u0: object = None


@dataclass(eq=False)
class SpaceTimeSolution:
    disc: object
    partition: TimePartition
    w: int
    velocity: SpaceTimeCoefficients
    pressure: SpaceTimeCoefficients | None = None
    initial: np.ndarray | None = None  # u_0^-: projected initial datum
    reports: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def node_summary(self) -> list[dict]:
        """Per node: ``||u_m^-||_M`` and the jump norm ``||[u]_m||_M``."""
        d = self.disc
        out = []
        for m in range(self.partition.M + 1):
            left = self.velocity.left_trace(m) if m >= 1 else self.initial
            row = {"m": m, "t": float(self.partition.nodes[m])}
            row["left_norm"] = d.l2_norm(left) if left is not None else None
            if m < self.partition.M and left is not None:
                row["jump_norm"] = d.l2_norm(self.velocity.right_trace(m) - left)
            else:
                row["jump_norm"] = None
            out.append(row)
        return out

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"w": self.w, "nodes": self.node_summary()}, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# data handling


def _data(problem):
    if isinstance(problem, ManufacturedProblem):
        return DGData(problem.f, problem.u0)
    if isinstance(problem, DGData):
        return problem
    f, u0 = problem
    return DGData(f, u0)


def initial_load(disc, u0) -> np.ndarray:
    """Moments ``(u_0, phi_k)`` of the initial datum."""
    if u0 is None:
        return np.zeros(disc.n_u)
    if isinstance(u0, DiscreteField):
        return disc.M @ u0.coef
    if not callable(u0):
        return disc.M @ np.asarray(u0, dtype=float)
    return disc.load_values(disc.evaluate(u0))


def load_moments(disc, f, partition: TimePartition, w: int, points: int | None = None):
    """``F[m, i] = int_{I_m} (f, phi_k) phi_i dt`` by Gauss quadrature (default ``w + 2`` points)."""
    M = partition.M
    F = np.zeros((M, w + 1, disc.n_u))
    if f is None:
        return F
    points = w + 2 if points is None else points
    s, t, wt = time_quadrature(partition, points)
    phi = basis_values(w, s)
    for m in range(M):
        for q in range(points):
            L = disc.load_values(disc.evaluate(f, float(t[m, q])))
            F[m] += wt[m, q] * phi[:, q, None] * L[None, :]
    return F


def project_initial(disc, load) -> np.ndarray:
    """``u_0^-``: Leray projection (Stokes) or L2 projection (heat) from the load."""
    if isinstance(disc, StokesDiscretization):
        return leray_from_load(disc, load)
    solve = disc.factor("mass", lambda: sp.csc_matrix(disc.M))
    return solve(load)


# ---------------------------------------------------------------------------
# time marching


def interval_matrix(Mmat, Kmat, w: int, tau: float, B=None, mean_vector=None):
    """Block matrix of one dG interval, unknowns ordered mode by mode."""
    D = derivative_matrix(w) + np.outer(left_values(w), left_values(w))
    N = basis_norms(w)
    n_u = Mmat.shape[0]
    stokes = B is not None
    n_p = B.shape[0] if stokes else 0
    rows = []
    for i in range(w + 1):
        row = []
        for j in range(w + 1):
            A = D[i, j] * Mmat
            if i == j:
                A = A + tau * N[i] * Kmat
            if not stokes:
                row.append(A)
                continue
            if i == j:
                s = tau * N[i]
                m = s * mean_vector[:, None]
                row.append(sp.bmat([[A, s * B.T, None], [s * B, None, m], [None, m.T, None]]))
            else:
                row.append(sp.block_diag([A, sp.csr_matrix((n_p + 1, n_p + 1))]))
        rows.append(row)
    out = sp.bmat(rows, format="csc")
    assert out.shape[0] == (w + 1) * (n_u + n_p + (1 if stokes else 0))
    return out


def dg_march(Mmat, Kmat, partition: TimePartition, w: int, F, u0_load,
             B=None, mean_vector=None, factor_cache=None):
    """March the dG(w) scheme over all intervals.

    Parameters
    ----------
    Mmat, Kmat : mass and stiffness (sparse or dense, ``n x n``)
    F : ``(M, w + 1, n)`` load moments
    u0_load : moments of the initial datum (enter the first interval)
    B, mean_vector : coupling block and pressure mean vector (Stokes only)

    Returns
    -------
    U : ``(M, w + 1, n)``, P : ``(M, w + 1, n_p)`` or None, reports
    """
    Mmat, Kmat = sp.csr_matrix(Mmat), sp.csr_matrix(Kmat)
    n_u = Mmat.shape[0]
    stokes = B is not None
    n_p = B.shape[0] if stokes else 0
    nb = n_u + (n_p + 1 if stokes else 0)
    cache = {} if factor_cache is None else factor_cache
    phi0 = left_values(w)
    end = right_values(w)
    U = np.zeros((partition.M, w + 1, n_u))
    P = np.zeros((partition.M, w + 1, n_p)) if stokes else None
    reports = []
    prev = np.asarray(u0_load, dtype=float)  # M u_{m-1}^- (the load on I_1)
    for m in range(partition.M):
        tau = float(partition.steps[m])
        key = (w, tau)
        if key not in cache:
            A = interval_matrix(Mmat, Kmat, w, tau, B, mean_vector)
            try:
                cache[key] = (A, linalg.direct_solver(A))
            except RuntimeError as exc:
                raise linalg.SolverError(f"interval {m + 1}: factorisation failed ({exc})") from exc
        A, solve = cache[key]
        rhs = np.zeros((w + 1) * nb)
        for i in range(w + 1):
            rhs[i * nb: i * nb + n_u] = F[m, i] + phi0[i] * prev
        x = solve(rhs)
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(A @ x - rhs) / bnorm if bnorm > 0 else float(np.linalg.norm(x))
        ok = bool(np.all(np.isfinite(x)) and res <= 1e-8)
        reports.append(linalg.SolveReport(1, float(res), ok))
        if not ok:
            raise linalg.SolverError(f"interval {m + 1}: solve failed (relative residual {res:.3e})")
        x = x.reshape(w + 1, nb)
        U[m] = x[:, :n_u]
        if stokes:
            P[m] = x[:, n_u: n_u + n_p]
        prev = Mmat @ (end @ U[m])
    return U, P, reports


def _solve(problem, disc, partition, w, B=None, mean=None):
    data = _data(problem)
    F = load_moments(disc, data.f, partition, w)
    g0 = initial_load(disc, data.u0)
    cache = disc._factors.setdefault("dg", {})
    U, P, reports = dg_march(disc.M, disc.K, partition, w, F, g0, B, mean, factor_cache=cache)
    sol = SpaceTimeSolution(
        disc=disc, partition=partition, w=w,
        velocity=SpaceTimeCoefficients(partition, w, U),
        pressure=SpaceTimeCoefficients(partition, w, P) if P is not None else None,
        initial=project_initial(disc, g0),
        reports=reports,
    )
    sol.meta["initial_load"] = g0
    sol.meta["loads"] = F
    return sol


def solve_stokes_dg(problem, disc: StokesDiscretization, partition: TimePartition, w: int) -> SpaceTimeSolution:
    """dG(w) in time, Taylor-Hood in space, for ``u_t - Delta u + grad p = f``, ``div u = 0``.

    ``problem`` is a :class:`ManufacturedProblem`, a :class:`DGData` or a
    pair ``(f, u0)``.
    """
    if not isinstance(disc, StokesDiscretization):
        raise TypeError("solve_stokes_dg needs a StokesDiscretization")
    return _solve(problem, disc, partition, w, disc.B, disc.ops.mean_vector)


def solve_heat_dg(problem, disc: HeatDiscretization, partition: TimePartition, w: int) -> SpaceTimeSolution:
    """dG(w) in time, P2 in space, for ``u_t - Delta u = f``."""
    if not isinstance(disc, HeatDiscretization):
        raise TypeError("solve_heat_dg needs a HeatDiscretization")
    return _solve(problem, disc, partition, w)


def solve_dg(problem, disc, partition, w):
    if isinstance(disc, StokesDiscretization):
        return solve_stokes_dg(problem, disc, partition, w)
    return solve_heat_dg(problem, disc, partition, w)


# ---------------------------------------------------------------------------
# bilinear forms


def _check_compatible(a, b):
    if a.disc is not b.disc or a.w != b.w or not (
        a.partition is b.partition or np.array_equal(a.partition.nodes, b.partition.nodes)
    ):
        raise ValueError("trial and test live on different discretisations")


def _pressure(sol, disc):
    if sol.pressure is None or disc.B is None:
        return np.zeros((sol.partition.M, sol.w + 1, disc.n_p))
    return sol.pressure.coef


def eval_form(representation: str, trial, test, constrained: bool = False) -> float:
    """Evaluate the space-time bilinear form in primal or dual representation.

    With ``constrained=True`` the pressure terms are dropped (the form on
    discretely divergence-free velocities).
    """
    _check_compatible(trial, test)
    d, w, part = trial.disc, trial.w, trial.partition
    Mm, Km, Bm = d.M, d.K, d.B
    U, V = trial.velocity.coef, test.velocity.coef
    P, Q = _pressure(trial, d), _pressure(test, d)
    D = derivative_matrix(w)
    N = basis_norms(w)
    total = 0.0
    for m in range(part.M):
        tau = part.steps[m]
        MU = np.array([Mm @ U[m, j] for j in range(w + 1)])
        if representation == "primal":
            total += np.einsum("ij,ik,jk->", D, V[m], MU)
        elif representation == "dual":
            total -= np.einsum("ji,ik,jk->", D, V[m], MU)
        else:
            raise ValueError("representation must be 'primal' or 'dual'")
        for i in range(w + 1):
            s = tau * N[i]
            total += s * (V[m, i] @ (Km @ U[m, i]))
            if Bm is not None and not constrained:
                total += s * (P[m, i] @ (Bm @ V[m, i]) - Q[m, i] @ (Bm @ U[m, i]))
    tv, tu = test.velocity, trial.velocity
    if representation == "primal":
        total += tv.right_trace(0) @ (Mm @ tu.right_trace(0))
        for m in range(1, part.M):
            jump = tu.right_trace(m) - tu.left_trace(m)
            total += tv.right_trace(m) @ (Mm @ jump)
    else:
        for m in range(1, part.M):
            jump = tv.right_trace(m) - tv.left_trace(m)
            total -= jump @ (Mm @ tu.left_trace(m))
        total += tv.left_trace(part.M) @ (Mm @ tu.left_trace(part.M))
    return float(total)


def rhs_functional(solution: SpaceTimeSolution, test, problem=None) -> float:
    """``(f, v)_{I x Omega} + (u_0, v_0^+)`` with the solver's own quadrature.

    Without ``problem`` the load moments stored by the solver are reused.
    """
    d, w, part = solution.disc, solution.w, solution.partition
    if problem is None:
        F, g0 = solution.meta["loads"], solution.meta["initial_load"]
    else:
        data = _data(problem)
        F, g0 = load_moments(d, data.f, part, w), initial_load(d, data.u0)
    total = float(np.einsum("mik,mik->", F, test.velocity.coef))
    return total + float(test.velocity.right_trace(0) @ g0)


def random_test_pair(disc, partition: TimePartition, w: int, rng, divergence_free: bool = False):
    """Random discrete space-time pair ``(v, q)`` for identity checks."""
    M = partition.M
    V = rng.standard_normal((M, w + 1, disc.n_u))
    if divergence_free:
        V = np.array([[leray_from_load(disc, disc.M @ V[m, j]) for j in range(w + 1)] for m in range(M)])
    Q = None
    if disc.B is not None and not divergence_free:
        Q = SpaceTimeCoefficients(partition, w, rng.standard_normal((M, w + 1, disc.n_p)))
    return SpaceTimeSolution(disc, partition, w, SpaceTimeCoefficients(partition, w, V), Q)


def exact_residual(problem: ManufacturedProblem, disc, test, time_points: int = 6, tables=None) -> tuple[float, float]:
    """Consistency residual of the exact solution against a discrete test pair.

    Returns ``(residual, scale)`` where ``residual`` is
    ``B((u, p), (v, q)) - (f, v) - (u_0, v_0^+)`` with the exact fields
    inserted (weak form, spatial quadrature from ``tables``) and ``scale``
    the sum of absolute values of the individual terms.  The default
    spatial rule has degree 10 so that quadrature error stays far below
    the consistency being tested.
    """
    from .assembly import load_from_gradients, load_from_values, pressure_moments

    tables = ElementTables(disc.mesh, quadrature_rule(10)) if tables is None else tables
    vel = disc.velocity
    part, w = test.partition, test.w
    x, y = tables.xq[..., 0], tables.xq[..., 1]
    s, t, wt = time_quadrature(part, time_points)
    phi = basis_values(w, s)
    V = test.velocity.coef
    Q = _pressure(test, disc)
    stokes = disc.B is not None
    eye = np.eye(2)[:, :, None, None]
    res, scale = 0.0, 0.0
    for m in range(part.M):
        for k in range(time_points):
            tk = float(t[m, k])
            v = phi[:, k] @ V[m]
            G = problem.grad_u(tk, x, y)
            terms = [
                load_from_values(vel, tables, problem.dt_u(tk, x, y)) @ v,
                -load_from_values(vel, tables, problem.f(tk, x, y)) @ v,
                load_from_gradients(vel, tables, G) @ v,
            ]
            if stokes:
                p = problem.p(tk, x, y)
                terms.append(-load_from_gradients(vel, tables, eye * p[None, None]) @ v)
                div = G[0, 0] + G[1, 1]
                terms.append(pressure_moments(disc.space, tables, div) @ (phi[:, k] @ Q[m]))
            res += wt[m, k] * sum(terms)
            scale += wt[m, k] * sum(abs(a) for a in terms)
    # (u(0) - u_0, v_0^+) vanishes identically; jumps of the continuous exact u vanish
    return float(res), float(scale)
