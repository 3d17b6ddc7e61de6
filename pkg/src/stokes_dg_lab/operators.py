"""Discrete projections and the discrete Stokes operator.

All constrained problems are solved as bordered saddle systems

    [[A, B^T, 0], [B, 0, m], [0, m^T, 0]]

where ``A`` is the velocity mass or stiffness matrix, ``B`` the coupling
block and ``m`` the pressure mean vector (the scalar multiplier pins the
pressure mean to zero).  Factorisations are cached per discretisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import linalg
from .assembly import (
    OperatorSet,
    assemble_operators,
    field_values,
    load_from_gradients,
    load_from_values,
    pressure_moments,
    scalar_mass,
    scalar_stiffness,
)
from .fespace import ElementTables, FESpacePair, LagrangeSpace, build_scalar_p2, build_taylor_hood
from .mesh import Mesh

VH_TOL = 1e-10


class NotDivergenceFree(ValueError):
    """Input velocity violates the discrete divergence constraint."""


@dataclass(eq=False)
class DiscreteField:
    space: object
    coef: np.ndarray
    kind: str  # "velocity", "pressure" or "scalar"

    def __post_init__(self):
        n = {"velocity": lambda s: s.n_u_free, "pressure": lambda s: s.n_p,
             "scalar": lambda s: s.n_free}[self.kind](self.space)
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape != (n,):
            raise ValueError(f"{self.kind} field needs {n} coefficients, got {self.coef.shape}")


class StokesDiscretization:
    """Taylor-Hood space with assembled operators and cached solvers."""

    def __init__(self, space: FESpacePair, tables: ElementTables | None = None):
        self.space = space
        self.mesh = space.mesh
        self.tables = tables if tables is not None else ElementTables(space.mesh)
        self.ops: OperatorSet = assemble_operators(space, self.tables)
        self._factors = {}

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "StokesDiscretization":
        return cls(build_taylor_hood(mesh))

    kind = "stokes"

    @property
    def velocity(self) -> LagrangeSpace:
        return self.space.velocity

    @property
    def n_u(self) -> int:
        return self.space.n_u_free

    @property
    def n_p(self) -> int:
        return self.space.n_p

    @property
    def M(self):
        return self.ops.M

    @property
    def K(self):
        return self.ops.K

    @property
    def B(self):
        return self.ops.B

    def bordered(self, A, scale: float = 1.0) -> sp.csc_matrix:
        B = scale * self.ops.B
        m = scale * self.ops.mean_vector[:, None]
        return sp.bmat(
            [[A, B.T, None], [B, None, m], [None, m.T, None]], format="csc"
        )

    def factor(self, key, build):
        if key not in self._factors:
            self._factors[key] = linalg.direct_solver(build())
        return self._factors[key]

    def constrained_solve(self, which: str, rhs_u, rhs_p=None):
        """Solve ``A u + B^T p = rhs_u, B u = rhs_p, m.p = 0`` with ``A`` = M or K."""
        A = {"mass": self.ops.M, "stiffness": self.ops.K}[which]
        solve = self.factor(which, lambda: self.bordered(A))
        rhs = np.zeros(self.n_u + self.n_p + 1)
        rhs[: self.n_u] = rhs_u
        if rhs_p is not None:
            rhs_p = np.asarray(rhs_p, dtype=float)
            # only the part orthogonal to constants is attainable: B^T 1 = 0
            rhs[self.n_u: -1] = rhs_p - rhs_p.mean()
        x = solve(rhs)
        return x[: self.n_u], x[self.n_u: -1]

    # -- evaluation helpers ------------------------------------------------
    def load_values(self, values) -> np.ndarray:
        return load_from_values(self.velocity, self.tables, values)

    def evaluate(self, field, t=None):
        """Values of a callable field ``(x, y)`` or ``(t, x, y)`` at quadrature points."""
        x, y = self.tables.xq[..., 0], self.tables.xq[..., 1]
        raw = field(x, y) if t is None else field(t, x, y)
        return field_values(raw, self.velocity.ncomp, x.shape)

    def in_Vh(self, v, tol: float = VH_TOL) -> bool:
        v = np.asarray(v)
        mnorm = np.sqrt(max(v @ (self.ops.M @ v), 0.0))
        return bool(np.linalg.norm(self.ops.B @ v) <= tol * max(mnorm, 1e-300))

    def l2_norm(self, v) -> float:
        return float(np.sqrt(max(v @ (self.ops.M @ v), 0.0)))

    def h1_seminorm(self, v) -> float:
        return float(np.sqrt(max(v @ (self.ops.K @ v), 0.0)))

    @cached_property
    def pressure_projector(self):
        m = self.ops.mean_vector
        area = m.sum()
        return lambda q: q - (m @ q) / area


class HeatDiscretization:
    """Scalar P2 space with mass and stiffness matrices."""

    kind = "heat"

    def __init__(self, space: LagrangeSpace, tables: ElementTables | None = None):
        self.space = space
        self.mesh = space.mesh
        self.tables = tables if tables is not None else ElementTables(space.mesh)
        self.M = scalar_mass(space, self.tables)
        self.K = scalar_stiffness(space, self.tables)
        self.B = None
        self._factors = {}

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "HeatDiscretization":
        return cls(build_scalar_p2(mesh))

    @property
    def velocity(self) -> LagrangeSpace:
        return self.space

    @property
    def n_u(self) -> int:
        return self.space.n_free

    n_p = 0

    def factor(self, key, build):
        if key not in self._factors:
            self._factors[key] = linalg.direct_solver(build())
        return self._factors[key]

    def load_values(self, values) -> np.ndarray:
        return load_from_values(self.space, self.tables, values)

    def evaluate(self, field, t=None):
        x, y = self.tables.xq[..., 0], self.tables.xq[..., 1]
        raw = field(x, y) if t is None else field(t, x, y)
        return field_values(raw, 1, x.shape)

    def l2_norm(self, v) -> float:
        return float(np.sqrt(max(v @ (self.M @ v), 0.0)))

    def h1_seminorm(self, v) -> float:
        return float(np.sqrt(max(v @ (self.K @ v), 0.0)))


def discretize(mesh: Mesh, kind: str = "stokes"):
    if kind == "stokes":
        return StokesDiscretization.from_mesh(mesh)
    if kind == "heat":
        return HeatDiscretization.from_mesh(mesh)
    raise ValueError(f"unknown equation {kind!r}")


# ---------------------------------------------------------------------------
# projections


def _coef(field):
    return field.coef if isinstance(field, DiscreteField) else None


def l2_project(disc, field, t=None) -> DiscreteField:
    """L2 projection onto the (unconstrained) velocity or scalar space.

    ``field`` is a callable of ``(x, y)`` (or ``(t, x, y)`` when ``t`` is
    given) or a :class:`DiscreteField`.
    """
    c = _coef(field)
    if c is not None:
        rhs = disc.M @ c
    else:
        rhs = disc.load_values(disc.evaluate(field, t))
    x, rep = linalg.cg_solve(disc.M, rhs, 1e-12)
    if not rep.converged:
        raise linalg.SolverError(f"L2 projection: CG did not converge ({rep})")
    kind = "velocity" if isinstance(disc, StokesDiscretization) else "scalar"
    return DiscreteField(disc.space, x, kind)


def leray_project(disc: StokesDiscretization, field, t=None) -> DiscreteField:
    """Discrete Leray projection: the L2 projection onto discretely divergence-free velocities."""
    c = _coef(field)
    rhs = disc.M @ c if c is not None else disc.load_values(disc.evaluate(field, t))
    return DiscreteField(disc.space, leray_from_load(disc, rhs), "velocity")


def leray_from_load(disc: StokesDiscretization, load) -> np.ndarray:
    """Leray projection given the moments ``(g, phi_i)`` of the input."""
    u, _ = disc.constrained_solve("mass", load)
    return u


def stokes_ritz_values(disc: StokesDiscretization, grad_u_vals, p_vals, div_u_vals=None):
    """Stokes-Ritz projection from field data at quadrature points.

    ``grad_u_vals``: ``(2, 2, nt, nq)``; ``p_vals``: ``(nt, nq)``;
    ``div_u_vals`` defaults to the trace of ``grad_u_vals``.
    """
    vel = disc.velocity
    eye = np.eye(2)[:, :, None, None]
    rhs_u = load_from_gradients(vel, disc.tables, grad_u_vals - eye * p_vals[None, None])
    if div_u_vals is None:
        div_u_vals = grad_u_vals[0, 0] + grad_u_vals[1, 1]
    rhs_p = -pressure_moments(disc.space, disc.tables, div_u_vals)
    return disc.constrained_solve("stiffness", rhs_u, rhs_p)


def stokes_ritz(disc: StokesDiscretization, u_exact, p_exact, grad_u=None, t=None):
    """Stokes-Ritz projection ``(R_h^S, R_h^{S,p})`` of a velocity-pressure pair.

    Either pass discrete fields, or callables ``p_exact(x, y)`` and
    ``grad_u(x, y) -> (2, 2, ...)`` (``u_exact`` itself is then unused
    except for documentation symmetry).  With ``t`` given the callables
    take ``(t, x, y)``.
    """
    if isinstance(u_exact, DiscreteField):
        pc = p_exact.coef if isinstance(p_exact, DiscreteField) else np.zeros(disc.n_p)
        rhs_u = disc.K @ u_exact.coef + disc.B.T @ pc
        rhs_p = disc.B @ u_exact.coef
        u, p = disc.constrained_solve("stiffness", rhs_u, rhs_p)
    else:
        if grad_u is None:
            raise ValueError("stokes_ritz needs grad_u for non-discrete input")
        x, y = disc.tables.xq[..., 0], disc.tables.xq[..., 1]
        G = grad_u(x, y) if t is None else grad_u(t, x, y)
        P = p_exact(x, y) if t is None else p_exact(t, x, y)
        u, p = stokes_ritz_values(disc, np.asarray(G), np.broadcast_to(P, x.shape))
    return DiscreteField(disc.space, u, "velocity"), DiscreteField(disc.space, p, "pressure")


def elliptic_ritz(disc: HeatDiscretization, u_exact, grad_u=None, t=None) -> DiscreteField:
    """Ritz projection: ``(grad R_h u, grad phi_i) = (grad u, grad phi_i)``."""
    if isinstance(u_exact, DiscreteField):
        rhs = disc.K @ u_exact.coef
    else:
        if grad_u is None:
            raise ValueError("elliptic_ritz needs grad_u for non-discrete input")
        x, y = disc.tables.xq[..., 0], disc.tables.xq[..., 1]
        G = grad_u(x, y) if t is None else grad_u(t, x, y)
        rhs = load_from_gradients(disc.space, disc.tables, np.asarray(G).reshape(1, 2, *x.shape))
    solve = disc.factor("stiffness", lambda: sp.csc_matrix(disc.K))
    return DiscreteField(disc.space, solve(rhs), "scalar")


def elliptic_ritz_values(disc: HeatDiscretization, grad_vals) -> np.ndarray:
    rhs = load_from_gradients(disc.space, disc.tables, grad_vals)
    return disc.factor("stiffness", lambda: sp.csc_matrix(disc.K))(rhs)


# ---------------------------------------------------------------------------
# discrete Stokes operator


def apply_Ah(disc: StokesDiscretization, v) -> DiscreteField:
    """``A_h v``: the element ``a`` of V_h with ``(a, w) = (grad v, grad w)`` on V_h."""
    c = v.coef if isinstance(v, DiscreteField) else np.asarray(v)
    if not disc.in_Vh(c):
        raise NotDivergenceFree("apply_Ah requires a discretely divergence-free input")
    a, _ = disc.constrained_solve("mass", disc.K @ c)
    return DiscreteField(disc.space, a, "velocity")


def solve_Ah_inverse(disc: StokesDiscretization, g) -> DiscreteField:
    """``A_h^{-1} P_h g``: ``w`` in V_h with ``(grad w, grad v) = (g, v)`` on V_h."""
    c = g.coef if isinstance(g, DiscreteField) else np.asarray(g)
    w, _ = disc.constrained_solve("stiffness", disc.M @ c)
    return DiscreteField(disc.space, w, "velocity")


def Ah_inverse_from_load(disc: StokesDiscretization, load) -> np.ndarray:
    w, _ = disc.constrained_solve("stiffness", load)
    return w


def stokes_eigenvalue(disc: StokesDiscretization, tol: float = 1e-9, block: int = 4):
    """Smallest eigenvalue of ``A_h`` by inverse iteration with ``A_h^{-1}``."""
    def solve(rhs):  # rhs = M x
        return Ah_inverse_from_load(disc, rhs)

    def project(x):
        return leray_from_load(disc, disc.M @ x)

    def residual(r):  # load vector; measure M P_h M^{-1} r
        return disc.M @ leray_from_load(disc, r)

    return linalg.smallest_generalized_eig(
        disc.K, disc.M, tol=tol, solve=solve, project=project, block=block,
        dual_project=residual,
    )


def inf_sup_constant(disc: StokesDiscretization, tol: float = 1e-9, block: int = 6):
    """Discrete inf-sup constant and the eigen-iteration report.

    ``beta_h^2`` is the smallest eigenvalue of ``B K^{-1} B^T q = lam M_p q``
    over zero-mean pressures.  ``K^{-1}`` is a cached sparse LU; the Schur
    system inside each inverse-iteration step is solved by CG.
    """
    ops = disc.ops
    Kinv = disc.factor("K", lambda: sp.csc_matrix(ops.K))
    n_p = disc.n_p
    ones = np.ones(n_p)

    def schur(q):
        return ops.B @ Kinv(ops.B.T @ q)

    def euclid(q):
        return q - (q.sum() / n_p) * ones

    def solve(rhs):
        x, rep = linalg.cg_solve(schur, rhs, 1e-12, project=euclid)
        return x

    lam, q, rep = linalg.smallest_generalized_eig(
        schur, ops.M_p, tol=tol, solve=solve, project=disc.pressure_projector, block=block
    )
    return float(np.sqrt(lam)), rep
