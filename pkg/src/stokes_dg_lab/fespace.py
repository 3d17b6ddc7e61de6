"""Lagrange P1/P2 spaces, the Taylor-Hood pair and element-level evaluation.

Coefficient vectors on *free* DOFs are laid out component-major:
``[c0 free dofs..., c1 free dofs...]``.  Dirichlet DOFs carry zero
(homogeneous no-slip) and are dropped from every assembled operator.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mesh import Mesh
from .quadrature import QuadratureRule, quadrature_rule

DEFAULT_QUADRATURE_DEGREE = 6

# gradients of the barycentric coordinates on the reference triangle
_GRAD_LAMBDA = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
# P2 edge node k sits on the edge opposite vertex k
_EDGE_VERTS = ((1, 2), (2, 0), (0, 1))


class ReferenceElement:
    """Nodal Lagrange basis of degree 1 or 2 on the reference triangle."""

    def __init__(self, degree: int):
        if degree not in (1, 2):
            raise ValueError("only degrees 1 and 2 are supported")
        self.degree = degree
        nodes = list(np.eye(3))
        if degree == 2:
            for i, j in _EDGE_VERTS:
                b = np.zeros(3)
                b[[i, j]] = 0.5
                nodes.append(b)
        self.node_coords = np.array(nodes)  # barycentric

    @property
    def n_local(self) -> int:
        return len(self.node_coords)

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Values ``(nq, nloc)`` and reference gradients ``(nq, nloc, 2)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lam = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
        G = _GRAD_LAMBDA
        if self.degree == 1:
            vals = lam
            grads = np.broadcast_to(G, (len(pts), 3, 2)).copy()
            return vals, grads
        vals = np.empty((len(pts), 6))
        grads = np.empty((len(pts), 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * G[i]
        for k, (i, j) in enumerate(_EDGE_VERTS):
            vals[:, 3 + k] = 4.0 * lam[:, i] * lam[:, j]
            grads[:, 3 + k] = 4.0 * (lam[:, j, None] * G[i] + lam[:, i, None] * G[j])
        return vals, grads


class LagrangeSpace:
    """Continuous Lagrange space with ``ncomp`` components on a mesh.

    Parameters
    ----------
    mesh : Mesh
    degree : 1 or 2
    ncomp : number of field components
    dirichlet : bool
        Constrain all DOFs on the boundary to zero.
    """

    def __init__(self, mesh: Mesh, degree: int, ncomp: int = 1, dirichlet: bool = True):
        self.mesh = mesh
        self.degree = degree
        self.ncomp = ncomp
        self.element = ReferenceElement(degree)
        nv = mesh.n_vertices
        if degree == 1:
            self.cell_dofs = mesh.triangles.copy()
            self.n_dofs = nv
            bmask = mesh.boundary_vertex_mask
        else:
            self.cell_dofs = np.hstack([mesh.triangles, mesh.triangle_edges + nv])
            self.n_dofs = nv + mesh.n_edges
            bmask = np.concatenate([mesh.boundary_vertex_mask, mesh.boundary_edge_mask])
        self.cell_dofs.flags.writeable = False
        self.dirichlet_mask = bmask if dirichlet else np.zeros(self.n_dofs, dtype=bool)
        self.free = np.flatnonzero(~self.dirichlet_mask)
        self.free_index = np.full(self.n_dofs, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(len(self.free))

    @property
    def n_free_scalar(self) -> int:
        return len(self.free)

    @property
    def n_free(self) -> int:
        return self.ncomp * len(self.free)

    @property
    def n_total(self) -> int:
        return self.ncomp * self.n_dofs

    @cached_property
    def node_coords(self) -> np.ndarray:
        """Physical coordinates of every scalar DOF."""
        m = self.mesh
        if self.degree == 1:
            return m.vertices.copy()
        mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
        return np.vstack([m.vertices, mids])

    # DOF map: scalar dof g <-> (entity kind, entity index)
    def dof_entity(self, g: int) -> tuple[str, int]:
        nv = self.mesh.n_vertices
        if not 0 <= g < self.n_dofs:
            raise IndexError(g)
        return ("vertex", g) if g < nv else ("edge", g - nv)

    def entity_dof(self, kind: str, index: int) -> int:
        nv = self.mesh.n_vertices
        if kind == "vertex" and 0 <= index < nv:
            return index
        if kind == "edge" and self.degree == 2 and 0 <= index < self.mesh.n_edges:
            return nv + index
        raise KeyError((kind, index))

    def free_dof(self, g: int, component: int = 0) -> int:
        """Position of scalar DOF ``g`` (component ``component``) in a free vector."""
        k = self.free_index[g]
        if k < 0:
            raise KeyError(f"DOF {g} is constrained")
        return component * len(self.free) + int(k)

    def expand(self, coef) -> np.ndarray:
        """Free coefficient vector -> ``(ncomp, n_dofs)`` array with zeros on the boundary."""
        coef = np.asarray(coef)
        full = np.zeros((self.ncomp, self.n_dofs) + coef.shape[1:], dtype=coef.dtype)
        full[:, self.free] = coef.reshape((self.ncomp, len(self.free)) + coef.shape[1:])
        return full

    def restrict(self, full) -> np.ndarray:
        full = np.asarray(full).reshape(self.ncomp, self.n_dofs)
        return full[:, self.free].ravel()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_free)


@dataclass(frozen=True, eq=False)
class FESpacePair:
    """Taylor-Hood pair: vector P2 velocity with no-slip DOFs removed, P1 pressure."""

    mesh: Mesh
    velocity: LagrangeSpace
    pressure: LagrangeSpace

    @property
    def n_u_free(self) -> int:
        return self.velocity.n_free

    @property
    def n_u_total(self) -> int:
        return self.velocity.n_total

    @property
    def n_p(self) -> int:
        return self.pressure.n_dofs


def build_taylor_hood(mesh: Mesh) -> FESpacePair:
    return FESpacePair(
        mesh,
        LagrangeSpace(mesh, 2, ncomp=2, dirichlet=True),
        LagrangeSpace(mesh, 1, ncomp=1, dirichlet=False),
    )


def build_scalar_p2(mesh: Mesh) -> LagrangeSpace:
    """Scalar P2 space with homogeneous Dirichlet data, used for the heat equation."""
    return LagrangeSpace(mesh, 2, ncomp=1, dirichlet=True)


class ElementTables:
    """Quadrature data mapped to every triangle of a mesh.

    Attributes
    ----------
    xq : (nt, nq, 2) physical quadrature points
    wq : (nt, nq) quadrature weights times |det J|
    """

    def __init__(self, mesh: Mesh, rule: QuadratureRule | None = None):
        self.mesh = mesh
        self.rule = rule if rule is not None else quadrature_rule(DEFAULT_QUADRATURE_DEGREE)
        v = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)  # columns are edge vectors
        self.detJ = np.linalg.det(J)
        self.invJ = np.linalg.inv(J)
        self.xq = v[:, 0, None, :] + np.einsum("tij,qj->tqi", J, self.rule.points)
        self.wq = self.rule.weights[None, :] * np.abs(self.detJ)[:, None]
        self._basis = {}

    def basis(self, space: LagrangeSpace):
        """Basis values ``(nq, nloc)`` and physical gradients ``(nt, nq, nloc, 2)``."""
        key = space.degree
        if key not in self._basis:
            vals, rgrad = space.element.evaluate(self.rule.points)
            # physical gradient = J^{-T} reference gradient
            pgrad = np.einsum("tji,qkj->tqki", self.invJ, rgrad)
            self._basis[key] = (vals, pgrad)
        return self._basis[key]

    def values(self, space: LagrangeSpace, coef) -> np.ndarray:
        """Field values ``(ncomp, nt, nq)`` of a free coefficient vector."""
        full = space.expand(coef)
        vals, _ = self.basis(space)
        return np.einsum("ctk,qk->ctq", full[:, space.cell_dofs], vals)

    def gradients(self, space: LagrangeSpace, coef) -> np.ndarray:
        """Field gradients ``(ncomp, 2, nt, nq)`` of a free coefficient vector."""
        full = space.expand(coef)
        _, grads = self.basis(space)
        return np.einsum("ctk,tqki->citq", full[:, space.cell_dofs], grads)

    def integrate(self, values) -> float:
        """Integral of pointwise values shaped ``(..., nt, nq)`` summed over leading axes."""
        return float(np.sum(np.asarray(values) * self.wq))


def interpolate_full(space: LagrangeSpace, field) -> np.ndarray:
    """Nodal interpolant on all DOFs, ``(ncomp, n_dofs)``, boundary values included.

    ``field(x, y)`` returns an array of shape ``(ncomp, npts)`` (or ``(npts,)``
    for scalar fields).
    """
    xy = space.node_coords
    vals = np.asarray(field(xy[:, 0], xy[:, 1]), dtype=float)
    return np.broadcast_to(vals.reshape(space.ncomp, -1), (space.ncomp, space.n_dofs)).copy()


def interpolate(space: LagrangeSpace, field) -> np.ndarray:
    """Nodal interpolant as a free coefficient vector (boundary DOFs dropped)."""
    return space.restrict(interpolate_full(space, field))
