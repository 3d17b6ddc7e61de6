"""Global mass, stiffness and divergence operators for the Taylor-Hood pair.

Sign convention: the coupling block is ``B[i, j] = -(q_i, div phi_j)`` so
that the symmetric saddle system ``[[K, B^T], [B, 0]]`` reproduces
``(grad u, grad v) - (p, div v)`` in the momentum row with the physical
pressure ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import ElementTables, FESpacePair, LagrangeSpace
from .linalg import as_csr


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """Assembled operators on free DOFs.

    M, K : velocity mass and stiffness (``n_u_free`` square)
    B : ``n_p x n_u_free`` coupling, ``B[i, j] = -(q_i, div phi_j)``
    M_p : pressure mass matrix
    mean_vector : integrals of the pressure basis functions
    """

    M: sp.csr_matrix
    K: sp.csr_matrix
    B: sp.csr_matrix
    M_p: sp.csr_matrix
    mean_vector: np.ndarray


def _scalar_matrix(local, rows_space, cols_space, keep_rows=True, keep_cols=True):
    """Scatter element matrices ``(nt, nr, nc)`` into a sparse matrix on free DOFs."""
    rd, cd = rows_space.cell_dofs, cols_space.cell_dofs
    r = np.broadcast_to(rd[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cd[:, None, :], local.shape).ravel()
    v = local.ravel()
    ri = rows_space.free_index[r] if keep_rows else r
    ci = cols_space.free_index[c] if keep_cols else c
    ok = (ri >= 0) & (ci >= 0)
    nr = rows_space.n_free_scalar if keep_rows else rows_space.n_dofs
    nc = cols_space.n_free_scalar if keep_cols else cols_space.n_dofs
    return as_csr(sp.coo_matrix((v[ok], (ri[ok], ci[ok])), shape=(nr, nc)))


def scalar_mass(space: LagrangeSpace, tables: ElementTables) -> sp.csr_matrix:
    vals, _ = tables.basis(space)
    local = np.einsum("tq,qi,qj->tij", tables.wq, vals, vals)
    return _scalar_matrix(local, space, space)


def scalar_stiffness(space: LagrangeSpace, tables: ElementTables) -> sp.csr_matrix:
    _, grads = tables.basis(space)
    local = np.einsum("tq,tqid,tqjd->tij", tables.wq, grads, grads)
    return _scalar_matrix(local, space, space)


def block_diag(A, ncomp):
    return as_csr(sp.block_diag([A] * ncomp))


def assemble_operators(space: FESpacePair, tables: ElementTables | None = None) -> OperatorSet:
    """Assemble M, K, B, M_p and the pressure mean vector."""
    tables = tables if tables is not None else ElementTables(space.mesh)
    vel, pre = space.velocity, space.pressure
    Ms = scalar_mass(vel, tables)
    Ks = scalar_stiffness(vel, tables)
    pvals, _ = tables.basis(pre)
    _, vgrads = tables.basis(vel)
    blocks = []
    for d in range(2):
        local = -np.einsum("tq,qi,tqj->tij", tables.wq, pvals, vgrads[..., d])
        blocks.append(_scalar_matrix(local, pre, vel))
    B = as_csr(sp.hstack(blocks))
    M_p = scalar_mass(pre, tables)
    mean_local = np.einsum("tq,qi->ti", tables.wq, pvals)
    mean_vector = np.bincount(pre.cell_dofs.ravel(), mean_local.ravel(), minlength=pre.n_dofs)
    return OperatorSet(
        M=block_diag(Ms, vel.ncomp),
        K=block_diag(Ks, vel.ncomp),
        B=B,
        M_p=M_p,
        mean_vector=mean_vector,
    )


def load_from_values(space: LagrangeSpace, tables: ElementTables, values) -> np.ndarray:
    """Entries ``int f . phi_i`` for free DOFs from field values ``(ncomp, nt, nq)``."""
    vals, _ = tables.basis(space)
    values = np.asarray(values).reshape(space.ncomp, *tables.wq.shape)
    local = np.einsum("ctq,tq,qi->cti", values, tables.wq, vals)
    full = np.zeros((space.ncomp, space.n_dofs))
    for c in range(space.ncomp):
        full[c] = np.bincount(space.cell_dofs.ravel(), local[c].ravel(), minlength=space.n_dofs)
    return space.restrict(full)


def load_from_gradients(space: LagrangeSpace, tables: ElementTables, grads) -> np.ndarray:
    """Entries ``int G : grad phi_i`` from tensor values ``(ncomp, 2, nt, nq)``."""
    _, bgrads = tables.basis(space)
    grads = np.asarray(grads).reshape(space.ncomp, 2, *tables.wq.shape)
    local = np.einsum("cdtq,tq,tqid->cti", grads, tables.wq, bgrads)
    full = np.zeros((space.ncomp, space.n_dofs))
    for c in range(space.ncomp):
        full[c] = np.bincount(space.cell_dofs.ravel(), local[c].ravel(), minlength=space.n_dofs)
    return space.restrict(full)


def pressure_moments(space: FESpacePair, tables: ElementTables, values) -> np.ndarray:
    """Entries ``int g q_i`` over all pressure DOFs for scalar values ``(nt, nq)``."""
    pre = space.pressure
    pvals, _ = tables.basis(pre)
    local = np.einsum("tq,tq,qi->ti", np.asarray(values).reshape(tables.wq.shape), tables.wq, pvals)
    return np.bincount(pre.cell_dofs.ravel(), local.ravel(), minlength=pre.n_dofs)


def assemble_load(space: LagrangeSpace, f, t: float, tables: ElementTables | None = None):
    """Load vector ``int f(t, x) . phi_i dx`` on the free DOFs of ``space``.

    ``f(t, x, y)`` returns ``(ncomp, ...)`` values; for a Taylor-Hood pair
    pass ``pair.velocity``.
    """
    if isinstance(space, FESpacePair):
        space = space.velocity
    tables = tables if tables is not None else ElementTables(space.mesh)
    x, y = tables.xq[..., 0], tables.xq[..., 1]
    return load_from_values(space, tables, field_values(f(t, x, y), space.ncomp, x.shape))


def field_values(raw, ncomp, shape) -> np.ndarray:
    """Broadcast evaluator output (scalar, per-component constant or full) to ``(ncomp, *shape)``."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 0:
        return np.broadcast_to(raw, (ncomp, *shape))
    if raw.shape == (ncomp,):
        return np.broadcast_to(raw.reshape((ncomp,) + (1,) * len(shape)), (ncomp, *shape))
    return raw.reshape(ncomp, *shape)
