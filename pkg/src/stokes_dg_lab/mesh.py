"""Structured triangulations of the unit square and the L-shaped domain.

Meshes are built on a uniform grid of squares, each split along its
(+1, +1) diagonal, and can be refined by red (midpoint) refinement.

Examples
--------
>>> m = build_domain("unit_square", 2)
>>> m.n_vertices, m.n_triangles
(9, 8)
>>> refine_uniform(m).n_triangles
32
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DOMAIN_AREA = {"unit_square": 1.0, "l_shape": 0.75}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation with positively oriented triangles.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise
    domain_kind : "unit_square" or "l_shape"
    parent : (nt,) int array or None
        Index of the parent triangle in the mesh this one was refined from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    domain_kind: str
    parent: np.ndarray | None = None
    _edges: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("vertices must be (nv, 2) and triangles (nt, 3)")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle references a missing vertex")
        if self.domain_kind not in DOMAIN_AREA:
            raise ValueError(f"unknown domain kind {self.domain_kind!r}")
        area = _signed_areas(v, t)
        if np.any(area == 0.0):
            raise ValueError("degenerate triangle")
        # flip clockwise triangles so every signed area is positive
        neg = area < 0
        if np.any(neg):
            t = t.copy()
            t[neg, 1], t[neg, 2] = t[neg, 2].copy(), t[neg, 1].copy()
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "_edges", _build_edges(t))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edges(self) -> np.ndarray:
        """(ne, 2) sorted vertex pairs, one row per unique edge."""
        return self._edges[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """(nt, 3) edge index opposite to local vertex 0, 1, 2."""
        return self._edges[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_triangle_count(self) -> np.ndarray:
        return np.bincount(self.triangle_edges.ravel(), minlength=self.n_edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return self.edges[self.edge_triangle_count == 1]

    @property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_triangle_count == 1

    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain_kind": self.domain_kind,
                "vertices": self.vertices.tolist(),
                "triangles": self.triangles.tolist(),
            }
        )

    def dump(self, path) -> None:
        """Write the mesh as JSON with ``vertices`` and ``triangles``."""
        Path(path).write_text(self.to_json())


@dataclass(frozen=True)
class MeshMetrics:
    h_max: float
    h_min: float
    shape_regularity: float
    quasi_uniformity: float


def _signed_areas(v, t):
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _build_edges(t):
    # local edge k is opposite local vertex k
    local = np.array([[1, 2], [2, 0], [0, 1]])
    all_edges = np.sort(t[:, local].reshape(-1, 2), axis=1)
    edges, inverse = np.unique(all_edges, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def _grid_triangles(nx, ny, keep_cell):
    """Split every kept cell (i, j) of an nx-by-ny grid along its (+1,+1) diagonal."""
    idx = lambda i, j: j * (nx + 1) + i  # noqa: E731
    tris = []
    for j in range(ny):
        for i in range(nx):
            if not keep_cell(i, j):
                continue
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    return np.array(tris, dtype=np.int64)


def build_domain(kind: str, n: int) -> Mesh:
    """Structured mesh of ``kind`` with ``n`` subdivisions per unit length.

    The L-shape ``[0,1]^2 \\ (0.5,1)^2`` uses a grid of spacing ``1/(2n)``.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    if kind == "unit_square":
        nx = n
        keep = lambda i, j: True  # noqa: E731
    elif kind == "l_shape":
        nx = 2 * n
        keep = lambda i, j: not (i >= n and j >= n)  # noqa: E731
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    x = np.linspace(0.0, 1.0, nx + 1)
    X, Y = np.meshgrid(x, x)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    tris = _grid_triangles(nx, nx, keep)
    used = np.unique(tris)
    renum = np.full(len(verts), -1, dtype=np.int64)
    renum[used] = np.arange(len(used))
    return Mesh(verts[used], renum[tris], kind)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: split each triangle into four through its edge midpoints."""
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    verts = np.vstack([mesh.vertices, mid])
    t = mesh.triangles
    e = mesh.triangle_edges + nv  # midpoint opposite local vertex k
    m0, m1, m2 = e[:, 0], e[:, 1], e[:, 2]
    children = np.stack(
        [
            np.column_stack([t[:, 0], m2, m1]),
            np.column_stack([m2, t[:, 1], m0]),
            np.column_stack([m1, m0, t[:, 2]]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.n_triangles), 4)
    return Mesh(verts, children, mesh.domain_kind, parent=parent)


def relabel(mesh: Mesh, permutation) -> Mesh:
    """Same mesh with vertex ``i`` renamed to ``permutation[i]``."""
    perm = np.asarray(permutation)
    verts = np.empty_like(mesh.vertices)
    verts[perm] = mesh.vertices
    return Mesh(verts, perm[mesh.triangles], mesh.domain_kind)


def mesh_metrics(mesh: Mesh) -> MeshMetrics:
    v, t = mesh.vertices, mesh.triangles
    lengths = np.stack(
        [np.linalg.norm(v[t[:, (k + 1) % 3]] - v[t[:, (k + 2) % 3]], axis=1) for k in range(3)],
        axis=1,
    )
    diam = lengths.max(axis=1)
    inradius = 2.0 * mesh.areas() / lengths.sum(axis=1)
    return MeshMetrics(
        h_max=float(diam.max()),
        h_min=float(diam.min()),
        shape_regularity=float((diam / inradius).max()),
        quasi_uniformity=float(diam.max() / diam.min()),
    )
