import numpy as np
import pytest

from stokes_dg_lab.mesh import build_domain
from stokes_dg_lab.operators import discretize


@pytest.fixture(scope="session")
def stokes4():
    return discretize(build_domain("unit_square", 4), "stokes")


@pytest.fixture(scope="session")
def stokes8():
    return discretize(build_domain("unit_square", 8), "stokes")


@pytest.fixture(scope="session")
def heat4():
    return discretize(build_domain("unit_square", 4), "heat")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_points_in_cells(space, rng, per_cell=2):
    """Random reference points in every triangle: (cell index, reference point, physical point)."""
    mesh = space.mesh
    nt = mesh.n_triangles
    r = rng.uniform(size=(nt * per_cell, 2))
    flip = r.sum(axis=1) > 1
    r[flip] = 1 - r[flip]
    cells = np.repeat(np.arange(nt), per_cell)
    v = mesh.vertices[mesh.triangles[cells]]
    xy = v[:, 0] + r[:, :1] * (v[:, 1] - v[:, 0]) + r[:, 1:] * (v[:, 2] - v[:, 0])
    return cells, r, xy


def evaluate_at(space, full, cells, ref):
    """Evaluate full coefficients ``(ncomp, n_dofs)`` at reference points of given cells."""
    vals, _ = space.element.evaluate(ref)
    loc = full[:, space.cell_dofs[cells]]  # (ncomp, npts, nloc)
    return np.einsum("cpk,pk->cp", loc, vals)
