"""Symmetric quadrature on the reference triangle and Gauss rules in time.

The reference triangle has vertices (0,0), (1,0), (0,1) and area 1/2.
Degrees 1-6 use classical symmetric rules (centroid, Strang-Fix,
Dunavant); degrees 7-10 use a conical Gauss product rule averaged over
the six symmetries of the triangle, which keeps its exactness.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 10


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,), sum 1/2
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])


def _orbit(a, b, c):
    return sorted(set(permutations((a, b, c))))


# (barycentric generator, weight normalised to unit area)
_TABLES = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
    6: [
        ((0.501426509658179, 0.249286745170910, 0.249286745170910), 0.116786275726379),
        ((0.873821971016996, 0.063089014491502, 0.063089014491502), 0.050844906370207),
        ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374),
    ],
}


def _from_table(entries, degree):
    pts, wts = [], []
    for gen, w in entries:
        orbit = _orbit(*gen)
        for bary in orbit:
            pts.append(bary[1:])
            wts.append(0.5 * w)
    pts = np.array(pts)
    wts = np.array(wts)
    # the tabulated 15-digit barycentrics do not sum to 1 exactly
    wts *= 0.5 / wts.sum()
    return QuadratureRule(pts, wts, degree)


def _conical_symmetrized(degree):
    n = degree // 2 + 1  # 2n - 1 >= degree
    s, ws = np.polynomial.legendre.leggauss(n)
    s, ws = 0.5 * (s + 1.0), 0.5 * ws
    z, wz = roots_jacobi(n, 1.0, 0.0)  # weight (1 - z) on [-1, 1]
    y = 0.5 * (z + 1.0)
    wy = wz / 4.0
    Y, S = np.meshgrid(y, s, indexing="ij")
    X = (1.0 - Y) * S
    W = np.outer(wy, ws)
    base = np.column_stack([1.0 - X.ravel() - Y.ravel(), X.ravel(), Y.ravel()])
    pts, wts = [], []
    for perm in permutations(range(3)):
        b = base[:, perm]
        pts.append(b[:, 1:])
        wts.append(W.ravel() / 6.0)
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), degree)


@lru_cache(maxsize=None)
def quadrature_rule(min_degree: int = 6) -> QuadratureRule:
    """Symmetric rule on the reference triangle exact to at least ``min_degree``."""
    if int(min_degree) != min_degree or not 1 <= min_degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be an integer in [1, {MAX_DEGREE}]")
    for d in sorted(_TABLES):
        if d >= min_degree:
            return _from_table(_TABLES[d], d)
    return _conical_symmetrized(int(min_degree))


@lru_cache(maxsize=None)
def gauss_legendre_unit(points: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights on (0, 1)."""
    if int(points) != points or not 1 <= points <= MAX_DEGREE:
        raise ValueError(f"number of Gauss points must be in [1, {MAX_DEGREE}]")
    x, w = np.polynomial.legendre.leggauss(int(points))
    return 0.5 * (x + 1.0), 0.5 * w
