"""Time partitions and piecewise polynomials in time.

On every interval ``I_m = (t_{m-1}, t_m]`` a function of degree ``w`` is
stored as coefficients in the shifted Legendre basis ``phi_0 = 1``,
``phi_1 = 2s - 1`` of the local variable ``s = (t - t_{m-1}) / tau_m``.
The basis is orthogonal on (0, 1) with ``int phi_j^2 = 1 / (2j + 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss_legendre_unit

SUPPORTED_DEGREES = (0, 1)


@dataclass(frozen=True, eq=False)
class TimePartition:
    nodes: np.ndarray
    kappa: float = 2.0

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a partition needs at least two nodes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        t.flags.writeable = False
        object.__setattr__(self, "nodes", t)

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def tau(self) -> float:
        return float(self.steps.max())

    @property
    def tau_min(self) -> float:
        return float(self.steps.min())

    def interval(self, m: int) -> tuple[float, float]:
        """Endpoints of ``I_m`` for ``m = 1..M``."""
        return float(self.nodes[m - 1]), float(self.nodes[m])

    def step_ratio(self) -> float:
        """Largest adjacent ratio ``max(tau_m / tau_{m+1}, tau_{m+1} / tau_m)``."""
        s = self.steps
        if len(s) == 1:
            return 1.0
        r = s[:-1] / s[1:]
        return float(max(r.max(), (1.0 / r).max()))

    def check(self, C: float | None = None, beta: float | None = None) -> dict:
        """Report on the mesh assumptions; never raises.

        ``C`` and ``beta`` are the user's constants for ``tau_min >= C tau^beta``.
        """
        report = {
            "kappa": self.kappa,
            "step_ratio": self.step_ratio(),
            "step_ratio_ok": self.step_ratio() <= self.kappa,
            "tau": self.tau,
            "tau_le_T_over_4": self.tau <= self.T / 4.0,
        }
        if C is not None and beta is not None:
            report["tau_min_ok"] = self.tau_min >= C * self.tau ** beta
        return report


def uniform_partition(T: float, M: int, kappa: float = 2.0) -> TimePartition:
    if T <= 0:
        raise ValueError("T must be positive")
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    return TimePartition(np.linspace(0.0, T, int(M) + 1), kappa)


# ---------------------------------------------------------------------------
# reference basis


def basis_values(w: int, s) -> np.ndarray:
    """``phi_j(s)`` for ``j = 0..w``, shape ``(w + 1, len(s))``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = [np.ones_like(s)]
    if w >= 1:
        out.append(2.0 * s - 1.0)
    return np.array(out)


def basis_derivatives(w: int, s) -> np.ndarray:
    """``d phi_j / ds``; divide by ``tau_m`` for time derivatives."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = [np.zeros_like(s)]
    if w >= 1:
        out.append(np.full_like(s, 2.0))
    return np.array(out)


def basis_norms(w: int) -> np.ndarray:
    """``int_0^1 phi_j^2 ds``."""
    return 1.0 / (2.0 * np.arange(w + 1) + 1.0)


def left_values(w: int) -> np.ndarray:
    return basis_values(w, 0.0)[:, 0]


def right_values(w: int) -> np.ndarray:
    return basis_values(w, 1.0)[:, 0]


def derivative_matrix(w: int) -> np.ndarray:
    """``D[i, j] = int_0^1 phi_j' phi_i ds``."""
    s, ws = gauss_legendre_unit(w + 1)
    return np.einsum("q,iq,jq->ij", ws, basis_values(w, s), basis_derivatives(w, s))


def _check_degree(w):
    if w not in SUPPORTED_DEGREES:
        raise ValueError(f"temporal degree must be one of {SUPPORTED_DEGREES}")


# ---------------------------------------------------------------------------
# piecewise polynomial coefficient containers


@dataclass(eq=False)
class SpaceTimeCoefficients:
    """Degree-``w`` coefficients on every interval.

    ``coef[m - 1, j]`` is the (spatial) coefficient array of ``phi_j`` on
    ``I_m``; trailing dimensions are arbitrary (scalars, DOF vectors, or
    values at spatial quadrature points).
    """

    partition: TimePartition
    w: int
    coef: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_degree(self.w)
        self.coef = np.asarray(self.coef, dtype=float)
        if self.coef.shape[:2] != (self.partition.M, self.w + 1):
            raise ValueError(
                f"coefficient array must start with ({self.partition.M}, {self.w + 1}), "
                f"got {self.coef.shape}"
            )

    @property
    def value_shape(self) -> tuple:
        return self.coef.shape[2:]

    def right_trace(self, m: int) -> np.ndarray:
        """``v_m^+``: limit from the right at node ``t_m`` (``m = 0..M-1``)."""
        return np.tensordot(left_values(self.w), self.coef[m], axes=(0, 0))

    def left_trace(self, m: int) -> np.ndarray:
        """``v_m^-``: limit from the left at node ``t_m`` (``m = 1..M``)."""
        return np.tensordot(right_values(self.w), self.coef[m - 1], axes=(0, 0))

    def evaluate(self, m: int, s) -> np.ndarray:
        """Values on ``I_m`` at local points ``s``, shape ``(len(s), *value_shape)``."""
        return np.tensordot(basis_values(self.w, s), self.coef[m - 1], axes=(0, 0))

    def derivative(self, m: int, s) -> np.ndarray:
        tau = self.partition.steps[m - 1]
        return np.tensordot(basis_derivatives(self.w, s), self.coef[m - 1], axes=(0, 0)) / tau

    def __call__(self, t: float) -> np.ndarray:
        """Value at time ``t`` (left-continuous: ``t_m`` belongs to ``I_m``)."""
        nodes = self.partition.nodes
        m = int(np.clip(np.searchsorted(nodes, t, side="left"), 1, self.partition.M))
        a, b = self.partition.interval(m)
        return self.evaluate(m, [(t - a) / (b - a)])[0]

    def map(self, fn) -> "SpaceTimeCoefficients":
        """Apply a linear map to every coefficient array."""
        M, W = self.coef.shape[:2]
        out = np.array([[fn(self.coef[m, j]) for j in range(W)] for m in range(M)])
        return SpaceTimeCoefficients(self.partition, self.w, out)


def traces_and_jumps(c: SpaceTimeCoefficients, initial=None) -> list[dict]:
    """Left trace, right trace and jump ``[v]_m = v_m^+ - v_m^-`` at every node.

    At ``t_0`` only the right trace exists unless ``initial`` supplies
    ``v_0^-``; at ``t_M`` only the left trace exists.
    """
    M = c.partition.M
    out = []
    for m in range(M + 1):
        left = c.left_trace(m) if m >= 1 else initial
        right = c.right_trace(m) if m < M else None
        jump = right - left if (left is not None and right is not None) else None
        out.append({"node": m, "left": left, "right": right, "jump": jump})
    return out


# ---------------------------------------------------------------------------
# quadrature and projections


def time_quadrature(partition: TimePartition, points_per_interval: int):
    """Gauss nodes and weights on each interval.

    Returns ``(s, t, wt)``: reference nodes ``(q,)``, physical nodes
    ``(M, q)`` and physical weights ``(M, q)``.
    """
    s, ws = gauss_legendre_unit(points_per_interval)
    a = partition.nodes[:-1, None]
    tau = partition.steps[:, None]
    return s, a + tau * s[None, :], tau * ws[None, :]


def _sample(v, t):
    return np.asarray(v(float(t)), dtype=float)


def pi_tau(v, partition: TimePartition, w: int, points: int = 10) -> SpaceTimeCoefficients:
    """Interval-wise projection matching ``v(t_m^-)`` and the moments below degree ``w``.

    ``v(t)`` may return scalars or arrays.  For ``w = 0`` the value at the
    right endpoint alone defines the projection.
    """
    _check_degree(w)
    s, ws = gauss_legendre_unit(points)
    coefs = []
    for m in range(1, partition.M + 1):
        a, b = partition.interval(m)
        end = _sample(v, b)
        if w == 0:
            coefs.append([end])
            continue
        mean = sum(wq * _sample(v, a + (b - a) * sq) for sq, wq in zip(s, ws))
        # phi_1(1) = 1 and phi_1 has zero mean
        coefs.append([mean, end - mean])
    return SpaceTimeCoefficients(partition, w, np.array(coefs))


def p_tau(v, partition: TimePartition, w: int, points: int = 10) -> SpaceTimeCoefficients:
    """Interval-wise L2 projection onto polynomials of degree ``w``."""
    _check_degree(w)
    s, ws = gauss_legendre_unit(points)
    phi = basis_values(w, s)
    norms = basis_norms(w)
    coefs = []
    for m in range(1, partition.M + 1):
        a, b = partition.interval(m)
        samples = np.array([_sample(v, a + (b - a) * sq) for sq in s])
        c = np.tensordot(phi * ws, samples, axes=(1, 0))
        coefs.append(c / norms.reshape((-1,) + (1,) * (c.ndim - 1)))
    return SpaceTimeCoefficients(partition, w, np.array(coefs))


def from_function(v, partition: TimePartition, w: int) -> SpaceTimeCoefficients:
    """Coefficients of a function that is already piecewise degree-``w``."""
    return p_tau(v, partition, w, points=w + 1)


def l2_norm_squared(c: SpaceTimeCoefficients, gram=None) -> float:
    """``int_0^T |v|^2 dt`` using orthogonality; ``gram`` is a spatial inner-product matrix."""
    total = 0.0
    norms = basis_norms(c.w)
    for m in range(c.partition.M):
        tau = c.partition.steps[m]
        for j in range(c.w + 1):
            x = c.coef[m, j]
            sq = float(x @ (gram @ x)) if gram is not None else float(np.sum(x * x))
            total += tau * norms[j] * sq
    return total


def inverse_holder_ratio(w: int, coef, partition: TimePartition | None = None, m: int = 1) -> float:
    """``int_{I_m} |v|^2 / (tau_m^{-1} int_{I_m} (t - t_{m-1}) |v|^2)`` for a polynomial ``v``.

    ``coef`` holds the ``w + 1`` temporal coefficients (scalars or arrays).
    Both integrals use Gauss quadrature, exact for the degrees involved.
    """
    _check_degree(w)
    coef = np.asarray(coef, dtype=float)
    tau = 1.0 if partition is None else float(partition.steps[m - 1])
    s, ws = gauss_legendre_unit(w + 2)
    vals = np.tensordot(basis_values(w, s), coef, axes=(0, 0))
    sq = np.sum(vals.reshape(len(s), -1) ** 2, axis=1)
    num = tau * np.sum(ws * sq)
    den = np.sum(ws * (tau * s) * sq)  # tau^{-1} * int (t - t_{m-1}) |v|^2 dt with dt = tau ds
    return float(num / den)


def inverse_holder_constant(w: int) -> float:
    """Sharp constant of the weighted inverse inequality on degree-``w`` polynomials."""
    from scipy.linalg import eigh

    _check_degree(w)
    s, ws = gauss_legendre_unit(w + 2)
    phi = basis_values(w, s)
    G = np.einsum("q,iq,jq->ij", ws, phi, phi)
    S = np.einsum("q,q,iq,jq->ij", ws, s, phi, phi)
    return float(eigh(G, S, eigvals_only=True)[-1])
