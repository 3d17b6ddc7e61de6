"""Space-time error norms, stability functionals, best-approximation terms and rates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import (
    Ah_inverse_from_load,
    StokesDiscretization,
    apply_Ah,
    elliptic_ritz_values,
    leray_from_load,
    stokes_ritz_values,
)
from .quadrature import gauss_legendre_unit
from .timegrid import basis_derivatives, basis_norms, basis_values, time_quadrature

TIME_POINTS = 5
NORMS = ("l2l2", "l2h1", "linfl2_sampled")


@dataclass
class ErrorReport:
    l2l2: float
    l2h1: float
    linfl2_sampled: float
    per_interval: dict = field(default_factory=dict)  # squared contributions per interval

    def __getitem__(self, key):
        if key not in NORMS:
            raise KeyError(key)
        return getattr(self, key)


def _error_core(disc, partition, exact_u, exact_grad, approx, time_points=TIME_POINTS):
    """Integrate ``|u - a|^2`` and ``|grad(u - a)|^2`` over space-time.

    ``approx(m, k, s_k, t_k)`` returns ``(values, gradients)`` of the
    approximation at the spatial quadrature points, shaped
    ``(ncomp, nt, nq)`` and ``(ncomp, 2, nt, nq)``.
    """
    tab = disc.tables
    x, y = tab.xq[..., 0], tab.xq[..., 1]
    nc = disc.velocity.ncomp
    s, t, wt = time_quadrature(partition, time_points)
    M = partition.M
    l2 = np.zeros(M)
    h1 = np.zeros(M)
    sup = 0.0
    for m in range(M):
        for k in range(time_points):
            tk = float(t[m, k])
            av, ag = approx(m, k, s[k], tk)
            ev = np.asarray(exact_u(tk, x, y)).reshape(nc, *x.shape)
            eg = np.asarray(exact_grad(tk, x, y)).reshape(nc, 2, *x.shape)
            e0 = tab.integrate((ev - av) ** 2)
            l2[m] += wt[m, k] * e0
            h1[m] += wt[m, k] * tab.integrate((eg - ag) ** 2)
            sup = max(sup, e0)
    return ErrorReport(
        l2l2=float(np.sqrt(l2.sum())),
        l2h1=float(np.sqrt(h1.sum())),
        linfl2_sampled=float(np.sqrt(sup)),
        per_interval={"l2l2_sq": l2, "l2h1_sq": h1},
    )


def _coef_approx(disc, coef_at):
    tab, vel = disc.tables, disc.velocity

    def approx(m, k, s, t):
        c = coef_at(m, k, s, t)
        return tab.values(vel, c), tab.gradients(vel, c)

    return approx


def error_report(problem, solution, time_points: int = TIME_POINTS) -> ErrorReport:
    """All error norms of the discrete velocity (or scalar) against the exact field."""
    U = solution.velocity.coef
    w = solution.w

    def coef_at(m, k, s, t):
        return basis_values(w, s)[:, 0] @ U[m]

    return _error_core(solution.disc, solution.partition, problem.u, problem.grad_u,
                       _coef_approx(solution.disc, coef_at), time_points)


def spacetime_error(problem, solution, which: str = "l2l2") -> float:
    """One error norm: ``l2l2``, ``l2h1`` (L2-in-time H1 seminorm) or ``linfl2_sampled``."""
    if which not in NORMS:
        raise ValueError(f"unknown norm {which!r}; choose from {NORMS}")
    return error_report(problem, solution)[which]


# ---------------------------------------------------------------------------
# stability functionals


@dataclass
class StabilityReport:
    dt_norm: float
    Ah_norm: float
    jump_norm: float
    grad_dt_norm: float
    grad_norm: float
    grad_jump_norm: float
    data_norms: dict

    @property
    def lhs_l2(self) -> float:
        """Left side of the ``A_h``-stability estimate."""
        return self.dt_norm + self.Ah_norm + self.jump_norm

    @property
    def rhs_l2(self) -> float:
        return self.data_norms["Ph_f"] + self.data_norms["grad_Ph_u0"]

    @property
    def lhs_grad(self) -> float:
        """Left side of the ``grad A_h^{-1}``-stability estimate."""
        return self.grad_dt_norm + self.grad_norm + self.grad_jump_norm

    @property
    def rhs_grad(self) -> float:
        return self.data_norms["grad_Ainv_Ph_f"] + self.data_norms["Ph_u0"]

    def as_dict(self) -> dict:
        return {
            "dt_norm": self.dt_norm, "Ah_norm": self.Ah_norm, "jump_norm": self.jump_norm,
            "grad_dt_norm": self.grad_dt_norm, "grad_norm": self.grad_norm,
            "grad_jump_norm": self.grad_jump_norm, **self.data_norms,
            "lhs_l2": self.lhs_l2, "rhs_l2": self.rhs_l2,
            "lhs_grad": self.lhs_grad, "rhs_grad": self.rhs_grad,
        }


def _dt_sq(coef, partition, w, norm_sq):
    """``sum_m int_{I_m} |d_t v|^2`` with exact Gauss integration of the polynomial."""
    s, ws = gauss_legendre_unit(w + 1)
    dphi = basis_derivatives(w, s)
    total = 0.0
    for m in range(partition.M):
        tau = partition.steps[m]
        for k in range(len(s)):
            d = dphi[:, k] @ coef[m] / tau
            total += tau * ws[k] * norm_sq(d)
    return total


def _l2_sq(coef, partition, w, norm_sq):
    N = basis_norms(w)
    return sum(partition.steps[m] * N[j] * norm_sq(coef[m, j])
               for m in range(partition.M) for j in range(w + 1))


def _jump_sq(coef, initial, partition, w, norm_sq):
    phi0 = basis_values(w, 0.0)[:, 0]
    phi1 = basis_values(w, 1.0)[:, 0]
    total = 0.0
    prev = initial
    for m in range(partition.M):
        jump = phi0 @ coef[m] - prev
        total += norm_sq(jump) / partition.steps[m]
        prev = phi1 @ coef[m]
    return total


def stability_functionals(solution, problem, time_points: int = TIME_POINTS) -> StabilityReport:
    """Left-hand sides of both stability estimates and the matching data norms.

    ``problem`` supplies ``f`` and ``u0`` (a :class:`ManufacturedProblem`
    or anything with ``f(t, x, y)`` / ``u0(x, y)`` attributes; ``None`` for
    zero data).
    """
    from .transient import initial_load

    disc = solution.disc
    if not isinstance(disc, StokesDiscretization):
        raise TypeError("stability functionals are defined for the Stokes solver")
    part, w = solution.partition, solution.w
    U = solution.velocity.coef
    Mm, Km = disc.M, disc.K

    def m_sq(v):
        return float(v @ (Mm @ v))

    def k_sq(v):
        return float(v @ (Km @ v))

    initial = solution.initial if solution.initial is not None else np.zeros(disc.n_u)
    AU = np.array([[apply_Ah(disc, U[m, j]).coef for j in range(w + 1)] for m in range(part.M)])
    Z = np.array([[Ah_inverse_from_load(disc, Mm @ U[m, j]) for j in range(w + 1)] for m in range(part.M)])
    Z0 = Ah_inverse_from_load(disc, Mm @ initial)

    dt = _dt_sq(U, part, w, m_sq)
    ah = _l2_sq(AU, part, w, m_sq)
    jump = _jump_sq(U, initial, part, w, m_sq)
    gdt = _dt_sq(Z, part, w, k_sq)
    grad = _l2_sq(U, part, w, k_sq)
    gjump = _jump_sq(Z, Z0, part, w, k_sq)

    f = getattr(problem, "f", None) if problem is not None else None
    u0 = getattr(problem, "u0", None) if problem is not None else None
    Pf_sq, gAf_sq = 0.0, 0.0
    if f is not None:
        s, t, wt = time_quadrature(part, time_points)
        for m in range(part.M):
            for k in range(time_points):
                L = disc.load_values(disc.evaluate(f, float(t[m, k])))
                Pf_sq += wt[m, k] * m_sq(leray_from_load(disc, L))
                gAf_sq += wt[m, k] * k_sq(Ah_inverse_from_load(disc, L))
    Pu0 = leray_from_load(disc, initial_load(disc, u0))
    data = {
        "Ph_f": float(np.sqrt(Pf_sq)),
        "grad_Ph_u0": float(np.sqrt(k_sq(Pu0))),
        "grad_Ainv_Ph_f": float(np.sqrt(gAf_sq)),
        "Ph_u0": float(np.sqrt(m_sq(Pu0))),
    }
    r = np.sqrt
    return StabilityReport(
        dt_norm=float(r(dt)), Ah_norm=float(r(ah)), jump_norm=float(r(jump)),
        grad_dt_norm=float(r(gdt)), grad_norm=float(r(grad)), grad_jump_norm=float(r(gjump)),
        data_norms=data,
    )


# ---------------------------------------------------------------------------
# best-approximation terms


def _ritz_at(disc, problem, t):
    """Spatial projection of the exact solution at time ``t``: Stokes-Ritz or elliptic Ritz."""
    tab = disc.tables
    x, y = tab.xq[..., 0], tab.xq[..., 1]
    G = np.asarray(problem.grad_u(t, x, y))
    if isinstance(disc, StokesDiscretization):
        u, _ = stokes_ritz_values(disc, G, np.broadcast_to(problem.p(t, x, y), x.shape))
        return u
    return elliptic_ritz_values(disc, G.reshape(1, 2, *x.shape))


def bestapprox_terms(problem, disc, partition, w: int, norm: str = "l2l2",
                     time_points: int = TIME_POINTS, pi_points: int = 10):
    """``(||u - chi||, ||u - pi_tau u||, ||u - R u||)`` with ``chi = P_tau R u``.

    ``R`` is the Stokes-Ritz projection of ``(u, p)`` (or the elliptic Ritz
    projection for the heat equation) applied at each time; ``pi_tau`` acts
    in time only, pointwise at the spatial quadrature points.
    """
    if norm not in ("l2l2", "l2h1"):
        raise ValueError("norm must be 'l2l2' or 'l2h1'")
    tab, vel = disc.tables, disc.velocity
    x, y = tab.xq[..., 0], tab.xq[..., 1]
    nc = vel.ncomp
    s, t, _ = time_quadrature(partition, time_points)
    _, ws = gauss_legendre_unit(time_points)
    phi = basis_values(w, s)
    N = basis_norms(w)

    # R u at the time quadrature points and its temporal L2 projection
    R = np.array([[_ritz_at(disc, problem, float(t[m, k])) for k in range(time_points)]
                  for m in range(partition.M)])
    chi = np.einsum("jk,k,mkn->mjn", phi, ws, R) / N[None, :, None]

    def ritz(m, k, s_k, t_k):
        return R[m, k]

    def chi_at(m, k, s_k, t_k):
        return phi[:, k] @ chi[m]

    # pi_tau of the exact field, pointwise in space
    sp_, wp_ = gauss_legendre_unit(pi_points)

    def exact_vals(tt):
        return (np.asarray(problem.u(tt, x, y)).reshape(nc, *x.shape),
                np.asarray(problem.grad_u(tt, x, y)).reshape(nc, 2, *x.shape))

    pi_coef = []
    for m in range(1, partition.M + 1):
        a, b = partition.interval(m)
        end = exact_vals(b)
        if w == 0:
            pi_coef.append([end])
            continue
        mean_v = sum(wq * exact_vals(a + (b - a) * sq)[0] for sq, wq in zip(sp_, wp_))
        mean_g = sum(wq * exact_vals(a + (b - a) * sq)[1] for sq, wq in zip(sp_, wp_))
        pi_coef.append([(mean_v, mean_g), (end[0] - mean_v, end[1] - mean_g)])

    def pi_at(m, k, s_k, t_k):
        vals = sum(phi[j, k] * pi_coef[m][j][0] for j in range(w + 1))
        grads = sum(phi[j, k] * pi_coef[m][j][1] for j in range(w + 1))
        return vals, grads

    terms = []
    for approx in (_coef_approx(disc, chi_at), pi_at, _coef_approx(disc, ritz)):
        rep = _error_core(disc, partition, problem.u, problem.grad_u, approx, time_points)
        terms.append(rep[norm])
    return tuple(terms)


# ---------------------------------------------------------------------------
# rates


def estimate_rate(values) -> list[float]:
    """Pairwise observed orders ``log(e_i / e_{i+1}) / log(p_i / p_{i+1})``.

    ``values`` is a sequence of ``(parameter, error)`` with strictly
    decreasing parameters and positive errors.
    """
    values = [(float(p), float(e)) for p, e in values]
    if len(values) < 2:
        raise ValueError("need at least two (parameter, error) points")
    p = np.array([v[0] for v in values])
    e = np.array([v[1] for v in values])
    if np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors must be positive and finite")
    if np.any(p <= 0) or np.any(np.diff(p) >= 0):
        raise ValueError("parameters must be positive and strictly decreasing")
    return [float(r) for r in np.log(e[:-1] / e[1:]) / np.log(p[:-1] / p[1:])]
