"""Manufactured exact solutions with analytic derivatives and forcings.

Every evaluator has the signature ``fn(t, x, y)`` and returns an array with
the component axis first: ``u -> (ncomp, ...)``, ``grad_u -> (ncomp, 2, ...)``.
Pressures are scalars ``(...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PI = np.pi
TWO_PI_SQ = 2.0 * PI**2


@dataclass(frozen=True, eq=False)
class ManufacturedProblem:
    kind: str  # "stokes" or "heat"
    name: str
    u: Callable
    grad_u: Callable
    dt_u: Callable
    laplace_u: Callable
    f: Callable
    p: Callable | None = None
    grad_p: Callable | None = None
    hessian_u: Callable | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ncomp(self) -> int:
        return 2 if self.kind == "stokes" else 1

    def u0(self, x, y):
        return self.u(0.0, x, y)

    def f_at(self, t):
        return lambda x, y: self.f(t, x, y)


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time factor ``g`` with its derivative."""

    name: str
    g: Callable
    dg: Callable


EXP_DECAY = TimeProfile("exp", lambda t: np.exp(-t), lambda t: -np.exp(-t))
LINEAR = TimeProfile("linear", lambda t: 1.0 + t, lambda t: 1.0 + 0.0 * t)


def make_stokes_vortex(profile: TimeProfile = EXP_DECAY, name: str | None = None,
                       k: int = 1) -> ManufacturedProblem:
    """Vortex from the stream function ``sin^2(k pi x) sin^2(k pi y) g(t) / k``.

    ``u = (d_y psi, -d_x psi)`` is divergence free and vanishes on the
    boundary of the unit square; for even ``k`` it also vanishes on the
    lines ``x = 1/2`` and ``y = 1/2``, hence on the L-shaped domain.
    ``p = sin(2 pi x) cos(2 pi y) g(t)`` has zero mean on both domains.
    """
    g, dg = profile.g, profile.dg
    sn, cs = np.sin, np.cos
    a = k * PI

    def spatial_u(x, y):
        return PI * np.array([
            sn(a * x) ** 2 * sn(2 * a * y),
            -sn(2 * a * x) * sn(a * y) ** 2,
        ])

    def u(t, x, y):
        return g(t) * spatial_u(x, y)

    def dt_u(t, x, y):
        return dg(t) * spatial_u(x, y)

    def grad_u(t, x, y):
        s2x, s2y = sn(2 * a * x), sn(2 * a * y)
        return g(t) * a * PI * np.array([
            [s2x * s2y, 2 * sn(a * x) ** 2 * cs(2 * a * y)],
            [-2 * cs(2 * a * x) * sn(a * y) ** 2, -s2x * s2y],
        ])

    def hessian_u(t, x, y):
        s2x, s2y, c2x, c2y = sn(2 * a * x), sn(2 * a * y), cs(2 * a * x), cs(2 * a * y)
        sx2, sy2 = sn(a * x) ** 2, sn(a * y) ** 2
        c = g(t) * a**2 * PI
        h1 = np.array([[2 * c2x * s2y, 2 * s2x * c2y], [2 * s2x * c2y, -4 * sx2 * s2y]])
        h2 = np.array([[4 * s2x * sy2, -2 * c2x * s2y], [-2 * c2x * s2y, -2 * s2x * c2y]])
        return c * np.array([h1, h2])

    def laplace_u(t, x, y):
        c = 2 * g(t) * a**2 * PI
        return c * np.array([
            sn(2 * a * y) * (1 - 4 * sn(a * x) ** 2),
            -sn(2 * a * x) * (1 - 4 * sn(a * y) ** 2),
        ])

    def p(t, x, y):
        return g(t) * sn(2 * PI * x) * cs(2 * PI * y)

    def grad_p(t, x, y):
        return g(t) * 2 * PI * np.array([
            cs(2 * PI * x) * cs(2 * PI * y),
            -sn(2 * PI * x) * sn(2 * PI * y),
        ])

    def f(t, x, y):
        return dt_u(t, x, y) - laplace_u(t, x, y) + grad_p(t, x, y)

    return ManufacturedProblem(
        kind="stokes",
        name=name or f"stokes_vortex_{profile.name}",
        u=u, grad_u=grad_u, dt_u=dt_u, laplace_u=laplace_u, f=f,
        p=p, grad_p=grad_p, hessian_u=hessian_u,
        meta={"divergence_free": True, "profile": profile.name, "k": k,
              "domains": ("unit_square", "l_shape") if k % 2 == 0 else ("unit_square",),
              "regularity": "smooth; u0 in V^1, f in L2(I;L2)"},
    )


def make_heat_separable(decay: float, name: str | None = None) -> ManufacturedProblem:
    """``u = sin(pi x) sin(pi y) exp(-decay t)`` with ``f = (2 pi^2 - decay) u``."""
    sn, cs = np.sin, np.cos

    def u(t, x, y):
        return np.exp(-decay * t) * (sn(PI * x) * sn(PI * y))[None]

    def dt_u(t, x, y):
        return -decay * u(t, x, y)

    def grad_u(t, x, y):
        e = np.exp(-decay * t)
        return e * PI * np.array([[cs(PI * x) * sn(PI * y), sn(PI * x) * cs(PI * y)]])

    def hessian_u(t, x, y):
        e = np.exp(-decay * t) * PI**2
        sxy = sn(PI * x) * sn(PI * y)
        cxy = cs(PI * x) * cs(PI * y)
        return e * np.array([[[-sxy, cxy], [cxy, -sxy]]])

    def laplace_u(t, x, y):
        return -TWO_PI_SQ * u(t, x, y)

    def f(t, x, y):
        return (TWO_PI_SQ - decay) * u(t, x, y)

    return ManufacturedProblem(
        kind="heat",
        name=name or f"heat_separable_{decay:g}",
        u=u, grad_u=grad_u, dt_u=dt_u, laplace_u=laplace_u, f=f, hessian_u=hessian_u,
        meta={"decay": decay, "domains": ("unit_square",), "regularity": "smooth eigenmode"},
    )


PRESETS = {
    "stokes_vortex_exp": lambda: make_stokes_vortex(EXP_DECAY, "stokes_vortex_exp"),
    "stokes_vortex_linear": lambda: make_stokes_vortex(LINEAR, "stokes_vortex_linear"),
    "stokes_vortex_lshape": lambda: make_stokes_vortex(EXP_DECAY, "stokes_vortex_lshape", k=2),
    "heat_mode": lambda: make_heat_separable(TWO_PI_SQ, "heat_mode"),
    "heat_generic": lambda: make_heat_separable(1.0, "heat_generic"),
}


def get_preset(name: str) -> ManufacturedProblem:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown problem preset {name!r}; choose from {sorted(PRESETS)}") from None


def zero_problem(kind: str = "stokes") -> ManufacturedProblem:
    """``u = p = f = 0``; useful for trivial-data checks."""
    nc = 2 if kind == "stokes" else 1

    def zero_vec(t, x, y):
        return np.zeros((nc,) + np.shape(x))

    def zero_grad(t, x, y):
        return np.zeros((nc, 2) + np.shape(x))

    def zero_scalar(t, x, y):
        return np.zeros(np.shape(x))

    def zero_pgrad(t, x, y):
        return np.zeros((2,) + np.shape(x))

    return ManufacturedProblem(
        kind=kind, name="zero", u=zero_vec, grad_u=zero_grad, dt_u=zero_vec,
        laplace_u=zero_vec, f=zero_vec,
        p=zero_scalar if kind == "stokes" else None,
        grad_p=zero_pgrad if kind == "stokes" else None,
        meta={"domains": ("unit_square", "l_shape")},
    )


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class ProblemDiagnostics:
    max_residual: float
    max_fd_residual: float
    max_divergence: float
    worst_point: tuple
    ok: bool


def _central(fn, t, x, y, h, axis):
    """Fourth-order central difference of ``fn`` along ``axis`` with step ``h``."""
    def at(k):
        if axis == "t":
            return fn(t + k * h, x, y)
        if axis == "x":
            return fn(t, x + k * h, y)
        return fn(t, x, y + k * h)

    return (8 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12 * h)


def verify_problem(problem: ManufacturedProblem, samples: int = 100, seed: int = 0,
                   T: float = 1.0, fd_step: float = 1e-5, tol: float = 1e-6) -> ProblemDiagnostics:
    """Check ``f = u_t - Delta u (+ grad p)`` at random space-time points.

    The analytic residual takes the Laplacian from the trace of the
    Hessian evaluator (independent of the one used to build ``f``).  The
    finite-difference residual replaces ``u_t``, ``grad p`` and the
    Laplacian by central differences of ``u``, ``p`` and ``grad u``, and
    also compares ``grad u`` with central differences of ``u``.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, T, samples)
    x = rng.uniform(0.0, 1.0, samples)
    y = rng.uniform(0.0, 1.0, samples)
    f = problem.f(t, x, y)
    grad_p = problem.grad_p(t, x, y) if problem.grad_p is not None else 0.0
    if problem.hessian_u is not None:
        H = problem.hessian_u(t, x, y)
        lap = H[:, 0, 0] + H[:, 1, 1]
    else:
        lap = problem.laplace_u(t, x, y)
    res = np.abs(f - (problem.dt_u(t, x, y) - lap + grad_p)).max(axis=0)

    h = fd_step
    dt = _central(problem.u, t, x, y, h, "t")
    gx = _central(problem.grad_u, t, x, y, h, "x")
    gy = _central(problem.grad_u, t, x, y, h, "y")
    fd_lap = gx[:, 0] + gy[:, 1]
    fd_gp = 0.0
    if problem.p is not None:
        fd_gp = np.array([_central(problem.p, t, x, y, h, "x"), _central(problem.p, t, x, y, h, "y")])
    fd_grad = np.stack([_central(problem.u, t, x, y, h, "x"), _central(problem.u, t, x, y, h, "y")], axis=1)
    fd_res = np.maximum(
        np.abs(f - (dt - fd_lap + fd_gp)).max(axis=0),
        np.abs(fd_grad - problem.grad_u(t, x, y)).max(axis=(0, 1)),
    )
    div = np.abs(np.trace(problem.grad_u(t, x, y), axis1=0, axis2=1)) if problem.ncomp == 2 \
        else np.zeros(samples)
    worst = int(np.argmax(np.maximum(res, fd_res)))
    ok = bool(res.max() <= tol and fd_res.max() <= tol)
    return ProblemDiagnostics(
        max_residual=float(res.max()),
        max_fd_residual=float(fd_res.max()),
        max_divergence=float(div.max()),
        worst_point=(float(t[worst]), float(x[worst]), float(y[worst])),
        ok=ok,
    )
