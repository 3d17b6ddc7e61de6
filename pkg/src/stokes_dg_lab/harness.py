"""Study orchestration: convergence studies, probes and report files.

A study is a list of cells ``(n, M)``; each cell builds its mesh and
operators, solves and measures.  Cells may run concurrently (capped by the
``STOKES_DG_LAB_THREADS`` environment variable); rows are always reported
in canonical cell order.  Reports hold no timings or timestamps so that
identical configurations give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy

from .errors import bestapprox_terms, error_report, estimate_rate, stability_functionals
from .manufactured import PRESETS, get_preset, zero_problem
from .mesh import build_domain, mesh_metrics
from .operators import discretize, inf_sup_constant, leray_project
from .timegrid import uniform_partition
from .transient import solve_dg

COUPLINGS = ("refine_space_only", "refine_time_only", "coupled_h2", "coupled_h", "grid")
PROBES = ("stability", "bestapprox", "infsup", "leray_h1")
THREADS_ENV = "STOKES_DG_LAB_THREADS"


@dataclass
class StudyConfig:
    """Configuration of one study; stored as a single JSON document.

    ``coupling`` selects the cells: ``refine_space_only`` pairs every
    spatial level with ``temporal_levels[0]``, ``refine_time_only`` every
    temporal level with ``spatial_levels[0]``, ``coupled_h2`` / ``coupled_h``
    zip the two lists (with ``M`` proportional to ``n^2`` / ``n``) and
    ``grid`` takes the full tensor product.
    """

    problem: str = "stokes_vortex_exp"
    equation: str = "stokes"
    domain_kind: str = "unit_square"
    w: int = 0
    spatial_levels: list = field(default_factory=lambda: [2, 4, 8, 16])
    temporal_levels: list = field(default_factory=lambda: [64])
    T: float = 1.0
    norms: list = field(default_factory=lambda: ["l2l2"])
    coupling: str = "refine_space_only"
    tolerances: dict = field(default_factory=lambda: {"order": 0.2, "bound_factor": 1.5, "infsup_spread": 0.1})
    output: str | None = None
    leray_fields: list = field(default_factory=lambda: ["vortex", "vortex_2"])

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.equation not in ("stokes", "heat"):
            raise ValueError(f"equation must be 'stokes' or 'heat', got {self.equation!r}")
        if self.w not in (0, 1):
            raise ValueError("w must be 0 or 1")
        if not self.spatial_levels or not self.temporal_levels:
            raise ValueError("level lists must be non-empty")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.problem != "zero" and self.problem not in PRESETS:
            raise ValueError(f"unknown problem preset {self.problem!r}")
        if self.problem != "zero" and get_preset(self.problem).kind != self.equation:
            raise ValueError(f"preset {self.problem!r} does not solve the {self.equation} equation")
        if self.problem != "zero" and self.domain_kind not in get_preset(self.problem).meta["domains"]:
            raise ValueError(f"preset {self.problem!r} violates the boundary condition on {self.domain_kind!r}")
        for nm in self.norms:
            if nm not in ("l2l2", "l2h1", "linfl2_sampled"):
                raise ValueError(f"unknown norm {nm!r}")
        if self.coupling in ("coupled_h2", "coupled_h"):
            if len(self.spatial_levels) != len(self.temporal_levels):
                raise ValueError("coupled refinement needs level lists of equal length")
            p = 2 if self.coupling == "coupled_h2" else 1
            r = [M / n**p for n, M in zip(self.spatial_levels, self.temporal_levels)]
            if not np.allclose(r, r[0]):
                raise ValueError(f"{self.coupling}: M must be proportional to n^{p}")
        tol = {"order": 0.2, "bound_factor": 1.5, "infsup_spread": 0.1}
        tol.update(self.tolerances)
        self.tolerances = tol

    def cells(self) -> list[tuple[int, int]]:
        S, Tm = list(self.spatial_levels), list(self.temporal_levels)
        if self.coupling == "refine_space_only":
            return [(n, Tm[0]) for n in S]
        if self.coupling == "refine_time_only":
            return [(S[0], M) for M in Tm]
        if self.coupling == "grid":
            return [(n, M) for n in S for M in Tm]
        return list(zip(S, Tm))

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path, **overrides) -> "StudyConfig":
        with open(path) as fh:
            d = json.load(fh)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyReport:
    kind: str
    config: dict
    rows: list
    orders: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    passed: bool = False
    environment: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _environment() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _map_cells(fn, cells):
    """Run ``fn`` over cells, recording failures instead of raising."""
    def safe(cell):
        try:
            return fn(*cell)
        except Exception as exc:  # a failed cell must not stop the study
            return {"n": cell[0], "M": cell[1], "status": "failed", "message": f"{type(exc).__name__}: {exc}"}

    nthreads = _threads()
    if nthreads == 1 or len(cells) < 2:
        return [safe(c) for c in cells]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(safe, cells))


def _problem(config: StudyConfig):
    return zero_problem(config.equation) if config.problem == "zero" else get_preset(config.problem)


class _Discretizations:
    """Per-study cache so that cells sharing ``n`` share operators."""

    def __init__(self, config):
        self.config = config
        self._cache = {}

    def __call__(self, n):
        if n not in self._cache:
            mesh = build_domain(self.config.domain_kind, n)
            self._cache[n] = (mesh, discretize(mesh, self.config.equation))
        return self._cache[n]


def _cell_base(mesh, n, M, T):
    return {"n": n, "M": M, "h": mesh_metrics(mesh).h_max, "tau": T / M, "status": "ok"}


# ---------------------------------------------------------------------------
# convergence studies


def expected_order(config: StudyConfig, norm: str) -> float | None:
    """Expected order on the final refinement pair, in the refined parameter."""
    if norm == "linfl2_sampled":
        return None
    space = {"l2l2": 2.0, "l2h1": 1.0}[norm]
    if config.coupling == "refine_space_only" or config.coupling == "coupled_h2":
        return space
    if config.coupling == "refine_time_only":
        return {"l2l2": config.w + 1.0, "l2h1": 0.5}[norm]
    if config.coupling == "coupled_h":
        return {"l2l2": 1.0, "l2h1": 0.5}[norm]
    return None


def _order_parameter(config, row):
    return row["tau"] if config.coupling == "refine_time_only" else row["h"]


def run_convergence_study(config: StudyConfig) -> StudyReport:
    """Solve every cell, measure the error norms and compute pairwise orders.

    A norm passes when the order on the final pair is at least the
    expected order minus ``tolerances['order']``.
    """
    if config.coupling == "grid":
        raise ValueError("convergence studies need a one-parameter refinement, not 'grid'")
    problem = _problem(config)
    discs = _Discretizations(config)

    def cell(n, M):
        mesh, disc = discs(n)
        sol = solve_dg(problem, disc, uniform_partition(config.T, M), config.w)
        rep = error_report(problem, sol)
        row = _cell_base(mesh, n, M, config.T)
        row.update({"l2l2": rep.l2l2, "l2h1": rep.l2h1, "linfl2_sampled": rep.linfl2_sampled,
                    "max_solve_residual": max(r.final_relative_residual for r in sol.reports)})
        return row

    rows = _map_cells(cell, config.cells())
    report = StudyReport("convergence", config.to_dict(), rows, environment=_environment())
    ok_rows = all(r["status"] == "ok" for r in rows)
    passed = ok_rows
    for norm in config.norms:
        exp = expected_order(config, norm)
        orders = None
        if ok_rows and len(rows) >= 2:
            try:
                orders = estimate_rate([(_order_parameter(config, r), r[norm]) for r in rows])
            except ValueError:
                orders = None
        report.orders[norm] = orders
        check = {"expected": exp, "tolerance": config.tolerances["order"],
                 "last_order": orders[-1] if orders else None}
        if exp is None:
            check["passed"] = orders is not None
        else:
            check["passed"] = bool(orders is not None and orders[-1] >= exp - config.tolerances["order"])
        report.checks[norm] = check
        passed = passed and check["passed"]
    report.passed = bool(passed)
    return report


# ---------------------------------------------------------------------------
# probes


def bounded_check(values, factor: float) -> dict:
    """``max <= factor * first`` over finite values; degenerate (None) entries skipped."""
    vals = [v for v in values if v is not None]
    finite = all(math.isfinite(v) for v in vals)
    if not vals or not finite:
        return {"coarsest": None, "max": None, "factor": factor, "all_finite": finite, "passed": False}
    return {"coarsest": vals[0], "max": max(vals), "factor": factor, "all_finite": True,
            "passed": bool(max(vals) <= factor * vals[0])}


def _ratio(a, b):
    if b == 0.0:
        return None if a == 0.0 else math.inf
    return a / b


def _stability_probe(config, problem, discs):
    def cell(n, M):
        mesh, disc = discs(n)
        sol = solve_dg(problem, disc, uniform_partition(config.T, M), config.w)
        st = stability_functionals(sol, problem)
        row = _cell_base(mesh, n, M, config.T)
        row.update(st.as_dict())
        row["ratio"] = _ratio(st.lhs_l2, st.rhs_l2)
        row["ratio_grad"] = _ratio(st.lhs_grad, st.rhs_grad)
        row["degenerate"] = row["ratio"] is None
        return row

    rows = _map_cells(cell, config.cells())
    f = config.tolerances["bound_factor"]
    ok = [r for r in rows if r["status"] == "ok"]
    checks = {
        "ratio": bounded_check([r["ratio"] for r in ok], f),
        "ratio_grad": bounded_check([r["ratio_grad"] for r in ok], f),
    }
    return rows, checks


def _bestapprox_probe(config, problem, discs):
    if "l2h1" in config.norms and config.domain_kind != "unit_square":
        raise ValueError("the l2h1 best-approximation probe needs quasi-uniform unit_square meshes")

    def cell(n, M):
        mesh, disc = discs(n)
        part = uniform_partition(config.T, M)
        sol = solve_dg(problem, disc, part, config.w)
        err = error_report(problem, sol)
        row = _cell_base(mesh, n, M, config.T)
        for norm in config.norms:
            t_chi, t_pi, t_ritz = bestapprox_terms(problem, disc, part, config.w, norm)
            row[norm] = err[norm]
            row[f"{norm}_chi"] = t_chi
            row[f"{norm}_pi"] = t_pi
            row[f"{norm}_ritz"] = t_ritz
            row[f"{norm}_ratio"] = _ratio(err[norm], t_chi + t_pi + t_ritz)
        return row

    rows = _map_cells(cell, config.cells())
    f = config.tolerances["bound_factor"]
    ok = [r for r in rows if r["status"] == "ok"]
    checks = {f"{nm}_ratio": bounded_check([r[f"{nm}_ratio"] for r in ok], f) for nm in config.norms}
    return rows, checks


def _infsup_probe(config, problem, discs):
    if config.equation != "stokes":
        raise ValueError("the inf-sup probe needs the Stokes equation")

    def cell(n, M):
        mesh, disc = discs(n)
        beta, rep = inf_sup_constant(disc)
        row = _cell_base(mesh, n, M, config.T)
        row.update({"beta_h": beta, "eig_iterations": rep.iterations,
                    "eig_residual": rep.final_relative_residual, "eig_converged": rep.converged})
        if not rep.converged:
            row["status"] = "failed"
            row["message"] = "eigen-iteration did not converge"
        return row

    cells = [(n, config.temporal_levels[0]) for n in config.spatial_levels]
    rows = _map_cells(cell, cells)
    betas = [r.get("beta_h") for r in rows if r["status"] == "ok"]
    ok = len(betas) == len(rows) and len(betas) > 0
    mean = float(np.mean(betas)) if betas else None
    spread = float(max(betas) - min(betas)) if betas else None
    lim = config.tolerances["infsup_spread"]
    checks = {"infsup": {
        "mean": mean, "spread": spread, "relative_spread": spread / mean if ok else None,
        "limit": lim, "all_positive": bool(ok and min(betas) > 0),
        "passed": bool(ok and min(betas) > 0 and spread <= lim * mean),
    }}
    return rows, checks


def leray_test_field(name: str):
    """Divergence-free fields vanishing on the unit-square boundary (curl of a stream function)."""
    k = {"vortex": 1, "vortex_2": 2, "vortex_3": 3}[name]
    pi = np.pi

    # psi = sin^2(k pi x) sin^2(k pi y) / k
    def u(x, y):
        a = k * pi
        return np.array([
            np.sin(a * x) ** 2 * np.sin(2 * a * y) * pi,
            -np.sin(2 * a * x) * np.sin(a * y) ** 2 * pi,
        ])

    def grad(x, y):
        a = k * pi
        s2x, s2y = np.sin(2 * a * x), np.sin(2 * a * y)
        return a * pi * np.array([
            [s2x * s2y, 2 * np.sin(a * x) ** 2 * np.cos(2 * a * y)],
            [-2 * np.cos(2 * a * x) * np.sin(a * y) ** 2, -s2x * s2y],
        ])

    return u, grad


def _leray_probe(config, problem, discs):
    if config.domain_kind != "unit_square" or config.equation != "stokes":
        raise ValueError("the Leray H1 probe runs on unit_square Stokes discretisations only")

    def cell(n, M):
        mesh, disc = discs(n)
        row = _cell_base(mesh, n, M, config.T)
        tab = disc.tables
        x, y = tab.xq[..., 0], tab.xq[..., 1]
        worst = 0.0
        for name in config.leray_fields:
            u, grad = leray_test_field(name)
            P = leray_project(disc, u)
            num = np.sqrt(tab.integrate(tab.gradients(disc.velocity, P.coef) ** 2))
            den = np.sqrt(tab.integrate(np.asarray(grad(x, y)) ** 2))
            row[f"ratio_{name}"] = float(num / den)
            worst = max(worst, num / den)
        row["ratio"] = float(worst)
        return row

    cells = [(n, config.temporal_levels[0]) for n in config.spatial_levels]
    rows = _map_cells(cell, cells)
    ok = [r for r in rows if r["status"] == "ok"]
    checks = {"ratio": bounded_check([r["ratio"] for r in ok], config.tolerances["bound_factor"])}
    return rows, checks


def run_probe(kind: str, config: StudyConfig) -> StudyReport:
    """Run one probe; ``kind`` is ``stability``, ``bestapprox``, ``infsup`` or ``leray_h1``."""
    runners = {"stability": _stability_probe, "bestapprox": _bestapprox_probe,
               "infsup": _infsup_probe, "leray_h1": _leray_probe}
    if kind not in runners:
        raise ValueError(f"unknown probe {kind!r}; choose from {PROBES}")
    problem = _problem(config)
    rows, checks = runners[kind](config, problem, _Discretizations(config))
    report = StudyReport(kind, config.to_dict(), rows, checks=checks, environment=_environment())
    report.passed = bool(
        all(r["status"] == "ok" for r in rows) and all(c["passed"] for c in checks.values())
    )
    return report


# ---------------------------------------------------------------------------
# report files

CSV_HEADER = (
    "kind", "n", "M", "h", "tau", "status",
    "l2l2", "l2h1", "linfl2_sampled",
    "lhs_l2", "rhs_l2", "ratio", "lhs_grad", "rhs_grad", "ratio_grad",
    "l2l2_chi", "l2l2_pi", "l2l2_ritz", "l2l2_ratio",
    "l2h1_chi", "l2h1_pi", "l2h1_ritz", "l2h1_ratio",
    "beta_h", "max_solve_residual", "message",
)
"""CSV columns, identical for every report kind; cells lacking a quantity are left empty."""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def report_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for row in report.rows:
        full = {"kind": report.kind, **row}
        wr.writerow([_fmt(full.get(col)) for col in CSV_HEADER])
    return buf.getvalue()


def report_json(report: StudyReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def write_report(report: StudyReport, fmt: str, path) -> str:
    """Write ``report`` as ``csv`` or ``json`` to ``path``; returns the path."""
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report_json(report)
    else:
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return str(path)


def read_report_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
