"""Space-time dG(w) finite elements for the transient Stokes and heat equations.

Taylor-Hood P2-P1 in space on triangle meshes, discontinuous Galerkin of
degree 0 or 1 in time, plus the discrete projections, error norms and
stability functionals needed to measure the scheme's error estimates.
"""
from .errors import (
    ErrorReport,
    StabilityReport,
    bestapprox_terms,
    error_report,
    estimate_rate,
    spacetime_error,
    stability_functionals,
)
from .fespace import FESpacePair, LagrangeSpace, build_scalar_p2, build_taylor_hood
from .harness import StudyConfig, StudyReport, run_convergence_study, run_probe, write_report
from .manufactured import ManufacturedProblem, get_preset, make_heat_separable, make_stokes_vortex, verify_problem
from .mesh import Mesh, build_domain, mesh_metrics, refine_uniform
from .operators import (
    DiscreteField,
    HeatDiscretization,
    StokesDiscretization,
    apply_Ah,
    discretize,
    elliptic_ritz,
    inf_sup_constant,
    l2_project,
    leray_project,
    solve_Ah_inverse,
    stokes_ritz,
)
from .timegrid import SpaceTimeCoefficients, TimePartition, p_tau, pi_tau, uniform_partition
from .transient import SpaceTimeSolution, eval_form, solve_heat_dg, solve_stokes_dg

__version__ = "0.1.0"
