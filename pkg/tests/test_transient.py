import json

import numpy as np
import pytest
import scipy.sparse as sp

from stokes_dg_lab.linalg import SolverError
from stokes_dg_lab.manufactured import get_preset
from stokes_dg_lab.operators import leray_from_load
from stokes_dg_lab.timegrid import TimePartition, uniform_partition
from stokes_dg_lab.transient import (
    DGData,
    dg_march,
    eval_form,
    exact_residual,
    interval_matrix,
    load_moments,
    random_test_pair,
    rhs_functional,
    solve_dg,
    solve_heat_dg,
    solve_stokes_dg,
)

VORTEX = get_preset("stokes_vortex_exp")


@pytest.fixture(scope="module")
def part4():
    return uniform_partition(1.0, 4)


@pytest.fixture(scope="module", params=[0, 1])
def vortex_solution(request, stokes4, part4):
    return solve_stokes_dg(VORTEX, stokes4, part4, request.param)


def one_dof(v=1.0):
    return sp.csr_matrix([[v]])


# -- scalar sanity ------------------------------------------------------------


def test_one_dof_backward_euler():
    part = uniform_partition(0.3, 3)
    F = np.zeros((3, 1, 1))
    U, P, _ = dg_march(one_dof(), one_dof(), part, 0, F, np.array([1.0]))
    assert P is None
    np.testing.assert_allclose(U[:, 0, 0], 1.1 ** -np.arange(1, 4), rtol=1e-14)


def test_one_dof_dg1_is_radau_iia():
    # dG(1) end values equal the subdiagonal (1, 2) Pade approximant of exp(-z)
    z = 0.25
    part = uniform_partition(z, 1)
    U, _, _ = dg_march(one_dof(), one_dof(), part, 1, np.zeros((1, 2, 1)), np.array([1.0]))
    end = U[0, 0, 0] + U[0, 1, 0]
    assert end == pytest.approx((1 - z / 3) / (1 + 2 * z / 3 + z**2 / 6), rel=1e-14)


@pytest.mark.parametrize("w", [0, 1])
def test_constant_state_without_dissipation(w):
    part = uniform_partition(1.0, 5)
    U, _, _ = dg_march(one_dof(), one_dof(0.0), part, w, np.zeros((5, w + 1, 1)), np.array([2.5]))
    np.testing.assert_allclose(U[:, 0, 0], 2.5, rtol=1e-15)
    if w == 1:
        np.testing.assert_allclose(U[:, 1, 0], 0.0, atol=1e-15)


def test_interval_matrix_shape(stokes4):
    A = interval_matrix(stokes4.M, stokes4.K, 1, 0.1, stokes4.B, stokes4.ops.mean_vector)
    assert A.shape[0] == 2 * (stokes4.n_u + stokes4.n_p + 1)


def test_singular_system_raises():
    part = uniform_partition(1.0, 2)
    zero = sp.csr_matrix((1, 1))
    with pytest.raises(SolverError, match="interval 1"):
        dg_march(zero, zero, part, 0, np.zeros((2, 1, 1)), np.array([1.0]))


# -- trivial and steady data --------------------------------------------------


@pytest.mark.parametrize("w", [0, 1])
def test_zero_data_gives_zero(stokes4, part4, w):
    sol = solve_stokes_dg(DGData(), stokes4, part4, w)
    assert not sol.velocity.coef.any() and not sol.pressure.coef.any()


@pytest.mark.parametrize("w", [0, 1])
def test_steady_data_reproduces_stationary_solution(stokes4, part4, w, rng):
    d = stokes4
    g = rng.standard_normal(d.n_u)
    us, ps = d.constrained_solve("stiffness", g)
    F = np.zeros((part4.M, w + 1, d.n_u))
    F[:, 0] = part4.steps[:, None] * g
    U, P, _ = dg_march(d.M, d.K, part4, w, F, d.M @ us, d.B, d.ops.mean_vector)
    for m in range(part4.M):
        assert np.linalg.norm(U[m, 0] - us) <= 1e-9 * np.linalg.norm(us)
        assert np.linalg.norm(P[m, 0] - ps) <= 1e-8 * np.linalg.norm(ps)
        if w == 1:
            assert np.linalg.norm(U[m, 1]) <= 1e-9 * np.linalg.norm(us)


def test_wrong_discretization_type(stokes4, heat4, part4):
    with pytest.raises(TypeError):
        solve_stokes_dg(DGData(), heat4, part4, 0)
    with pytest.raises(TypeError):
        solve_heat_dg(DGData(), stokes4, part4, 0)


# -- structural properties ----------------------------------------------------


def test_velocity_coefficients_in_Vh(vortex_solution):
    d = vortex_solution.disc
    U = vortex_solution.velocity.coef
    assert all(d.in_Vh(U[m, j]) for m in range(U.shape[0]) for j in range(U.shape[1]))
    assert d.in_Vh(vortex_solution.initial)


def test_energy_decays_without_forcing(stokes4, rng):
    part = uniform_partition(1.0, 8)
    for w in (0, 1):
        sol = solve_stokes_dg(DGData(None, rng.standard_normal(stokes4.n_u)), stokes4, part, w)
        norms = [row["left_norm"] for row in sol.node_summary()]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_causality_is_bitwise(stokes4, part4):
    def late(t, x, y):
        return (t > 0.5) * VORTEX.f(t, x, y)

    a = solve_stokes_dg(DGData(None, VORTEX.u0), stokes4, part4, 1)
    b = solve_stokes_dg(DGData(late, VORTEX.u0), stokes4, part4, 1)
    assert np.array_equal(a.velocity.coef[:2], b.velocity.coef[:2])
    assert np.array_equal(a.pressure.coef[:2], b.pressure.coef[:2])
    assert not np.array_equal(a.velocity.coef[2:], b.velocity.coef[2:])


def test_heat_solve_smoke(heat4):
    part = uniform_partition(1.0, 4)
    sol = solve_dg(get_preset("heat_generic"), heat4, part, 1)
    assert sol.pressure is None and np.all(np.isfinite(sol.velocity.coef))
    assert sol.velocity.coef.shape == (4, 2, heat4.n_u)


def test_node_summary_and_dump(vortex_solution, tmp_path):
    rows = vortex_solution.node_summary()
    assert len(rows) == vortex_solution.partition.M + 1
    assert rows[-1]["jump_norm"] is None and rows[0]["jump_norm"] >= 0
    path = tmp_path / "nodes.json"
    vortex_solution.dump(path)
    data = json.loads(path.read_text())
    assert data["w"] == vortex_solution.w and len(data["nodes"]) == len(rows)


# -- forms --------------------------------------------------------------------


@pytest.mark.parametrize("w", [0, 1])
def test_primal_equals_dual(stokes4, part4, w, rng):
    for _ in range(3):
        u = random_test_pair(stokes4, part4, w, rng)
        v = random_test_pair(stokes4, part4, w, rng)
        a, b = eval_form("primal", u, v), eval_form("dual", u, v)
        assert a == pytest.approx(b, rel=1e-11)


def test_form_rejects_mismatch(stokes4, part4, rng):
    u = random_test_pair(stokes4, part4, 0, rng)
    v = random_test_pair(stokes4, uniform_partition(1.0, 5), 0, rng)
    with pytest.raises(ValueError):
        eval_form("primal", u, v)
    with pytest.raises(ValueError):
        eval_form("sideways", u, u)


def test_discrete_equation_holds(vortex_solution, rng):
    sol = vortex_solution
    for _ in range(3):
        v = random_test_pair(sol.disc, sol.partition, sol.w, rng)
        lhs = eval_form("primal", sol, v)
        rhs = rhs_functional(sol, v)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
        # recomputing the loads from the problem gives the same functional
        assert rhs_functional(sol, v, VORTEX) == pytest.approx(rhs, rel=1e-13)


def test_constrained_form_on_divergence_free_tests(vortex_solution, rng):
    sol = vortex_solution
    v = random_test_pair(sol.disc, sol.partition, sol.w, rng, divergence_free=True)
    lhs = eval_form("primal", sol, v, constrained=True)
    scale = abs(lhs) + abs(eval_form("primal", sol, v))
    assert abs(lhs - rhs_functional(sol, v)) <= 1e-9 * scale


def test_galerkin_orthogonality(vortex_solution, rng):
    # B(u - u_h, v) = 0: the exact solution satisfies the discrete equations
    # up to quadrature error in the data
    sol = vortex_solution
    for _ in range(2):
        v = random_test_pair(sol.disc, sol.partition, sol.w, rng)
        res, scale = exact_residual(VORTEX, sol.disc, v)
        assert abs(res) <= 1e-7 * scale


def test_load_moments_of_constant_in_time(stokes4, part4):
    f = lambda t, x, y: VORTEX.f(0.0, x, y)
    F = load_moments(stokes4, f, part4, 1)
    np.testing.assert_allclose(F[:, 1], 0.0, atol=1e-13)
    np.testing.assert_allclose(F[0, 0], F[3, 0], rtol=1e-13)


def test_nonuniform_partition(stokes4):
    part = TimePartition(np.array([0.0, 0.1, 0.3, 0.6, 1.0]))
    sol = solve_stokes_dg(VORTEX, stokes4, part, 1)
    v = random_test_pair(stokes4, part, 1, np.random.default_rng(0))
    assert eval_form("primal", sol, v) == pytest.approx(rhs_functional(sol, v), rel=1e-9, abs=1e-9)
