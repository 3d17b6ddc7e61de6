import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokes_dg_lab.timegrid import (
    SpaceTimeCoefficients,
    TimePartition,
    basis_norms,
    basis_values,
    derivative_matrix,
    from_function,
    inverse_holder_constant,
    inverse_holder_ratio,
    l2_norm_squared,
    p_tau,
    pi_tau,
    time_quadrature,
    traces_and_jumps,
    uniform_partition,
)
from stokes_dg_lab.quadrature import gauss_legendre_unit


def test_uniform_partition():
    p = uniform_partition(1.0, 4)
    assert np.allclose(p.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    assert p.step_ratio() == 1.0
    assert p.tau == p.tau_min == 0.25
    assert p.M == 4 and p.T == 1.0


@pytest.mark.parametrize("M", [0, -2, 1.5])
def test_uniform_partition_rejects(M):
    with pytest.raises(ValueError):
        uniform_partition(1.0, M)


def test_partition_rejects_bad_nodes():
    with pytest.raises(ValueError):
        TimePartition(np.array([0.0, 0.5, 0.4]))
    with pytest.raises(ValueError):
        TimePartition(np.array([0.1, 0.5]))


def test_partition_check_reports_without_raising():
    p = TimePartition(np.array([0.0, 0.1, 0.5, 1.0]), kappa=2.0)
    rep = p.check(C=0.5, beta=1.0)
    assert rep["step_ratio"] == pytest.approx(4.0)
    assert not rep["step_ratio_ok"]
    assert not rep["tau_le_T_over_4"]
    assert not rep["tau_min_ok"]
    assert uniform_partition(1.0, 8).check()["tau_le_T_over_4"]


def test_basis_orthogonality():
    s, w = gauss_legendre_unit(4)
    phi = basis_values(1, s)
    G = np.einsum("q,iq,jq->ij", w, phi, phi)
    assert np.allclose(G, np.diag(basis_norms(1)), atol=1e-14)


def test_derivative_matrix():
    assert np.allclose(derivative_matrix(0), [[0.0]])
    assert np.allclose(derivative_matrix(1), [[0.0, 2.0], [0.0, 0.0]], atol=1e-14)


def test_pi_tau_examples():
    p = uniform_partition(1.0, 1)
    c0 = pi_tau(lambda t: t, p, 0)
    assert c0.coef[0, 0] == pytest.approx(1.0, abs=1e-15)
    c1 = pi_tau(lambda t: t**2, p, 1)
    # -1/3 + 4/3 t in the Legendre basis: mean 1/3, slope coefficient 2/3
    for t in np.linspace(0.01, 1, 9):
        assert c1(t) == pytest.approx(-1 / 3 + 4 / 3 * t, abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(1, 6), st.sampled_from([0, 1]))
def test_projections_reproduce_their_range(a, b, M, w):
    p = uniform_partition(2.0, M)
    if w == 0:
        # piecewise constant: value a on every interval
        v = lambda t: a + 0 * t  # noqa: E731
    else:
        v = lambda t: a + b * t  # noqa: E731
    for proj in (pi_tau, p_tau):
        c = proj(v, p, w)
        for t in np.linspace(0.05, 2.0, 7):
            assert c(t) == pytest.approx(v(t), abs=1e-12)


def test_p_tau_examples():
    p = uniform_partition(1.0, 1)
    assert p_tau(lambda t: t, p, 0).coef[0, 0] == pytest.approx(0.5, abs=1e-15)
    assert p_tau(lambda t: np.sin(2 * np.pi * t), p, 0).coef[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_p_tau_idempotent_and_contracting(rng):
    p = uniform_partition(1.0, 5)
    v = lambda t: np.array([np.sin(3 * t), np.exp(t)])  # noqa: E731
    c = p_tau(v, p, 1)
    cc = p_tau(c, p, 1)
    assert np.allclose(cc.coef, c.coef, atol=1e-13)
    s, t, wt = time_quadrature(p, 10)
    exact = sum(wt[m, k] * np.sum(v(t[m, k]) ** 2) for m in range(5) for k in range(10))
    assert l2_norm_squared(c) <= exact


def test_jumps():
    p = uniform_partition(1.0, 2)
    c = SpaceTimeCoefficients(p, 0, np.array([[1.0], [3.0]]))
    tj = traces_and_jumps(c)
    assert tj[1]["jump"] == pytest.approx(2.0)
    assert tj[0]["left"] is None and tj[0]["right"] == 1.0
    assert tj[2]["right"] is None
    # continuous polynomial injected into the dG(1) space has no jumps
    cont = from_function(lambda t: 2 * t - 1, uniform_partition(1.0, 5), 1)
    assert all(abs(j["jump"]) < 1e-13 for j in traces_and_jumps(cont)[1:-1])


def test_time_quadrature_examples():
    p = uniform_partition(1.0, 1)
    s, t, w = time_quadrature(p, 1)
    assert s[0] == pytest.approx(0.5) and w[0, 0] == pytest.approx(1.0)
    s, t, w = time_quadrature(p, 2)
    assert w[0] @ t[0] ** 3 == pytest.approx(0.25, abs=1e-15)
    s, t, w = time_quadrature(p, 5)
    assert w[0] @ np.exp(t[0]) == pytest.approx(np.e - 1, abs=1e-10)


@pytest.mark.parametrize("w,order", [(0, 1.0), (1, 2.0)])
def test_pi_tau_approximation_order(w, order):
    errs = []
    for M in (8, 16):
        p = uniform_partition(1.0, M)
        c = pi_tau(np.sin, p, w)
        s, t, wt = time_quadrature(p, 8)
        errs.append(np.sqrt(sum(wt[m, k] * (c(t[m, k]) - np.sin(t[m, k])) ** 2
                                for m in range(M) for k in range(8))))
    assert np.log2(errs[0] / errs[1]) >= order - 0.05


def test_inverse_holder_w0_sharp():
    assert inverse_holder_constant(0) == pytest.approx(2.0, abs=1e-13)
    p = uniform_partition(3.0, 7)
    assert inverse_holder_ratio(0, [4.2], p, 3) == pytest.approx(2.0, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.01, 5.0))
def test_inverse_holder_w1(coef, tau):
    if np.allclose(coef, 0):
        return
    part = TimePartition(np.array([0.0, tau]))
    ratio = inverse_holder_ratio(1, coef, part)
    assert ratio <= 6.0
    assert ratio <= inverse_holder_constant(1) * (1 + 1e-12)


def test_inverse_holder_w1_constant_value():
    # Gram matrices diag(1, 1/3) and [[1/2, 1/6], [1/6, 1/6]] give lam^2 - 6 lam + 6 = 0
    assert inverse_holder_constant(1) == pytest.approx(3 + np.sqrt(3), rel=1e-12)


def test_coefficients_shape_validated():
    with pytest.raises(ValueError):
        SpaceTimeCoefficients(uniform_partition(1.0, 3), 1, np.zeros((3, 1)))
    with pytest.raises(ValueError):
        SpaceTimeCoefficients(uniform_partition(1.0, 3), 2, np.zeros((3, 3)))
