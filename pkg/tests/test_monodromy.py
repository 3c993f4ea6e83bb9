import math

import numpy as np
import pytest

from matrix_hill.monodromy import (PropagationError, PropagatorConfig, i_m0, monodromy, propagate,
                                   series_bound, series_deviation, series_sum, series_term,
                                   trace_bound, trace_expansion)
from matrix_hill.potential import constant_potential, delta_comb_potential, fourier_potential, zero_potential

I2 = np.eye(2)

# Tr M/4 and Tr M^2/4 from a 30-digit Taylor ODE solver (mpmath.odefun), V3 = cos 2 pi x only
V3_ORACLE = {
    4.0: (-0.42098768105717021739, -0.64553874479621264903),
    30.0: (0.69201023880808105497, -0.042243658769565258011),
    10 + 5j: (-1.3045446763019723465 + 0.096296327748102919835j,
              2.3851276594600955071 - 0.50249144684487024487j),
}
# I_1 = 2 a^2 int_0^1 int_0^t cos(sqrt(lam)(1 - 2t + 2s)) ds dt for a = 3 (mpmath.quad)
I1_ORACLE = {30.0: -1.1855381012558210624, 10 + 5j: -0.90565891701985796469 - 2.1112154524593264793j}


def v3_potential():
    return fourier_potential(V3=[(1, 1.0, 0.0)])


def test_free_at_pi_squared():
    M = propagate(zero_potential(), math.pi ** 2).entries
    np.testing.assert_allclose(M, -np.eye(4), atol=1e-15)


def test_free_at_zero():
    S = propagate(zero_potential(), 0.0)
    np.testing.assert_allclose(S.entries, np.block([[I2, I2], [0 * I2, I2]]), atol=1e-15)


def test_block_accessors():
    S = propagate(constant_potential(3.0), 7.0 + 1j, 0.4)
    np.testing.assert_array_equal(S.theta, S.entries[:2, :2])
    np.testing.assert_array_equal(S.phi, S.entries[:2, 2:])
    np.testing.assert_array_equal(S.dtheta, S.entries[2:, :2])
    np.testing.assert_array_equal(S.dphi, S.entries[2:, 2:])


@pytest.mark.parametrize("lam", list(V3_ORACLE))
def test_v3_traces_against_ode_oracle(lam):
    M = propagate(v3_potential(), lam).entries
    mu1, mu2 = np.trace(M) / 4, np.trace(M @ M) / 4
    ref1, ref2 = V3_ORACLE[lam]
    assert abs(mu1 - ref1) <= 1e-12 * max(1, abs(ref1))
    assert abs(mu2 - ref2) <= 1e-12 * max(1, abs(ref2))


def test_v3_against_series_oracle():
    P, lam = v3_potential(), 4.0 + 0j
    N = next(n for n in range(60) if series_bound(P, lam, 1.0, n) < 1e-12)
    M = propagate(P, lam).entries
    assert series_deviation(M, series_sum(P, lam, 1.0, N), lam) < 1e-11


@pytest.mark.parametrize("P", [constant_potential(3.0), delta_comb_potential(10.0, 0.5),
                               fourier_potential(V1=[(1, 1.0, 0.0)], V3=[(2, 0.0, 0.4)])])
@pytest.mark.parametrize("x", [0.37, 1.0, 2.5])
def test_unit_determinant(P, x):
    M = propagate(P, 20.0 + 3j, x).entries
    cond = max(1.0, np.linalg.norm(M, 2) ** 2)
    assert abs(np.linalg.det(M) - 1) / cond < 1e-12


def test_symplectic_structure():
    J = np.block([[0 * I2, I2], [-I2, 0 * I2]])
    M = propagate(fourier_potential(V1=[(1, 1.0, 0.0)], V3=[(1, 0.5, 0.2)]), 45.0).entries
    np.testing.assert_allclose(M.T @ J @ M, J, atol=1e-12)


def test_derivative_matches_difference():
    P = fourier_potential(V1=[(1, 1.0, 0.0)], V3=[(1, 0.5, 0.2)])
    lam, h = 17.0 + 2j, 1e-5
    dM = monodromy(P, [lam], derivative=True).dM[0]
    fd = (monodromy(P, [lam + h]).M[0] - monodromy(P, [lam - h]).M[0]) / (2 * h)
    np.testing.assert_allclose(dM, fd, rtol=1e-7, atol=1e-8)


def test_step_budget_exceeded():
    P = fourier_potential(V1=[(3, 5.0, 0.0)])
    with pytest.raises(PropagationError):
        monodromy(P, [4000.0], config=PropagatorConfig(base_steps=4, max_steps=8, tol=1e-14))


def test_series_zeroth_term():
    lam, x = 5.0 + 1j, 0.6
    t = series_term(fourier_potential(V1=[(1, 1.0, 0.0)]), lam, x, 0)
    z = np.sqrt(lam)
    np.testing.assert_allclose(t.theta_n, np.cos(z * x) * I2, rtol=1e-14)
    np.testing.assert_allclose(t.phi_n, np.sin(z * x) / z * I2, rtol=1e-14)


def test_series_free_higher_terms_vanish():
    for n in (1, 2, 3):
        t = series_term(zero_potential(), 9.0, 1.0, n)
        assert np.all(t.theta_n == 0) and np.all(t.phi_n == 0)


def test_series_bound_examples():
    assert series_bound(1.0, 1.0, 1.0, -1) == pytest.approx(math.e, rel=1e-15)
    assert series_bound(zero_potential(), 50.0, 1.0, 0) == 0.0
    with pytest.raises(ValueError):
        series_bound(1.0, 1.0, 1.0, -2)


def test_trace_expansion_order_zero():
    P = constant_potential(3.0)
    for m in (1, 2):
        assert trace_expansion(P, 30.0, m, 0) == pytest.approx(math.cos(m * math.sqrt(30.0)), rel=1e-15)


@pytest.mark.parametrize("lam", list(I1_ORACLE))
def test_constant_double_integral(lam):
    assert i_m0(constant_potential(3.0), lam, 1) == pytest.approx(I1_ORACLE[lam], rel=1e-12)


@pytest.mark.parametrize("order", [0, 1, 2])
@pytest.mark.parametrize("m", [1, 2])
def test_trace_expansion_within_bound(order, m):
    P = fourier_potential(V1=[(0, 0.5, 0.0), (1, 1.0, 0.0)], V3=[(1, 0.5, 0.2)])
    lam = 60.0 + 4j
    M = propagate(P, lam).entries
    exact = np.trace(np.linalg.matrix_power(M, m)) / 4
    err = abs(trace_expansion(P, lam, m, order) - exact)
    assert err <= trace_bound(P, lam, m, order)
