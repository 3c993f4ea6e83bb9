import math

import numpy as np
import pytest

from matrix_hill import closedform as cf
from matrix_hill.lyapunov import trace_batch
from matrix_hill.monodromy import monodromy
from matrix_hill.potential import constant_potential, delta_comb_potential

# zeros of (c+ - c-)^2/4 + gamma^2/4 s+ s- near z_n^0 (mpmath.findroot, 30 digits)
SPLIT_ORACLE = {
    (3.0, 1): (9.8993192984470213931, 10.293817370373240212),
    (3.0, 2): (39.335745108025724233, 39.734572070277067054),
    (25.0, 1): (25.700025854571962173 - 0.15544682572086656135j, 25.700025854571962173 + 0.15544682572086656135j),
    (25.0, 2): (43.246334723280179114, 43.625712042841751293),
}


def test_constant_free_limit():
    for lam in (2.0, -7.0, 30 + 4j):
        L = cf.constant_lyapunov(0.0, lam)
        c = np.cos(np.sqrt(complex(lam)))
        assert L.delta1 == pytest.approx(c, rel=1e-14) and L.delta2 == pytest.approx(c, rel=1e-14)
        assert L.rho == 0


def test_constant_at_lambda_equal_a():
    L = cf.constant_lyapunov(3.0, 3.0)
    assert L.delta1 == pytest.approx(1.0, abs=1e-15)


def test_constant_at_first_resonance():
    z1 = cf.constant_resonance(3.0, 1)
    assert z1 == pytest.approx(10.097577064284618605, rel=1e-15)
    m = cf.ConstantModel(3.0)
    assert m.c(z1, 1.0, +1) == pytest.approx(m.c(z1, 1.0, -1), abs=1e-14)
    assert abs(cf.constant_lyapunov(3.0, z1).rho) < 1e-28


def test_constant_monodromy_matches_engine():
    P = constant_potential(3.0)
    U = np.kron(np.eye(2), P.rotation)
    for lam in (5.0, -40.0, 100 + 10j):
        M = U @ monodromy(P, [lam]).M[0] @ U.T
        np.testing.assert_allclose(M, cf.ConstantModel(3.0).monodromy(lam), rtol=1e-13, atol=1e-13)


def test_resonance_index():
    assert cf.resonance_index(3.0) == 0
    assert cf.resonance_index(25.0) == 1
    with pytest.raises(ValueError):
        cf.resonance_index(2 * math.pi ** 2)


def test_constant_resonances_ordering():
    r3 = cf.constant_resonances(3.0, 6)
    z = [v for _, v in r3.resonances]
    assert r3.n_a == 0 and all(x < y for x, y in zip(z, z[1:]))
    r50 = cf.constant_resonances(50.0, 6)
    z = [v for _, v in r50.resonances]
    assert r50.n_a == 2 and z[0] > z[1] and all(x < y for x, y in zip(z[2:], z[3:]))


def test_constant_eigenvalues_are_zeros_of_dpm():
    a = 3.0
    assert cf.constant_eigenvalue(a, 1, 0) == a
    assert cf.constant_eigenvalue(a, 2, 0) == -a
    P = constant_potential(a)
    for n in range(0, 5):
        for m in (1, 2):
            lam = cf.constant_eigenvalue(a, m, n)
            tb = trace_batch(P, [lam])
            d = tb.d_plus[0] if n % 2 == 0 else tb.d_minus[0]
            assert abs(d) <= 1e-12 * tb.scale[0]


def test_delta_reduces_to_constant():
    for lam in (3.0, 50 - 2j):
        D, C = cf.delta_lyapunov(3.0, 0.0, lam), cf.constant_lyapunov(3.0, lam)
        for f in ("mu1", "mu2", "rho", "d_plus", "d_minus"):
            assert getattr(D, f) == pytest.approx(getattr(C, f), rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("lam", [7.0, 40 + 3j, -15.0])
def test_delta_trace_identities(lam):
    a, g = 10.0, 0.5
    D, C = cf.delta_lyapunov(a, g, lam), cf.constant_lyapunov(a, lam)
    h = cf.DeltaModel(a, g).h(lam)
    assert D.rho - C.rho == pytest.approx(h, rel=1e-12, abs=1e-14)
    assert D.mu2 - C.mu2 == pytest.approx(2 * h, rel=1e-12, abs=1e-14)
    assert D.d_plus - D.d_minus == pytest.approx(-4 * C.mu1, rel=1e-12, abs=1e-14)


def test_delta_monodromy_matches_engine():
    P = delta_comb_potential(10.0, 0.5)
    for lam in (12.0, 80 + 5j):
        M = monodromy(P, [lam]).M[0]
        Mc = cf.DeltaModel(10.0, 0.5).monodromy(lam)
        # traces are basis independent
        assert np.trace(M) == pytest.approx(np.trace(Mc), rel=1e-13)
        assert np.trace(M @ M) == pytest.approx(np.trace(Mc @ Mc), rel=1e-13)


def test_jump_matrix():
    T = cf.jump_matrix(0.5)
    np.testing.assert_array_equal(T[:2, :2], np.eye(2))
    np.testing.assert_array_equal(T[2:, 2:], np.eye(2))
    np.testing.assert_array_equal(T[:2, 2:], np.zeros((2, 2)))
    np.testing.assert_array_equal(T[2:, :2], [[0, 0.5], [0.5, 0]])


@pytest.mark.parametrize("key", list(SPLIT_ORACLE))
def test_split_against_oracle(key):
    a, n = key
    lo, hi = cf.delta_resonance_split(a, 0.2, n)
    ref_lo, ref_hi = SPLIT_ORACLE[key]
    assert lo == pytest.approx(ref_lo, rel=1e-12)
    assert hi == pytest.approx(ref_hi, rel=1e-12)


def test_split_pattern():
    lo, hi = cf.delta_resonance_split(3.0, 0.2, 3)
    assert lo.imag == 0 and hi.imag == 0 and lo.real < cf.constant_resonance(3.0, 3) < hi.real
    lo, hi = cf.delta_resonance_split(25.0, 0.2, 1)
    assert lo.imag < 0 < hi.imag and hi == lo.conjugate()


@pytest.mark.parametrize("a,n", [(3.0, 1), (3.0, 2), (25.0, 1), (25.0, 3)])
def test_split_linear_in_gamma(a, n):
    gammas = np.array([1e-2, 5e-3, 2.5e-3])
    widths = [abs(np.subtract(*cf.delta_resonance_split(a, g, n))) for g in gammas]
    slope = np.polyfit(np.log(gammas), np.log(widths), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.02)


def test_smoothed_family_document():
    P = cf.smoothed_delta_family(10.0, 0.5, 0.1)
    assert len(P.rotated_spec.bumps) == 1 and not P.deltas
    with pytest.raises(Exception):
        cf.smoothed_delta_family(10.0, 0.5, 0.9)
