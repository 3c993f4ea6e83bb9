import math

import numpy as np
import pytest

from matrix_hill import closedform as cf
from matrix_hill.lyapunov import trace_batch
from matrix_hill.potential import constant_potential, delta_comb_potential, fourier_potential, zero_potential
from matrix_hill.spectrum.asymptotics import (Cluster, asymptotic_residuals, pair_cluster, reconstruct_dminus,
                                              reconstruct_dplus, recovered_traces, spectral_cluster)
from matrix_hill.spectrum.bands import Gap, SpectralReport, band_properties, classify_gaps, scan_bands
from matrix_hill.spectrum.contour import (Circle, ContourError, DegenerateTargetError, Rect, count_zeros,
                                          counting_radius_dminus, counting_radius_dplus, counting_radius_rho,
                                          winding)
from matrix_hill.spectrum.roots import (Zero, antiperiodic_eigenvalues, complex_resonances, expand,
                                        periodic_eigenvalues, real_resonances)

SPLIT_A25 = (25.700025854571962173 - 0.15544682572086656135j, 25.700025854571962173 + 0.15544682572086656135j,
             43.246334723280179114, 43.625712042841751293)


def fourier():
    return fourier_potential(V1=[(0, -2.0, 0.0), (1, 1.0, 0.0)], V2=[(0, 2.0, 0.0), (1, 0.0, 0.5)],
                             V3=[(1, 0.7, 0.0), (2, 0.0, 0.3)])


# ---------------------------------------------------------------- contour


@pytest.mark.parametrize("N", [1, 3, 5])
def test_free_counts(N):
    P = zero_potential()
    assert count_zeros(P, "d_plus", Circle(0j, counting_radius_dplus(N))).count == 4 * N + 2
    assert count_zeros(P, "d_minus", Circle(0j, counting_radius_dminus(N))).count == 4 * N


def test_free_rho_is_degenerate():
    with pytest.raises(DegenerateTargetError):
        count_zeros(zero_potential(), "rho", Circle(0j, 50.0))


@pytest.mark.parametrize("N", [2, 4])
def test_constant_rho_count(N):
    assert count_zeros(constant_potential(3.0), "rho", Circle(0j, counting_radius_rho(N))).count == 2 * N


def test_winding_polynomial():
    def f(z):
        return (z - 1) * (z + 2j) ** 2, (z + 2j) ** 2 + 2 * (z - 1) * (z + 2j), np.ones(z.shape)

    assert winding(f, Circle(0j, 3.0)).count == 3
    assert winding(f, Rect(0.5, 1.5, -1, 1)).count == 1


def test_zero_on_contour_is_rejected():
    def f(z):
        return z - 1.0, np.ones(z.shape, dtype=complex), np.ones(z.shape)

    with pytest.raises(ContourError):
        winding(f, Circle(0j, 1.0), n0=64)


# ---------------------------------------------------------------- roots


def test_free_periodic_eigenvalues():
    zs = periodic_eigenvalues(zero_potential(), (-1.0, 200.0))
    assert [z.multiplicity for z in zs] == [2, 4, 4]
    np.testing.assert_allclose([z.value.real for z in zs], [0.0, 4 * math.pi ** 2, 16 * math.pi ** 2],
                               atol=1e-9)


def test_constant_eigenvalues():
    pe = periodic_eigenvalues(constant_potential(3.0), (-10.0, 200.0))
    ref = [(-3.0, 1), (3.0, 1), (4 * math.pi ** 2 - 3, 2), (4 * math.pi ** 2 + 3, 2),
           (16 * math.pi ** 2 - 3, 2), (16 * math.pi ** 2 + 3, 2)]
    assert [z.multiplicity for z in pe] == [m for _, m in ref]
    np.testing.assert_allclose([z.value.real for z in pe], [v for v, _ in ref], rtol=1e-9)
    ae = antiperiodic_eigenvalues(constant_potential(3.0), (-10.0, 100.0))
    ref = [math.pi ** 2 - 3, math.pi ** 2 + 3, 9 * math.pi ** 2 - 3, 9 * math.pi ** 2 + 3]
    np.testing.assert_allclose(expand(ae), np.repeat(ref, 2), rtol=1e-9)


def test_constant_real_resonances_are_double():
    zs = real_resonances(constant_potential(3.0), (0.0, 200.0))
    ref = [cf.constant_resonance(3.0, n) for n in (1, 2, 3, 4)]
    assert [z.multiplicity for z in zs] == [2] * 4
    np.testing.assert_allclose([z.value.real for z in zs], ref, rtol=1e-7)


def test_constant_complex_resonances():
    zs, total = complex_resonances(constant_potential(3.0), Rect(0.0, 400.0, -5.0, 5.0))
    ref = [cf.constant_resonance(3.0, n) for n in range(1, 7)]
    assert total == 12
    assert [z.multiplicity for z in zs] == [2] * 6
    np.testing.assert_allclose([z.value.real for z in zs], ref, rtol=1e-7)


def test_delta_complex_resonances_a25():
    zs, total = complex_resonances(delta_comb_potential(25.0, 0.2), Rect(0.0, 50.0, -10.0, 10.0))
    vals = sorted(expand(zs), key=lambda v: (complex(v).real, complex(v).imag))
    assert total == 4 and len(vals) == 4
    np.testing.assert_allclose(np.array(vals, dtype=complex), SPLIT_A25, rtol=1e-10)


def test_delta_real_resonances_match_closed_form():
    zs = expand(real_resonances(delta_comb_potential(3.0, 0.2), (0.0, 100.0)))
    ref = [v.real for n in (1, 2, 3) for v in cf.delta_resonance_split(3.0, 0.2, n)]
    np.testing.assert_allclose(sorted(zs), sorted(ref), rtol=1e-10)


# ---------------------------------------------------------------- bands


def test_free_bands():
    rep = classify_gaps(scan_bands(zero_potential(), (-1.0, 100.0)))
    assert len(rep.bands) == 1 and not rep.gaps
    assert rep.bands[0].lo == pytest.approx(0.0, abs=1e-9) and rep.bands[0].hi == 100.0


def test_constant_bands_have_no_gaps():
    rep = classify_gaps(scan_bands(constant_potential(3.0), (-20.0, 200.0)))
    assert len(rep.bands) == 1 and not rep.gaps
    assert rep.bands[0].lo == pytest.approx(-3.0, rel=1e-9)
    assert rep.exterior == [(-20.0, rep.bands[0].lo)]


def test_delta_gaps_classified():
    P = delta_comb_potential(10.0, 0.5)
    rep = classify_gaps(scan_bands(P, (-20.0, 150.0)))
    kinds = [g.kind for g in rep.gaps]
    assert kinds.count("resonance") == 3 and kinds.count("stable") >= 1
    assert not any(g.flagged for g in rep.gaps)
    # resonance-gap endpoints are the split resonances near z_n^0
    res_gaps = [g for g in rep.gaps if g.kind == "resonance"]
    for g, n in zip(res_gaps, (1, 2, 3)):
        z0 = cf.constant_resonance(math.sqrt(10.0 ** 2 + 0.5 ** 2), n)
        assert g.lo < z0 + 1.0 and g.hi > z0 - 1.0


def test_band_edges_are_zeros():
    P = fourier()
    rep = scan_bands(P, (-20.0, 150.0))
    ends = [v for z in rep.periodic_eigs + rep.antiperiodic_eigs + rep.resonances for v in [z.value.real]]
    for b in rep.bands:
        for e in (b.lo, b.hi):
            if e in rep.window:
                continue
            assert min(abs(e - v) for v in ends) <= 1e-9 * max(1, abs(e))


@pytest.mark.parametrize("P", [zero_potential(), constant_potential(3.0), delta_comb_potential(10.0, 0.5)])
def test_band_properties(P):
    rep = scan_bands(P, (-20.0, 120.0))
    min_rho, monotone, runs = band_properties(P, rep)
    assert min_rho >= -1e-8 and monotone and runs > 0


def test_ambiguous_endpoint_is_flagged():
    rep = SpectralReport((0.0, 10.0), gaps=[Gap(2.0, 3.0), Gap(5.0, 6.0)],
                         periodic_eigs=[Zero(2.0 + 0j), Zero(5.0 + 0j)],
                         resonances=[Zero(3.0 + 0j), Zero(5.0 + 0j)])
    classify_gaps(rep)
    assert rep.gaps[0].kind == "mixed" and not rep.gaps[0].flagged
    assert rep.gaps[1].flagged and rep.gaps[1].lo_source == "ambiguous"


# ---------------------------------------------------------------- asymptotics


def test_constant_cluster_residuals():
    a = 3.0
    P = constant_potential(a)
    clusters = [spectral_cluster(P, n) for n in (1, 2, 3)]
    assert all(c.complete for c in clusters)
    r = asymptotic_residuals(P, clusters)
    assert not r.ambiguous and not r.incomplete
    assert np.max(np.abs(np.array(r.eig))) < 1e-8
    for n, res in zip(r.n, r.res):
        np.testing.assert_allclose(np.real(res), [a * a / (2 * math.pi * n) ** 2] * 2, rtol=1e-6)


def test_pairing_flags_crossing():
    c = math.pi ** 2
    _, amb = pair_cluster([c - 1, c - 0.9, c + 0.95, c + 1.1], 1, -1.0, 1.0)
    assert not amb
    _, amb = pair_cluster([c - 1, c + 0.9, c + 0.95, c + 1.1], 1, -1.0, 1.0)
    assert amb


def test_incomplete_cluster_reported():
    r = asymptotic_residuals(constant_potential(3.0), [Cluster(1, [1.0], [], 4, 2)])
    assert r.incomplete == [1]


def _free_eigs(N):
    per = [0.0, 0.0] + [(2 * math.pi * n) ** 2 for n in range(1, N + 1) for _ in range(4)]
    anti = [(math.pi * (2 * n - 1)) ** 2 for n in range(1, N + 1) for _ in range(4)]
    return per, anti


@pytest.mark.parametrize("N", [2, 20])
def test_free_reconstruction(N):
    per, anti = _free_eigs(N)
    lam = np.linspace(-50, 50, 201)
    dp = reconstruct_dplus(per, N)(lam)
    ref = 4 * np.sin(np.sqrt(lam + 0j) / 2) ** 4
    np.testing.assert_allclose(dp, ref, rtol=1e-11, atol=1e-12)
    dm = reconstruct_dminus(anti, N)(lam)
    np.testing.assert_allclose(dm, 4 * np.cos(np.sqrt(lam + 0j) / 2) ** 4, rtol=1e-11, atol=1e-12)


def test_constant_reconstruction_and_recovered_traces():
    a, N = 3.0, 40
    per = sorted([-a, a] + [(2 * math.pi * n) ** 2 + s * a for n in range(1, N + 1) for s in (-1, 1) for _ in (0, 1)])
    anti = sorted((math.pi * (2 * n - 1)) ** 2 + s * a for n in range(1, N + 1) for s in (-1, 1) for _ in (0, 1))
    dp, dm = reconstruct_dplus(per, N), reconstruct_dminus(anti, N)
    lam = np.linspace(0, 50, 101)
    mu1, mu2, rho, d_plus, d_minus = cf.ConstantModel(a).traces(lam)
    assert np.max(np.abs(dp(lam) - d_plus) / np.maximum(1, np.abs(d_plus))) < 1e-3
    assert np.max(np.abs(dm(lam) - d_minus) / np.maximum(1, np.abs(d_minus))) < 1e-3
    mu1_r, rho_r = recovered_traces(dp, dm, lam)
    assert np.max(np.abs(mu1_r - mu1)) < 1e-3
    assert np.max(np.abs(rho_r - rho)) < 1e-3


def test_reconstruction_needs_enough_eigenvalues():
    with pytest.raises(ValueError):
        reconstruct_dplus([0.0, 1.0, 2.0], 1)


def test_lyapunov_traces_consistent_with_reconstruction_identity():
    tb = trace_batch(fourier(), np.array([3.0, 17.0]))
    np.testing.assert_allclose((tb.d_minus - tb.d_plus) / 4, tb.mu1, rtol=1e-12)
