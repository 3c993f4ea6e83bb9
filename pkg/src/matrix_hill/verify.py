"""Built-in verification suites.

Each suite returns a :class:`CheckResult` with the measured error, the
tolerance it is held to and the runtime.  Complex-lambda comparisons are
relative to the natural magnitude of the compared quantity: ``max(1, |mu_1|)``
for first-order traces and ``max(1, |mu_1|^2, |mu_2|)`` for quadratic ones,
since those grow like ``exp(|Im sqrt(lam)|)`` and its square.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import closedform as cf
from .lyapunov import lyapunov_at, quartic_residual, trace_batch
from .monodromy import monodromy, propagate, series_bound, series_deviation, series_sum
from .potential import constant_potential, delta_comb_potential, fourier_potential, zero_potential
from .spectrum.asymptotics import asymptotic_residuals, reconstruction_report, spectral_cluster
from .spectrum.bands import band_properties, classify_gaps, scan_bands
from .spectrum.contour import (Circle, Rect, count_zeros, counting_radius_dminus,
                               counting_radius_dplus, counting_radius_rho)
from .spectrum.roots import complex_resonances, expand

SEED = 20240611


@dataclass
class CheckResult:
    name: str
    criterion: int
    passed: bool
    measured: dict
    tolerance: dict
    seconds: float = 0.0
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{tag}] criterion {self.criterion:>2} {self.name}: {meas} ({self.seconds:.1f} s)"

    def to_dict(self):
        return {"name": self.name, "criterion": self.criterion, "passed": self.passed,
                "measured": self.measured, "tolerance": self.tolerance,
                "seconds": self.seconds, "detail": self.detail}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    return str(v)


# --------------------------------------------------------------------------
# test potentials


def smooth_test_potential():
    """Finite Fourier potential with ``V10 = -2 != V20 = 2`` and a non-diagonal part."""
    return fourier_potential(V1=[(0, -2.0, 0.0), (1, 1.0, 0.0)],
                             V2=[(0, 2.0, 0.0), (1, 0.0, 0.5)],
                             V3=[(1, 0.7, 0.0), (2, 0.0, 0.3)])


def small_tracefree_potential():
    """Small smooth trace-free perturbation of zero."""
    return fourier_potential(V1=[(1, 0.3, 0.0)], V2=[(1, -0.3, 0.0)], V3=[(1, 0.0, 0.2)])


def test_potentials():
    return {
        "free": zero_potential(),
        "constant_a3": constant_potential(3.0),
        "delta_a10_g05": delta_comb_potential(10.0, 0.5),
        "fourier": smooth_test_potential(),
    }


def random_disc(n, radius, rng, rmin=0.0):
    """``n`` points uniformly distributed in the annulus ``rmin <= |lam| <= radius``."""
    r = np.sqrt(rng.uniform(rmin ** 2, radius ** 2, n))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def _scales(mu1, mu2):
    s1 = np.maximum(1.0, np.abs(mu1))
    return s1, np.maximum(s1 ** 2, np.abs(mu2))


def _timed(fn):
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t
        if "max_seconds" in res.tolerance:
            res.passed = res.passed and res.seconds < res.tolerance["max_seconds"]
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# --------------------------------------------------------------------------
# suites


@_timed
def check_free(tol=1e-11):
    """Free operator: ``Delta_1 = Delta_2 = cos sqrt(lam)`` and ``rho = 0``."""
    rng = np.random.default_rng(SEED)
    lams = np.concatenate([np.linspace(-10, 400, 400) + 0j, random_disc(100, 400, rng)])
    P = zero_potential()
    err_d, err_r = 0.0, 0.0
    for lam in lams:
        L = lyapunov_at(P, lam)
        c = np.cos(np.sqrt(complex(lam)))
        s = max(1.0, abs(c))
        err_d = max(err_d, abs(L.delta1 - c) / s, abs(L.delta2 - c) / s)
        err_r = max(err_r, abs(L.rho) / s ** 2)
    ok = err_d <= tol and err_r <= tol
    return CheckResult("free-operator exactness", 1, ok, {"delta_err": err_d, "rho_err": err_r},
                       {"rel": tol, "max_seconds": 5.0})


@_timed
def check_constant(a=3.0, tol=1e-9, n=200):
    """Constant model ``aJ``: monodromy and Lyapunov data against the closed forms."""
    rng = np.random.default_rng(SEED + 1)
    lams = random_disc(n, 400, rng)
    P = constant_potential(a)
    model = cf.ConstantModel(a)
    res = monodromy(P, lams)
    U = np.kron(np.eye(2), P.rotation)
    err = {"M": 0.0, "mu1": 0.0, "mu2": 0.0, "rho": 0.0, "d_pm": 0.0, "delta": 0.0}
    for k, lam in enumerate(lams):
        M = U @ res.M[k] @ U.T
        Mc = model.monodromy(lam)
        err["M"] = max(err["M"], np.abs(M - Mc).max() / max(1.0, np.abs(Mc).max()))
        L = lyapunov_at(P, lam)
        C = cf.constant_lyapunov(a, lam)
        s1, s2 = max(1.0, abs(C.mu1)), max(1.0, abs(C.mu1) ** 2, abs(C.mu2))
        err["mu1"] = max(err["mu1"], abs(L.mu1 - C.mu1) / s1)
        err["mu2"] = max(err["mu2"], abs(L.mu2 - C.mu2) / s2)
        err["rho"] = max(err["rho"], abs(L.rho - C.rho) / s2)
        err["d_pm"] = max(err["d_pm"], abs(L.d_plus - C.d_plus) / s2, abs(L.d_minus - C.d_minus) / s2)
        # the two branch values as an unordered pair
        pair = min(abs(L.delta1 - C.delta1) + abs(L.delta2 - C.delta2),
                   abs(L.delta1 - C.delta2) + abs(L.delta2 - C.delta1))
        err["delta"] = max(err["delta"], pair / s1)
    ok = all(v <= tol for v in err.values())
    return CheckResult("constant-model oracle", 2, ok, err, {"rel": tol, "max_seconds": 10.0})


@_timed
def check_delta(a=10.0, gamma=0.5, tol=1e-9, n=200):
    """Delta comb with exact jumps against the closed-form trace identities."""
    rng = np.random.default_rng(SEED + 2)
    lams = random_disc(n, 400, rng)
    P = delta_comb_potential(a, gamma)
    tb = trace_batch(P, lams)
    mu1, mu2, rho, dp, dm = cf.DeltaModel(a, gamma).traces(lams)
    s1, s2 = _scales(mu1, mu2)
    err = {
        "mu1": float(np.max(np.abs(tb.mu1 - mu1) / s1)),
        "mu2": float(np.max(np.abs(tb.mu2 - mu2) / s2)),
        "rho": float(np.max(np.abs(tb.rho - rho) / s2)),
        "d_plus": float(np.max(np.abs(tb.d_plus - dp) / s2)),
        "d_minus": float(np.max(np.abs(tb.d_minus - dm) / s2)),
    }
    ok = all(v <= tol for v in err.values())
    return CheckResult("delta-comb oracle", 3, ok, err, {"rel": tol})


def smoothed_lambda_set(radius=120.0):
    """Real grid on ``[-radius, radius]`` plus polar rings inside ``|lam| <= radius``."""
    real = np.linspace(-radius, radius, 241) + 0j
    rings = [r * np.exp(2j * np.pi * np.arange(32) / 32) for r in (0.25, 0.5, 0.75, 1.0)]
    return np.concatenate([real, radius * np.concatenate(rings)])


@_timed
def check_smoothed(a=10.0, gamma=0.5, nus=(0.1, 0.05, 0.025), tol=1e-3):
    """Smoothed delta family converges to the delta comb as ``nu -> 0``."""
    lams = smoothed_lambda_set()
    mu1, mu2, rho, _, _ = cf.DeltaModel(a, gamma).traces(lams)
    _, s2 = _scales(mu1, mu2)
    sups = []
    for nu in nus:
        tb = trace_batch(cf.smoothed_delta_family(a, gamma, nu), lams)
        sups.append(float(np.max(np.abs(tb.rho - rho) / s2)))
    decreasing = all(x > y for x, y in zip(sups[:-1], sups[1:]))
    ok = decreasing and sups[-1] <= tol
    meas = {f"nu={nu}": s for nu, s in zip(nus, sups)}
    meas["decreasing"] = decreasing
    return CheckResult("smoothed-delta convergence", 4, ok, meas, {"rel": tol, "max_seconds": 60.0})


@_timed
def check_counting(N=6, a=3.0):
    """Argument-principle counts: ``2N`` zeros of rho, ``4N+2`` of ``D_+``, ``4N`` of ``D_-``."""
    rho = count_zeros(constant_potential(a), "rho", Circle(0j, counting_radius_rho(N)))
    Q = small_tracefree_potential()
    dp = count_zeros(Q, "d_plus", Circle(0j, counting_radius_dplus(N)))
    dm = count_zeros(Q, "d_minus", Circle(0j, counting_radius_dminus(N)))
    meas = {"rho": rho.count, "d_plus": dp.count, "d_minus": dm.count,
            "max_residue": max(rho.residue, dp.residue, dm.residue)}
    ok = (rho.count == 2 * N and dp.count == 4 * N + 2 and dm.count == 4 * N
          and meas["max_residue"] < 0.05)
    return CheckResult("counting lemmas", 5, ok, meas,
                       {"rho": 2 * N, "d_plus": 4 * N + 2, "d_minus": 4 * N, "residue": 0.05})


def _split_pairs(a, gamma, n_max, re_max=120.0, im=10.0):
    """Engine zeros of rho grouped around each ``z_n^0`` (``n <= n_max``)."""
    zs, _ = complex_resonances(delta_comb_potential(a, gamma), Rect(0.0, re_max, -im, im))
    vals = expand(zs)
    out = {}
    for n in range(1, n_max + 1):
        z0 = cf.constant_resonance(a, n)
        near = sorted((complex(v) for v in vals if abs(complex(v) - z0) < 0.5 * math.pi ** 2),
                      key=lambda v: (v.real, v.imag))
        out[n] = near
    return out


@_timed
def check_splitting(gammas=(0.2, 0.1, 0.05)):
    """Resonance splitting pattern and linear scaling of the split width."""
    meas, ok = {}, True
    pattern, slopes = {}, []
    for a in (3.0, 25.0):
        n_a = cf.resonance_index(a)
        split = {g: _split_pairs(a, g, 3) for g in gammas}
        for n, zs in split[gammas[0]].items():
            if len(zs) != 2:
                ok = False
                pattern[f"a={a:g},n={n}"] = f"{len(zs)} zeros"
                continue
            lo, hi = zs
            if n <= n_a:
                good = abs(lo.imag) > 0 and abs(hi - lo.conjugate()) <= 1e-8 * abs(hi)
                pattern[f"a={a:g},n={n}"] = "conjugate" if good else "not conjugate"
            else:
                good = lo.imag == 0 and hi.imag == 0 and lo.real < hi.real
                pattern[f"a={a:g},n={n}"] = "real" if good else "not real"
            ok &= good
        for n in (1, 2, 3):
            widths = [abs(split[g][n][1] - split[g][n][0]) if len(split[g][n]) == 2 else float("nan")
                      for g in gammas]
            slopes.append(float(np.polyfit(np.log(gammas), np.log(widths), 1)[0]))
    meas["min_slope"], meas["max_slope"] = min(slopes), max(slopes)
    ok &= all(abs(s - 1.0) <= 0.1 for s in slopes)
    meas["pattern"] = pattern
    return CheckResult("resonance splitting", 6, bool(ok), meas, {"slope": "1.0 +- 0.1"})


@_timed
def check_identities(n=100, tol=1e-9, tol_quartic=1e-8):
    """Algebraic identities of the traces, branch values, determinant and multipliers."""
    rng = np.random.default_rng(SEED + 3)
    worst = {"d_diff": 0.0, "sum_sq": 0.0, "product": 0.0, "det": 0.0, "quartic": 0.0}
    for name, P in test_potentials().items():
        lams = random_disc(n, 400, rng)
        res = monodromy(P, lams)
        for k, lam in enumerate(lams):
            L = lyapunov_at(P, lam)
            s2 = L.scale
            worst["d_diff"] = max(worst["d_diff"], abs(L.d_plus - L.d_minus + 4 * L.mu1) / s2)
            worst["sum_sq"] = max(worst["sum_sq"], abs(L.delta1 ** 2 + L.delta2 ** 2 - (1 + L.mu2)) / s2)
            worst["product"] = max(worst["product"],
                                   abs(L.delta1 * L.delta2 - (2 * L.mu1 ** 2 - (L.mu2 + 1) / 2)) / s2)
            M = res.M[k]
            cond = max(1.0, np.linalg.norm(M, 2) ** 2)
            worst["det"] = max(worst["det"], abs(np.linalg.det(M) - 1) / cond)
            for tau in L.multipliers:
                worst["quartic"] = max(worst["quartic"], quartic_residual(L.mu1, L.mu2, tau))
    ok = all(v <= tol for k, v in worst.items() if k != "quartic") and worst["quartic"] <= tol_quartic
    return CheckResult("algebraic identities", 7, ok, worst, {"rel": tol, "quartic": tol_quartic})


@_timed
def check_spectral(window=(-20.0, 150.0), rho_tol=1e-8):
    """On every band ``rho >= -tol`` and each active branch is monotone."""
    meas, ok = {}, True
    for name, P in test_potentials().items():
        rep = classify_gaps(scan_bands(P, window))
        min_rho, mono, runs = band_properties(P, rep)
        meas[name] = {"bands": len(rep.bands), "min_rho": min_rho, "monotone": mono, "runs": runs}
        ok &= (min_rho >= -rho_tol) and mono
    return CheckResult("spectral properties", 8, bool(ok), meas, {"rho": -rho_tol})


@_timed
def check_asymptotics(n_max=30, n_mid=20, tol=0.05):
    """Residual partial l2 sums stabilize between ``n_mid`` and ``n_max``."""
    P = smooth_test_potential()
    clusters = [spectral_cluster(P, n) for n in range(1, n_max + 1)]
    r = asymptotic_residuals(P, clusters, n_max)
    se, sr = r.partial_sums("eig"), r.partial_sums("res")
    complete = len(r.n) == n_max
    inc_e = float(se[-1] / se[n_mid - 1] - 1) if complete else float("nan")
    inc_r = float(sr[-1] / sr[n_mid - 1] - 1) if complete else float("nan")
    ok = complete and inc_e < tol and inc_r < tol
    meas = {"eig_increase": inc_e, "res_increase": inc_r, "incomplete": r.incomplete,
            "ambiguous": r.ambiguous}
    return CheckResult("asymptotics", 9, bool(ok), meas, {"increase": tol}, detail=str(r.to_dict()))


@_timed
def check_reconstruction(N=40, a=10.0, gamma=0.5, window=(0.0, 50.0), tol=1e-3, res_tol=1e-2):
    """Hadamard reconstruction of ``D_+-`` from computed eigenvalues."""
    rep = reconstruction_report(delta_comb_potential(a, gamma), N, window)
    err = rep.errors
    ok = (rep.complete and err["d_plus"] <= tol and err["d_minus"] <= tol and err["mu1"] <= tol
          and len(rep.resonances) > 0 and err["resonances"] <= res_tol)
    meas = dict(err, n_resonances=len(rep.resonances), periodic_count=rep.periodic_count,
                contour_count=rep.contour_count)
    return CheckResult("reconstruction", 10, bool(ok), meas, {"rel": tol, "resonance_abs": res_tol})


@_timed
def check_series(n=50, orders=(0, 1, 2, 3)):
    """Truncated iteration series stays within the a-priori bound."""
    rng = np.random.default_rng(SEED + 4)
    P = smooth_test_potential()
    lams = random_disc(n, 400, rng, rmin=1.0)
    worst = {N: 0.0 for N in orders}
    for lam in lams:
        M = propagate(P, lam).entries
        for N in orders:
            dev = series_deviation(M, series_sum(P, lam, 1.0, N), lam)
            worst[N] = max(worst[N], dev / series_bound(P, lam, 1.0, N))
    ok = all(v <= 1.0 for v in worst.values())
    return CheckResult("series bound", 11, ok, {f"N={N}": v for N, v in worst.items()},
                       {"ratio": 1.0})


SUITES = {
    "free": check_free,
    "constant-oracle": check_constant,
    "delta-oracle": check_delta,
    "smoothed": check_smoothed,
    "counting": check_counting,
    "splitting": check_splitting,
    "identities": check_identities,
    "spectral": check_spectral,
    "asymptotics": check_asymptotics,
    "reconstruction": check_reconstruction,
    "series": check_series,
}


def run_suite(name, **kwargs) -> CheckResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SUITES[name](**kwargs)
