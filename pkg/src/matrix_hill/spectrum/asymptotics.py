"""High-energy residuals and Hadamard reconstruction of ``D_+-``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import loggamma

from ..entire import csqrt
from ..monodromy import PropagatorConfig
from .contour import Circle, count_zeros, target_function, winding
from .roots import Zero, expand, find_real_zeros, spectral_grid, zeros_near


class PairingError(RuntimeError):
    """Eigenvalues near ``(pi n)^2`` could not be assigned to the two diagonal entries."""


@dataclass
class Cluster:
    n: int
    eigenvalues: list[float]
    resonances: list[complex]
    eig_count: int
    res_count: int

    @property
    def complete(self):
        return len(self.eigenvalues) == self.eig_count == 4 and len(self.resonances) == self.res_count == 2


def cluster_radius(n):
    """Radius of the disc around ``(pi n)^2`` that stays between neighbouring clusters."""
    return 0.999 * math.pi ** 2 * (n - 0.25)


def spectral_cluster(potential, n, grid=32.0, config: PropagatorConfig | None = None) -> Cluster:
    """Eigenvalues (zeros of ``D_(-1)^n``) and resonances near ``(pi n)^2``.

    Completeness is checked by argument-principle counts on the disc of
    :func:`cluster_radius`.
    """
    if n < 1:
        raise ValueError("n >= 1")
    c = (math.pi * n) ** 2
    R = cluster_radius(n)
    target = "d_plus" if n % 2 == 0 else "d_minus"
    eig_count = count_zeros(potential, target, Circle(complex(c), R), config).count
    eigs = [v for v in expand(find_real_zeros(potential, target, (c - R, c + R), grid, config))
            if abs(v - c) < R]
    res_count, res = 0, []
    if not potential.rotated_spec.is_scalar():
        target_r = "split" if potential.rotated_spec.is_diagonal() else "rho"
        factor = 2 if target_r == "split" else 1
        func = target_function(potential, target_r, config)
        k = winding(func, Circle(complex(c), R), target=target_r).count
        res_count = factor * k
        # rectangle fallback in zeros_near covers the inscribed square only
        zs = zeros_near(func, complex(c), R, k, spectral_grid(potential, (c - R, c + R), grid), target_r)
        res = [z.value for z in zs for _ in range(factor * z.multiplicity)]
    return Cluster(n, sorted(eigs), sorted(res, key=lambda z: (complex(z).real, complex(z).imag)),
                   eig_count, res_count)


@dataclass
class Residuals:
    n: list[int] = field(default_factory=list)
    eig: list[tuple[float, float, float, float]] = field(default_factory=list)   # (a_{n,1}, a_{n,1}', a_{n,2}, a_{n,2}')
    res: list[tuple[complex, complex]] = field(default_factory=list)
    ambiguous: list[int] = field(default_factory=list)
    incomplete: list[int] = field(default_factory=list)

    def partial_sums(self, which="eig"):
        """Cumulative sums of ``|a_n|^2`` (or ``|b_n|^2``) over ``n``."""
        rows = self.eig if which == "eig" else self.res
        return np.cumsum([sum(abs(v) ** 2 for v in row) for row in rows])

    def to_dict(self):
        return {"n": self.n, "eig": [list(r) for r in self.eig],
                "res": [[[complex(v).real, complex(v).imag] for v in r] for r in self.res],
                "eig_l2": self.partial_sums("eig").tolist(), "res_l2": self.partial_sums("res").tolist(),
                "ambiguous": self.ambiguous, "incomplete": self.incomplete}


def pair_cluster(eigs, n, v10, v20):
    """Assign the four eigenvalues near ``(pi n)^2`` to ``m = 1, 2``.

    The lower two go to the smaller diagonal entry (nearest-target assignment
    for ordered targets).  Returns ``(residuals, ambiguous)``.
    """
    c = (math.pi * n) ** 2
    e = sorted(eigs)
    (ta, va), (tb, vb) = sorted([(c + v10, 1), (c + v20, 2)])
    low, high = e[:2], e[2:]
    amb = any(abs(x - tb) < abs(x - ta) for x in low) or any(abs(x - ta) < abs(x - tb) for x in high)
    if v10 == v20:
        amb = False
    by_m = {va: [x - ta for x in low], vb: [x - tb for x in high]}
    return tuple(by_m[1] + by_m[2]), amb


def asymptotic_residuals(potential, clusters, n_max=None) -> Residuals:
    """Residual sequences ``a_n = lam_{n,.} - (pi n)^2 - V_m0`` and ``b_n = r - (pi n)^2``."""
    v10, v20 = potential.mean_diag
    out = Residuals()
    for cl in sorted(clusters, key=lambda c: c.n):
        if n_max is not None and cl.n > n_max:
            break
        if not cl.complete:
            out.incomplete.append(cl.n)
            continue
        c = (math.pi * cl.n) ** 2
        a, amb = pair_cluster(cl.eigenvalues, cl.n, v10, v20)
        if amb:
            out.ambiguous.append(cl.n)
        out.n.append(cl.n)
        out.eig.append(a)
        out.res.append(tuple(complex(r) - c for r in cl.resonances))
    return out


# --------------------------------------------------------------------------
# Hadamard reconstruction


def _tail(lam, N, shift):
    """``prod_{n > N} (1 - x^2/(n - shift)^2)^4`` with ``x = sqrt(lam)/(2 pi)``.

    ``shift = 0`` gives the periodic tail, ``shift = 1/2`` the anti-periodic one;
    both through the Gamma-function form of the infinite product.
    """
    x = csqrt(lam) / (2 * math.pi)
    a = N + 1 - shift
    lg = 2 * loggamma(a) - loggamma(a + x) - loggamma(a - x)
    return np.exp(4 * lg)


class Reconstruction:
    """Truncated Hadamard product for ``D_+`` or ``D_-``."""

    def __init__(self, eigs, N, periodic=True):
        vals = np.sort(np.asarray(eigs, dtype=float))
        need = 4 * N + 2 if periodic else 4 * N
        if vals.size < need:
            raise ValueError(f"need {need} eigenvalues, got {vals.size}")
        self.N, self.periodic = N, periodic
        self.vals = vals[:need]

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        out = np.ones_like(lam)
        if self.periodic:
            out = out * (lam - self.vals[0]) * (lam - self.vals[1]) / 4.0
            rest = self.vals[2:]
            norms = np.repeat([(2 * math.pi * n) ** 2 for n in range(1, self.N + 1)], 4)
        else:
            out = out * 4.0
            rest = self.vals
            norms = np.repeat([(math.pi * (2 * n - 1)) ** 2 for n in range(1, self.N + 1)], 4)
        for v, s in zip(rest, norms):
            out = out * (v - lam) / s
        return out * _tail(lam, self.N, 0.0 if self.periodic else 0.5)


def reconstruct_dplus(periodic_eigs, truncation_N):
    """``(lam - l01)(lam - l02)/4 prod_{n<=N,m} (l_{2n,m} - lam)/(2 pi n)^2`` times the free tail."""
    return Reconstruction(expand(periodic_eigs) if periodic_eigs and isinstance(periodic_eigs[0], Zero)
                          else periodic_eigs, truncation_N, True)


def reconstruct_dminus(antiperiodic_eigs, truncation_N):
    """``4 prod_{n<=N,m} (l_{2n-1,m} - lam)/(pi(2n-1))^2`` times the free tail."""
    return Reconstruction(expand(antiperiodic_eigs) if antiperiodic_eigs and isinstance(antiperiodic_eigs[0], Zero)
                          else antiperiodic_eigs, truncation_N, False)


def recovered_traces(dplus, dminus, lam):
    """``mu_1 = (D_- - D_+)/4`` and ``rho = (mu_1 - 1)^2 - D_+`` from the two products."""
    dp, dm = dplus(lam), dminus(lam)
    mu1 = 0.25 * (dm - dp)
    return mu1, (mu1 - 1) ** 2 - dp


def reconstructed_rho_function(dplus, dminus):
    """``lams -> (rho, rho', scale)`` for root finding on the reconstructed ``rho``."""

    def func(lams):
        lams = np.asarray(lams, dtype=complex)
        h = 1e-5 * np.maximum(1.0, np.abs(lams))
        _, r = recovered_traces(dplus, dminus, lams)
        _, rp = recovered_traces(dplus, dminus, lams + h)
        _, rm = recovered_traces(dplus, dminus, lams - h)
        mu1, _ = recovered_traces(dplus, dminus, lams)
        return r, (rp - rm) / (2 * h), np.maximum(1.0, np.abs(mu1) ** 2)

    return func


def spectrum_lower_bound(potential):
    """A value below every periodic and anti-periodic eigenvalue."""
    l1 = potential.l1_norm
    return -(4.0 * l1 ** 2 + l1 + max(abs(v) for v in potential.mean_diag) + 10.0)


@dataclass
class ReconstructionReport:
    N: int
    lam: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    d_plus_rec: np.ndarray
    d_minus_rec: np.ndarray
    mu1: np.ndarray
    mu1_rec: np.ndarray
    rho: np.ndarray
    rho_rec: np.ndarray
    resonances: list[float]
    resonances_rec: list[float]
    periodic_count: int
    antiperiodic_count: int
    contour_count: int

    @staticmethod
    def _rel(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if len(b) else 0.0

    @property
    def errors(self):
        if len(self.resonances) == len(self.resonances_rec):
            res = max((abs(x - y) for x, y in zip(self.resonances, self.resonances_rec)), default=0.0)
        else:
            res = float("inf")
        return {"d_plus": self._rel(self.d_plus_rec, self.d_plus),
                "d_minus": self._rel(self.d_minus_rec, self.d_minus),
                "mu1": self._rel(self.mu1_rec, self.mu1),
                "resonances": float(res)}

    @property
    def complete(self):
        return (self.periodic_count == self.contour_count == 4 * self.N + 2
                and self.antiperiodic_count >= 4 * self.N)


def reconstruction_report(potential, N, window, points=501, grid=32.0, config=None):
    """Compare the truncated Hadamard products with direct evaluation on ``window``.

    Periodic and anti-periodic eigenvalues are computed on the fly up to the
    counting radius of ``D_+``; the periodic total is cross-checked against the
    contour count on that disc.
    """
    from ..lyapunov import trace_batch
    from .roots import antiperiodic_eigenvalues, periodic_eigenvalues, real_resonances, real_zeros

    R = 4 * math.pi ** 2 * (N + 0.5) ** 2
    low = spectrum_lower_bound(potential)
    pe = periodic_eigenvalues(potential, (low, R), grid, config)
    ae = antiperiodic_eigenvalues(potential, (low, R), grid, config)
    cnt = count_zeros(potential, "d_plus", Circle(0j, R), config).count
    n_pe, n_ae = sum(z.multiplicity for z in pe), sum(z.multiplicity for z in ae)
    dplus, dminus = reconstruct_dplus(pe, N), reconstruct_dminus(ae, N)
    lams = np.linspace(window[0], window[1], points)
    tb = trace_batch(potential, lams + 0j, config=config)
    mu1_r, rho_r = recovered_traces(dplus, dminus, lams)
    if potential.rotated_spec.is_scalar():
        direct, rec = [], []
    else:
        direct = sorted(expand(real_resonances(potential, window, grid, config)))
        rec = sorted(expand(real_zeros(reconstructed_rho_function(dplus, dminus),
                                       np.linspace(window[0], window[1], 4 * points))))
    return ReconstructionReport(N, lams, tb.d_plus.real, tb.d_minus.real, dplus(lams).real,
                                dminus(lams).real, tb.mu1.real, mu1_r.real, tb.rho.real, rho_r.real,
                                direct, rec, n_pe, n_ae, cnt)
