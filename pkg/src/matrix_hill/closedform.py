"""Exact reference models.

* constant potential ``a J``: two decoupled scalar problems with
  ``eta_+- = sqrt(lam -+ a)``, ``c_+- = cos eta_+-``, ``s_+- = sin eta_+- / eta_+-``;
* delta comb ``a J + gamma delta_per J1`` (unit spaced, at the half-integers),
  whose traces differ from the constant model by ``h = gamma^2/4 s_+ s_-``;
* the smoothed-delta family ``a J + gamma v_nu J1`` with a C-infinity bump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entire import cos_sinc, cos_sinc_dw, csqrt
from .lyapunov import LyapunovData, assemble, default_sqrt
from .potential import J1, NormalizedPotential, normalize_potential, parse_potential_spec

BRANCH_TOL = 1e-13


class ResonanceSplitError(RuntimeError):
    """Newton iteration for a split resonance left the perturbative regime."""


@dataclass(frozen=True)
class ConstantModel:
    a: float

    def eta(self, lam, sign=+1):
        return csqrt(np.asarray(lam, dtype=complex) - sign * self.a)

    def c(self, lam, x=1.0, sign=+1):
        return cos_sinc(np.asarray(lam, dtype=complex) - sign * self.a, x)[0]

    def s(self, lam, x=1.0, sign=+1):
        return cos_sinc(np.asarray(lam, dtype=complex) - sign * self.a, x)[1]

    def traces(self, lam):
        """``(mu1, mu2, rho, d_plus, d_minus)`` of the constant model."""
        cp, cm = self.c(lam, 1.0, +1), self.c(lam, 1.0, -1)
        mu1 = 0.5 * (cp + cm)
        mu2 = cp * cp + cm * cm - 1.0
        rho = 0.25 * (cp - cm) ** 2
        return mu1, mu2, rho, (1 - cp) * (1 - cm), (1 + cp) * (1 + cm)

    def monodromy(self, lam):
        """The 4x4 monodromy ``[[c, s], [-eta^2 s, c]]`` with diagonal blocks."""
        lam = complex(lam)
        M = np.zeros((4, 4), dtype=complex)
        for k, sign in enumerate((+1, -1)):
            w = lam - sign * self.a
            c, s = cos_sinc(w, 1.0)
            M[k, k], M[k, k + 2] = c, s
            M[k + 2, k], M[k + 2, k + 2] = -w * s, c
        return M


@dataclass(frozen=True)
class DeltaModel:
    a: float
    gamma: float

    @property
    def base(self):
        return ConstantModel(self.a)

    def h(self, lam):
        b = self.base
        return 0.25 * self.gamma ** 2 * b.s(lam, 1.0, +1) * b.s(lam, 1.0, -1)

    def traces(self, lam):
        mu1, mu2, rho, dp, dm = self.base.traces(lam)
        h = self.h(lam)
        return mu1, mu2 + 2 * h, rho + h, dp - h, dm - h

    def monodromy(self, lam, x0=0.5):
        """Half-period propagators around the exact jump at ``x0``."""
        left = _constant_propagator(self.a, lam, x0)
        right = _constant_propagator(self.a, lam, 1.0 - x0)
        return right @ jump_matrix(self.gamma) @ left


def _constant_propagator(a, lam, x):
    M = np.zeros((4, 4), dtype=complex)
    for k, sign in enumerate((+1, -1)):
        w = complex(lam) - sign * a
        c, s = cos_sinc(w, x)
        M[k, k], M[k, k + 2] = c, s
        M[k + 2, k], M[k + 2, k + 2] = -w * s, c
    return M


def jump_matrix(gamma, S=None):
    """``[[I, 0], [S, I]]``: the derivative jumps by ``S y`` (``S = gamma J1``)."""
    S = gamma * J1 if S is None else np.asarray(S, dtype=float)
    out = np.eye(4, dtype=complex)
    out[2:, :2] = S
    return out


# --------------------------------------------------------------------------

def constant_lyapunov(a: float, lam: complex) -> LyapunovData:
    """Closed-form Lyapunov data; ``Delta_1 = c_+`` and ``Delta_2 = c_-``."""
    m = ConstantModel(a)
    lam = complex(lam)
    cp, cm = complex(m.c(lam, 1.0, +1)), complex(m.c(lam, 1.0, -1))
    mu1, mu2, rho, dp, dm = (complex(v) for v in m.traces(lam))
    bp = abs(cp - cm) <= BRANCH_TOL * max(1.0, abs(mu1))
    return assemble(lam, mu1, mu2, rho, 0.5 * (cp - cm), branch_point=bp,
                    d_plus=dp, d_minus=dm)


def delta_lyapunov(a: float, gamma: float, lam: complex) -> LyapunovData:
    """Closed-form Lyapunov data of the delta comb.

    ``sqrt(rho)`` follows the label-free convention of
    :func:`matrix_hill.lyapunov.default_sqrt`.
    """
    lam = complex(lam)
    mu1, mu2, rho, dp, dm = (complex(v) for v in DeltaModel(a, gamma).traces(lam))
    scale = max(1.0, abs(mu1) ** 2, abs(mu2))
    bp = abs(rho) <= 1e-10 * scale
    return assemble(lam, mu1, mu2, rho, default_sqrt(lam, rho), branch_point=bp,
                    d_plus=dp, d_minus=dm)


@dataclass(frozen=True)
class ConstantResonances:
    a: float
    n_a: int
    resonances: tuple[tuple[int, float], ...]          # (n, z_n^0), each a double zero
    eigenvalues: tuple[tuple[int, int, float], ...]    # (m, n, lambda_{m,n}^0), each double


def resonance_index(a: float) -> int:
    """``n_a = floor(a / 2 pi^2)``; undefined when ``a / 2 pi^2`` is an integer."""
    r = a / (2 * math.pi ** 2)
    if abs(r - round(r)) < 1e-12:
        raise ValueError(f"a/(2 pi^2) = {r!r} is an integer; n_a is undefined")
    return int(math.floor(r))


def constant_resonance(a: float, n: int) -> float:
    return (math.pi * n) ** 2 + a * a / (2 * math.pi * n) ** 2


def constant_eigenvalue(a: float, m: int, n: int) -> float:
    """``(pi n)^2 + a`` for ``m = 1`` and ``(pi n)^2 - a`` for ``m = 2``.

    Even ``n`` are periodic eigenvalues, odd ``n`` anti-periodic; ``m`` follows
    the entries of ``aJ = diag(a, -a)`` (normalization sorts them the other way).
    """
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    return (math.pi * n) ** 2 - (-1) ** m * a


def constant_resonances(a: float, n_max: int) -> ConstantResonances:
    """Resonances ``z_n^0`` and companion eigenvalues of the constant model."""
    n_a = resonance_index(a)
    z = [constant_resonance(a, n) for n in range(1, n_max + 1)]
    head, tail = z[:n_a], z[n_a:]
    if any(x <= y for x, y in zip(head[:-1], head[1:])):
        raise AssertionError("z_n^0 must decrease for n <= n_a")
    if any(x >= y for x, y in zip(tail[:-1], tail[1:])):
        raise AssertionError("z_n^0 must increase for n > n_a")
    eigs = tuple((m, n, constant_eigenvalue(a, m, n)) for n in range(0, n_max + 1) for m in (1, 2))
    return ConstantResonances(a, n_a, tuple(zip(range(1, n_max + 1), z)), eigs)


# --------------------------------------------------------------------------

def _rho_gamma(a, gamma, lam):
    """``rho^gamma`` and its lambda-derivative."""
    cp, sp, dcp, dsp = cos_sinc_dw(lam - a, 1.0)
    cm, sm, dcm, dsm = cos_sinc_dw(lam + a, 1.0)
    f, df = cp - cm, dcp - dcm
    g2 = 0.25 * gamma * gamma
    rho = 0.25 * f * f + g2 * sp * sm
    drho = 0.5 * f * df + g2 * (dsp * sm + sp * dsm)
    return complex(rho), complex(drho)


def delta_resonance_split(a: float, gamma: float, n: int, tol: float = 1e-13,
                          max_iter: int = 60) -> tuple[complex, complex]:
    """The two zeros of ``rho^gamma`` emerging from the double zero ``z_n^0``.

    Seeds come from the quadratic model ``f'^2 d^2/4 + h = 0`` at ``z_n^0``
    (``f = c_+ - c_-``), then Newton runs on the exact ``rho^gamma``.  Returns
    ``(z^-, z^+)``: a real pair with ``z^- < z^+`` or a conjugate pair ordered
    by imaginary part.  Raises :class:`ResonanceSplitError` if an iterate
    leaves the disc of radius half the distance to the neighbouring ``z^0``.
    """
    if n < 1:
        raise ValueError("n >= 1")
    z0 = constant_resonance(a, n)
    nbrs = [constant_resonance(a, k) for k in (n - 1, n + 1) if k >= 1]
    radius = 0.5 * min(abs(z0 - v) for v in nbrs) if nbrs else 0.5 * z0
    _, sp, dcp, _ = cos_sinc_dw(z0 - a, 1.0)
    _, sm, dcm, _ = cos_sinc_dw(z0 + a, 1.0)
    fp = complex(dcp - dcm)
    if fp == 0:
        raise ResonanceSplitError("degenerate seed: f'(z_n^0) = 0")
    d = gamma * csqrt(-complex(sp * sm)) / fp
    roots = []
    for seed in (z0 - d, z0 + d):
        z = complex(seed)
        for _ in range(max_iter):
            r, dr = _rho_gamma(a, gamma, z)
            if dr == 0:
                raise ResonanceSplitError("zero derivative in Newton iteration")
            step = r / dr
            z -= step
            if abs(z - z0) > radius:
                raise ResonanceSplitError(f"Newton left the perturbative disc around z_{n}^0")
            if abs(step) <= tol * max(1.0, abs(z)):
                break
        else:
            raise ResonanceSplitError("Newton did not converge")
        roots.append(z)
    z1, z2 = roots
    if abs(z1 - z2) <= 1e-9 * max(1.0, abs(z0)):
        raise ResonanceSplitError("both seeds converged to the same zero")
    if abs(z1.imag) <= 1e-10 * abs(z1) and abs(z2.imag) <= 1e-10 * abs(z2):
        lo, hi = sorted((z1.real, z2.real))
        return complex(lo), complex(hi)
    lo, hi = sorted((z1, z2), key=lambda v: v.imag)
    # conjugate pair for a real potential
    mid = 0.5 * (lo + hi.conjugate())
    return mid, mid.conjugate()


def smoothed_delta_family(a: float, gamma: float, nu: float) -> NormalizedPotential:
    """``a J + gamma v_nu(x) J1`` with the normalized bump centred at 1/2."""
    return normalize_potential(parse_potential_spec(
        {"smooth": {"builtin": "smoothed_delta", "a": a, "gamma": gamma, "nu": nu}}))
