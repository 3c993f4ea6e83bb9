"""Discriminant traces, the two-valued Lyapunov function and multipliers.

From the monodromy ``M``:

    mu_1 = Tr M / 4,  mu_2 = Tr M^2 / 4,  rho = (mu_2 + 1)/2 - mu_1^2,
    Delta_{1,2} = mu_1 +- sqrt(rho),  D_+- = det(M -+ I)/4 = (mu_1 -+ 1)^2 - rho.

``rho`` is evaluated as ``Tr K0^2 / 4`` with ``K = (M + M^{-1})/2``,
``K0 = K - mu_1 I`` and ``M^{-1} = -J4 M^T J4`` (``M`` is symplectic).  This is
algebraically the same quantity but avoids the cancellation between
``mu_2/2`` and ``mu_1^2`` when both are of size ``exp(2|Im sqrt(lam)|)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .entire import cos_sinc
from .monodromy import PropagatorConfig, monodromy
from .potential import NormalizedPotential

J4 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])

# |rho| below this fraction of the natural scale is treated as a branch point
BRANCH_FLOOR = 1e-10
# continuation steps stay below this fraction of |rho/rho'|
STEP_FRACTION = 0.25
MAX_PATH_POINTS = 2 ** 17


class BranchPointError(RuntimeError):
    """Continuation path came too close to a zero of rho."""


@dataclass(frozen=True)
class LyapunovData:
    lam: complex
    mu1: complex
    mu2: complex
    rho: complex
    sqrt_rho: complex
    delta1: complex
    delta2: complex
    d_plus: complex
    d_minus: complex
    multipliers: tuple[complex, complex, complex, complex]
    branch_point: bool = False
    error: float = 0.0

    @property
    def scale(self):
        """Natural magnitude of the quadratic quantities (``rho``, ``D+-``, ``mu_2``)."""
        return max(1.0, abs(self.mu1) ** 2, abs(self.mu2))


@dataclass
class TraceBatch:
    lam: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    rho: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    M: np.ndarray
    error: np.ndarray
    dmu1: np.ndarray | None = None
    dmu2: np.ndarray | None = None
    drho: np.ndarray | None = None
    scalar_deltas: np.ndarray | None = None   # (n, 2) for diagonal potentials
    dscalar_deltas: np.ndarray | None = None

    @property
    def scale(self):
        return np.maximum(1.0, np.maximum(np.abs(self.mu1) ** 2, np.abs(self.mu2)))

    def target(self, name):
        """Values and derivatives of ``rho``, ``d_plus`` or ``d_minus``."""
        if name == "rho":
            return self.rho, self.drho
        if name == "d_plus":
            d = None if self.dmu1 is None else 2 * (self.mu1 - 1) * self.dmu1 - self.drho
            return self.d_plus, d
        if name == "d_minus":
            d = None if self.dmu1 is None else 2 * (self.mu1 + 1) * self.dmu1 - self.drho
            return self.d_minus, d
        if name == "split":
            # (Delta_(1) - Delta_(2))/2 of a diagonal potential, a square root of rho
            d = None if self.dscalar_deltas is None else 0.5 * (self.dscalar_deltas[:, 0] - self.dscalar_deltas[:, 1])
            return 0.5 * (self.scalar_deltas[:, 0] - self.scalar_deltas[:, 1]), d
        if name.startswith("scalar"):
            # "scalar<k><+|->": Delta_(k) -+ 1 of a diagonal potential
            k, sgn = int(name[6]) - 1, 1.0 if name[7] == "+" else -1.0
            d = None if self.dscalar_deltas is None else self.dscalar_deltas[:, k]
            return self.scalar_deltas[:, k] - sgn, d
        raise ValueError(f"unknown target {name!r}")


def _inverse(M):
    return -J4 @ np.swapaxes(M, -1, -2) @ J4


def traces_from_monodromy(lam, M, dM=None, error=None, diagonal=False):
    n = M.shape[0]
    mu1 = np.trace(M, axis1=1, axis2=2) / 4.0
    mu2 = np.einsum("nij,nji->n", M, M) / 4.0
    K0 = 0.5 * (M + _inverse(M)) - mu1[:, None, None] * np.eye(4)
    rho = np.einsum("nij,nji->n", K0, K0) / 4.0
    out = TraceBatch(
        lam=lam, mu1=mu1, mu2=mu2, rho=rho,
        d_plus=(mu1 - 1.0) ** 2 - rho, d_minus=(mu1 + 1.0) ** 2 - rho,
        M=M, error=np.zeros(n) if error is None else error,
    )
    if dM is not None:
        out.dmu1 = np.trace(dM, axis1=1, axis2=2) / 4.0
        out.dmu2 = np.einsum("nij,nji->n", M, dM) / 2.0
        dK0 = 0.5 * (dM + _inverse(dM)) - out.dmu1[:, None, None] * np.eye(4)
        out.drho = np.einsum("nij,nji->n", K0, dK0) / 2.0
    if diagonal:
        d1 = 0.5 * (M[:, 0, 0] + M[:, 2, 2])
        d2 = 0.5 * (M[:, 1, 1] + M[:, 3, 3])
        out.scalar_deltas = np.stack([d1, d2], axis=1)
        if dM is not None:
            out.dscalar_deltas = 0.5 * np.stack([dM[:, 0, 0] + dM[:, 2, 2],
                                                 dM[:, 1, 1] + dM[:, 3, 3]], axis=1)
    return out


def trace_batch(potential: NormalizedPotential, lam, derivative=False,
                config: PropagatorConfig | None = None) -> TraceBatch:
    """Traces, ``rho`` and ``D+-`` (optionally with lambda-derivatives) on a batch."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).ravel()
    res = monodromy(potential, lam, 1.0, derivative=derivative, config=config)
    return traces_from_monodromy(lam, res.M, res.dM, res.error,
                                 diagonal=potential.rotated_spec.is_diagonal())


# --------------------------------------------------------------------------

def quartic_coefficients(mu1, mu2):
    """Coefficients (highest first) of ``det(M - tau I)``."""
    return np.array([1.0, -4 * mu1, 2 * (4 * mu1 * mu1 - mu2), -4 * mu1, 1.0], dtype=complex)


def quartic_residual(mu1, mu2, tau):
    """``|p(tau)|`` relative to the sum of the magnitudes of its terms."""
    c = quartic_coefficients(mu1, mu2)
    powers = np.array([tau ** k for k in range(4, -1, -1)])
    terms = c * powers
    return float(abs(terms.sum()) / max(np.abs(terms).sum(), 1e-300))


def _multiplier_pair(delta, mu1, mu2):
    r = cmath.sqrt(delta * delta - 1.0)
    big = delta + r if abs(delta + r) >= abs(delta - r) else delta - r
    # one Newton step on the quartic, kept only if it lowers the residual
    c = quartic_coefficients(mu1, mu2)
    p = np.polyval(c, big)
    dp = np.polyval(np.polyder(c), big)
    if dp != 0:
        cand = big - p / dp
        if abs(np.polyval(c, cand)) < abs(p):
            big = complex(cand)
    return complex(big), complex(1.0 / big)


def assemble(lam, mu1, mu2, rho, sqrt_rho, branch_point=False, error=0.0,
             d_plus=None, d_minus=None) -> LyapunovData:
    """Build :class:`LyapunovData` from the traces and a chosen ``sqrt(rho)``."""
    mu1, mu2, rho, sqrt_rho = complex(mu1), complex(mu2), complex(rho), complex(sqrt_rho)
    if branch_point:
        sqrt_rho = 0.0j
    d1, d2 = mu1 + sqrt_rho, mu1 - sqrt_rho
    t1, t1i = _multiplier_pair(d1, mu1, mu2)
    t2, t2i = _multiplier_pair(d2, mu1, mu2)
    return LyapunovData(
        lam=complex(lam), mu1=mu1, mu2=mu2, rho=rho, sqrt_rho=sqrt_rho,
        delta1=d1, delta2=d2,
        d_plus=complex((mu1 - 1) ** 2 - rho) if d_plus is None else complex(d_plus),
        d_minus=complex((mu1 + 1) ** 2 - rho) if d_minus is None else complex(d_minus),
        multipliers=(t1, t1i, t2, t2i), branch_point=branch_point, error=float(error),
    )


def default_sqrt(lam, rho):
    """Label-free square root: the nonnegative root on the real axis."""
    lam, rho = complex(lam), complex(rho)
    if lam.imag == 0.0 and abs(rho.imag) <= 1e-14 * max(1.0, abs(rho)) and rho.real >= 0:
        return complex(math.sqrt(rho.real))
    return cmath.sqrt(rho)


def lyapunov_at(potential: NormalizedPotential, lam: complex, ctx: "BranchContext | None" = None,
                config: PropagatorConfig | None = None) -> LyapunovData:
    """All Lyapunov data at one ``lam``.

    Without a :class:`BranchContext`, ``sqrt(rho)`` is the nonnegative root for
    real ``lam`` with ``rho >= 0`` (so ``Delta_1 >= Delta_2``) and the principal
    root otherwise.  A zero of ``rho`` (relative to the natural scale) is
    flagged as a branch point with ``Delta_1 = Delta_2 = mu_1``.
    """
    tb = trace_batch(potential, [lam], config=config)
    mu1, mu2, rho = tb.mu1[0], tb.mu2[0], tb.rho[0]
    lam = complex(lam)
    if lam.imag == 0.0:
        # real potential, real lambda: the traces are real
        mu1, mu2, rho = mu1.real + 0j, mu2.real + 0j, rho.real + 0j
    scale = float(tb.scale[0])
    bp = abs(rho) <= BRANCH_FLOOR * scale
    if bp:
        s = 0j
    elif ctx is not None:
        s = branch_sqrt_rho(potential, lam, ctx, config=config)
    else:
        s = default_sqrt(lam, rho)
    return assemble(lam, mu1, mu2, rho, s, branch_point=bp, error=tb.error[0],
                    d_plus=(mu1 - 1) ** 2 - rho, d_minus=(mu1 + 1) ** 2 - rho)


def rho0(lam, c0):
    """``c0 sin(sqrt(lam))/(2 sqrt(lam))``; equals ``c0/2`` at ``lam = 0``."""
    _, s = cos_sinc(lam, 1.0)
    out = 0.5 * c0 * s
    return complex(out) if np.ndim(out) == 0 else out


def asymptotic_delta(lam, V_m0, m=1):
    """``cos sqrt(lam) + V_m0 sin sqrt(lam)/(2 sqrt(lam))``."""
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    c, s = cos_sinc(lam, 1.0)
    out = c + 0.5 * V_m0 * s
    return complex(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# branch continuation


@dataclass(frozen=True)
class BranchContext:
    """Anchor point, sign there, and intermediate waypoints of the path."""

    anchor_lambda: complex
    anchor_sign: int
    path: tuple[complex, ...] = ()


def _default_anchor(potential):
    n = max(10, int(math.ceil(4.0 * potential.l1_norm)))
    return complex((math.pi * (n + 0.5)) ** 2)


def make_branch_context(potential: NormalizedPotential, anchor: complex | None = None,
                        path=(), config: PropagatorConfig | None = None) -> BranchContext:
    """Fix the sign of ``sqrt(rho)`` at the anchor.

    For ``c0 > 0`` the sign makes ``sqrt(rho)`` closest to ``rho0`` (the anchor
    should lie in the high-energy region ``|sqrt(lam) - pi n| > pi/4``).  For
    ``c0 = 0`` the comparison function vanishes; the anchor must then be real
    with ``rho > 0`` and the positive root is taken.
    """
    anchor = _default_anchor(potential) if anchor is None else complex(anchor)
    tb = trace_batch(potential, [anchor], config=config)
    root = cmath.sqrt(complex(tb.rho[0]))
    if potential.c0 > 0:
        ref = rho0(anchor, potential.c0)
        sign = 1 if (root * ref.conjugate()).real >= 0 else -1
    else:
        r = complex(tb.rho[0])
        if anchor.imag != 0 or r.real <= 0:
            raise BranchPointError("c0 = 0: anchor must be real with rho > 0")
        sign = 1
    return BranchContext(anchor, sign, tuple(complex(p) for p in path))


def _scalar_split(potential, lam, config):
    tb = trace_batch(potential, [lam], config=config)
    d = tb.scalar_deltas[0]
    return complex(0.5 * (d[0] - d[1]))


def _segment_rho(potential, a, b, config, max_refine):
    """``rho`` on points of ``[a, b]`` fine enough to follow its argument.

    A step is accepted when it is shorter than :data:`STEP_FRACTION` times
    ``|rho/rho'|`` at both ends (a proxy for the distance to the nearest
    zero) and ``arg rho`` turns by less than ``pi/2``.  The first test keeps a
    full turn around a nearby zero from aliasing to no turn at all.
    """
    t = np.linspace(0.0, 1.0, 17)
    for _ in range(max_refine + 1):
        pts = a + t * (b - a)
        tb = trace_batch(potential, pts, derivative=True, config=config)
        rho = tb.rho
        if np.any(np.abs(rho) <= BRANCH_FLOOR * tb.scale):
            k = int(np.argmin(np.abs(rho) / tb.scale))
            raise BranchPointError(f"path passes near a zero of rho at lambda={pts[k]:.6g}")
        reach = np.abs(rho) / np.maximum(np.abs(tb.drho), 1e-300)
        step = np.abs(np.diff(pts))
        allowed = STEP_FRACTION * np.minimum(reach[:-1], reach[1:])
        jump = np.abs(np.angle(rho[1:] / rho[:-1]))
        bad = np.flatnonzero((step > allowed) | (jump >= 0.5 * math.pi))
        if bad.size == 0:
            return rho
        pieces = np.clip(np.ceil(step[bad] / allowed[bad]), 2, 64).astype(int)
        extra = [np.linspace(t[i], t[i + 1], k + 1)[1:-1] for i, k in zip(bad, pieces)]
        t = np.sort(np.concatenate([t, *extra]))
        if t.size > MAX_PATH_POINTS:
            break
    raise BranchPointError("continuation step control failed; reroute the path")


def branch_sqrt_rho(potential: NormalizedPotential, lam: complex, ctx: BranchContext,
                    config: PropagatorConfig | None = None, max_refine: int = 40) -> complex:
    """``sqrt(rho(lam))`` continued from the anchor along ``ctx.path`` to ``lam``.

    The path is the polyline anchor, waypoints, ``lam``; each segment is
    sampled finely enough that the sign choice by continuity is unambiguous
    (see :func:`_segment_rho`).  Raises :class:`BranchPointError` if ``|rho|``
    drops below the floor.  For diagonal potentials with ``c0 = 0`` the
    closed form ``(Delta_(1) - Delta_(2))/2`` of the scalar discriminants is
    returned.
    """
    spec = potential.rotated_spec
    if spec.is_scalar():
        return 0j
    if potential.c0 == 0 and spec.is_diagonal():
        return _scalar_split(potential, lam, config)
    nodes = [complex(ctx.anchor_lambda), *ctx.path, complex(lam)]
    value = None
    for a, b in zip(nodes[:-1], nodes[1:]):
        if a == b:
            continue
        roots = np.sqrt(_segment_rho(potential, a, b, config, max_refine).astype(complex))
        if value is None:
            value = ctx.anchor_sign * roots[0]
        for r in roots[1:]:
            value = r if (r * np.conj(value)).real >= 0 else -r
    if value is None:
        # lam is the anchor itself
        tb = trace_batch(potential, [lam], config=config)
        value = ctx.anchor_sign * np.sqrt(complex(tb.rho[0]))
    return complex(value)
