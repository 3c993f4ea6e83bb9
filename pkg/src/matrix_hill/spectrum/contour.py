"""Argument-principle zero counting on circles and rectangles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..lyapunov import trace_batch
from ..monodromy import PropagatorConfig

WINDING_TOL = 0.05
# |f| below this fraction of its scale on the contour means a zero is too close
NEAR_ZERO = 1e-11


class ContourError(RuntimeError):
    """Winding number did not settle to an integer."""


class DegenerateTargetError(ContourError):
    """The target function vanishes identically (e.g. rho for a scalar potential)."""


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def nodes(self, n):
        t = 2 * np.pi * np.arange(n) / n
        e = np.exp(1j * t)
        # trapezoid on a periodic integrand: dlam = i r e^{it} dt
        return self.center + self.radius * e, 1j * self.radius * e * (2 * np.pi / n)

    def contains(self, z):
        return abs(z - self.center) < self.radius

    def describe(self):
        return {"type": "circle", "center": [self.center.real, self.center.imag], "radius": self.radius}


@dataclass(frozen=True)
class Rect:
    re0: float
    re1: float
    im0: float
    im1: float

    def __post_init__(self):
        if not (self.re1 > self.re0 and self.im1 > self.im0):
            raise ValueError("empty rectangle")

    @property
    def corners(self):
        return [complex(self.re0, self.im0), complex(self.re1, self.im0),
                complex(self.re1, self.im1), complex(self.re0, self.im1)]

    def nodes(self, n):
        """Composite Gauss-Legendre nodes (``n`` panels of 8 points split over the sides)."""
        x, w = np.polynomial.legendre.leggauss(8)
        c = self.corners
        lengths = np.array([abs(c[(k + 1) % 4] - c[k]) for k in range(4)])
        per_side = np.maximum(1, np.round(n * lengths / lengths.sum())).astype(int)
        pts, wts = [], []
        for k in range(4):
            a, b = c[k], c[(k + 1) % 4]
            edges = np.linspace(0.0, 1.0, per_side[k] + 1)
            mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
            t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
            wt = (half[:, None] * w[None, :]).ravel()
            pts.append(a + t * (b - a))
            wts.append(wt * (b - a))
        return np.concatenate(pts), np.concatenate(wts)

    def contains(self, z):
        return self.re0 < z.real < self.re1 and self.im0 < z.imag < self.im1

    @property
    def center(self):
        return complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))

    @property
    def size(self):
        return max(self.re1 - self.re0, self.im1 - self.im0)

    def describe(self):
        return {"type": "rect", "re": [self.re0, self.re1], "im": [self.im0, self.im1]}


@dataclass(frozen=True)
class ContourCount:
    contour: Circle | Rect
    target: str
    count: int
    winding: complex
    points: int

    @property
    def residue(self):
        return abs(self.winding - self.count)

    def to_dict(self):
        return {"contour": self.contour.describe(), "target": self.target, "count": self.count,
                "winding_re": self.winding.real, "winding_im": self.winding.imag,
                "points": self.points}


def winding(func, contour, n0=64, max_points=2 ** 15, target="f"):
    """Integer winding of ``func`` along ``contour``.

    ``func(lams) -> (f, df, scale)``.  Doubles the node count until two
    consecutive quadratures agree to 1e-3 and the value is within
    :data:`WINDING_TOL` of an integer.
    """
    prev = None
    n = n0
    while n <= max_points:
        z, w = contour.nodes(n)
        f, df, scale = func(z)
        if np.all(np.abs(f) <= 1e-14 * scale):
            raise DegenerateTargetError(f"{target} vanishes identically on the contour")
        if np.min(np.abs(f) / scale) < NEAR_ZERO:
            raise ContourError(f"{target} has a zero on or next to the contour")
        val = complex(np.sum(df / f * w) / (2j * np.pi))
        if prev is not None and abs(val - prev) < 1e-3 and abs(val - round(val.real)) < WINDING_TOL:
            return ContourCount(contour, target, int(round(val.real)), val, len(z))
        prev = val
        n *= 2
    raise ContourError(f"winding of {target} not resolved with {max_points} nodes (last {prev})")


def target_function(potential, target, config: PropagatorConfig | None = None):
    """``lams -> (f, df, scale)`` for a named target.

    Targets: ``rho``, ``d_plus``, ``d_minus``; for diagonal potentials also
    ``scalar<k><+|->`` (``Delta_(k) -+ 1``) and ``split`` (``(Delta_(1) - Delta_(2))/2``).
    """
    spec = potential.rotated_spec
    if target == "rho" and spec.is_scalar():
        raise DegenerateTargetError("rho vanishes identically for a scalar-like potential")
    if target == "split" and spec.is_scalar():
        raise DegenerateTargetError("Delta_(1) - Delta_(2) vanishes identically for a scalar potential")
    if (target.startswith("scalar") or target == "split") and not spec.is_diagonal():
        raise ValueError("scalar discriminants need a diagonal potential")

    def func(lams):
        tb = trace_batch(potential, lams, derivative=True, config=config)
        f, df = tb.target(target)
        if target.startswith("scalar") or target == "split":
            scale = np.maximum(1.0, np.abs(tb.scalar_deltas).max(axis=1))
        else:
            scale = tb.scale
        return f, df, scale

    return func


def count_zeros(potential, target: str, contour, config: PropagatorConfig | None = None,
                n0: int = 64) -> ContourCount:
    """Number of zeros of ``target`` inside ``contour`` counted with multiplicity."""
    return winding(target_function(potential, target, config), contour, n0=n0, target=target)


def counting_radius_rho(N):
    """Radius of the disc that holds ``2N`` zeros of ``rho`` for large ``N``."""
    return (math.pi * (N + 0.5)) ** 2


def counting_radius_dplus(N):
    return 4 * math.pi ** 2 * (N + 0.5) ** 2


def counting_radius_dminus(N):
    return 4 * math.pi ** 2 * N ** 2
