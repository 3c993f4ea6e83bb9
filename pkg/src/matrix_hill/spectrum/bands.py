"""Bands, gaps and their classification on a real window.

A real ``lam`` is in the spectrum iff ``rho(lam) >= 0`` and one of the real
values ``Delta_{1,2} = mu_1 +- sqrt(rho)`` lies in ``[-1, 1]``.  Membership can
only change at real zeros of ``D_+``, ``D_-`` or ``rho``, so bands are unions of
the pieces between consecutive zeros.  Diagonal potentials use the two scalar
discriminants directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lyapunov import trace_batch
from ..monodromy import PropagatorConfig
from .roots import (Zero, antiperiodic_eigenvalues, periodic_eigenvalues, real_resonances,
                    spectral_grid)

MATCH_TOL = 1e-6
MEMBER_SLACK = 1e-7


class BandResolutionError(RuntimeError):
    """Band edges could not be separated at the grid resolution."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


@dataclass
class Band:
    lo: float
    hi: float
    branches: tuple[int, ...]

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "branches": list(self.branches)}


@dataclass
class Gap:
    lo: float
    hi: float
    kind: str = "unclassified"       # stable | resonance | mixed | unclassified
    lo_source: str = ""
    hi_source: str = ""
    flagged: bool = False

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "kind": self.kind, "lo_source": self.lo_source,
                "hi_source": self.hi_source, "flagged": self.flagged}


@dataclass
class SpectralReport:
    window: tuple[float, float]
    bands: list[Band] = field(default_factory=list)
    gaps: list[Gap] = field(default_factory=list)
    exterior: list[tuple[float, float]] = field(default_factory=list)
    periodic_eigs: list[Zero] = field(default_factory=list)
    antiperiodic_eigs: list[Zero] = field(default_factory=list)
    resonances: list[Zero] = field(default_factory=list)
    branch_pieces: list[tuple[float, float, int]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "window": list(self.window),
            "bands": [b.to_dict() for b in self.bands],
            "gaps": [g.to_dict() for g in self.gaps],
            "exterior": [list(e) for e in self.exterior],
            "periodic_eigs": [z.to_dict() for z in self.periodic_eigs],
            "antiperiodic_eigs": [z.to_dict() for z in self.antiperiodic_eigs],
            "resonances": [z.to_dict() for z in self.resonances],
            "diagnostics": self.diagnostics,
        }


# --------------------------------------------------------------------------


def branch_values(potential, lams, config=None, resonances=None):
    """Real branch values ``(Delta_1, Delta_2, rho, mu_1)`` on real ``lams``.

    Diagonal potentials give the scalar discriminants.  Otherwise the labels
    start from ``Delta_1 >= Delta_2`` and swap at every real zero of ``rho`` of
    even multiplicity, so each label follows one analytic branch.  Where
    ``rho < 0`` the branch values are ``nan``.
    """
    lams = np.asarray(lams, dtype=float)
    tb = trace_batch(potential, lams.astype(complex), config=config)
    mu1, rho = tb.mu1.real, tb.rho.real
    if potential.rotated_spec.is_diagonal():
        d = tb.scalar_deltas.real
        return d[:, 0], d[:, 1], rho, mu1
    root = np.sqrt(np.where(rho >= 0, rho, np.nan))
    parity = np.zeros(lams.size, dtype=int)
    for z in resonances or ():
        if z.is_real and z.multiplicity % 2 == 0:
            parity += lams > z.value.real
    sign = np.where(parity % 2 == 0, 1.0, -1.0)
    return mu1 + sign * root, mu1 - sign * root, rho, mu1


def _member(d1, d2, slack=0.0):
    return [np.abs(d1) <= 1 + slack, np.abs(d2) <= 1 + slack]


def _intervals(points, active):
    """Maximal runs of consecutive active pieces ``[points[i], points[i+1]]``."""
    out, start = [], None
    for i, a in enumerate(active):
        if a and start is None:
            start = points[i]
        if not a and start is not None:
            out.append((start, points[i]))
            start = None
    if start is not None:
        out.append((start, points[-1]))
    return out


def scan_bands(potential, window, grid=32.0, config: PropagatorConfig | None = None) -> SpectralReport:
    """Bands and gaps in ``window`` (gaps unclassified; see :func:`classify_gaps`).

    Raises :class:`BandResolutionError` when grid samples disagree with the
    piecewise membership derived from the zero lists.
    """
    lo, hi = float(window[0]), float(window[1])
    pe = periodic_eigenvalues(potential, (lo, hi), grid, config)
    ae = antiperiodic_eigenvalues(potential, (lo, hi), grid, config)
    scalar = potential.rotated_spec.is_scalar()
    res = [] if scalar else real_resonances(potential, (lo, hi), grid, config)
    cuts = sorted({lo, hi, *(z.value.real for z in pe + ae + res if lo < z.value.real < hi)})
    pts = np.array(cuts)
    mids = 0.5 * (pts[:-1] + pts[1:])
    d1, d2, rho, _ = branch_values(potential, mids, config, res)
    active = _member(d1, d2)
    pieces = []
    for m, act in enumerate(active, start=1):
        pieces += [(a, b, m) for a, b in _intervals(pts, act)]
    union = _intervals(pts, active[0] | active[1])
    bands = []
    for a, b in union:
        br = tuple(sorted({m for (p, q, m) in pieces if p >= a and q <= b}))
        bands.append(Band(a, b, br))
    gaps = [Gap(bands[i].hi, bands[i + 1].lo) for i in range(len(bands) - 1)]
    exterior = []
    if bands:
        if bands[0].lo > lo:
            exterior.append((lo, bands[0].lo))
        if bands[-1].hi < hi:
            exterior.append((bands[-1].hi, hi))
    else:
        exterior.append((lo, hi))
    report = SpectralReport((lo, hi), bands, gaps, exterior, pe, ae, res, sorted(pieces))
    _check_on_grid(potential, report, grid, config)
    return report


def _check_on_grid(potential, report, grid, config):
    """Grid samples must agree with the piecewise membership."""
    lo, hi = report.window
    g = spectral_grid(potential, (lo, hi), grid)
    d1, d2, rho, _ = branch_values(potential, g, config, report.resonances)
    inside = np.zeros(g.size, dtype=bool)
    for b in report.bands:
        inside |= (g >= b.lo) & (g <= b.hi)
    edges = np.array(sorted({v for b in report.bands for v in (b.lo, b.hi)}) or [np.inf])
    near_edge = np.min(np.abs(g[:, None] - edges[None, :]), axis=1) <= 1e-6 * np.maximum(1.0, np.abs(g))
    with np.errstate(invalid="ignore"):
        clearly_in = (rho > MEMBER_SLACK) & ((np.abs(d1) < 1 - MEMBER_SLACK) | (np.abs(d2) < 1 - MEMBER_SLACK))
        clearly_out = (rho < -MEMBER_SLACK) | ((np.abs(d1) > 1 + MEMBER_SLACK) & (np.abs(d2) > 1 + MEMBER_SLACK))
    bad = ~near_edge & ((inside & clearly_out) | (~inside & clearly_in))
    report.diagnostics["grid_points"] = int(g.size)
    if bad.any():
        x = float(g[np.flatnonzero(bad)[0]])
        k = int(np.searchsorted(g, x))
        interval = (float(g[max(k - 1, 0)]), float(g[min(k + 1, g.size - 1)]))
        raise BandResolutionError(f"band edge not separable near lambda={x:.12g}", interval)


def classify_gaps(report: SpectralReport, tol: float = MATCH_TOL) -> SpectralReport:
    """Label each gap from the provenance of its endpoints.

    ``stable``: both endpoints are zeros of ``D_+-``; ``resonance``: both are
    real zeros of ``rho``; ``mixed``: one of each.  Endpoints that match both
    lists or neither are flagged.
    """
    eigs = [z.value.real for z in report.periodic_eigs + report.antiperiodic_eigs]
    res = [z.value.real for z in report.resonances if z.is_real]

    def source(x):
        near = lambda vals: any(abs(x - v) <= tol * max(1.0, abs(x)) for v in vals)
        e, r = near(eigs), near(res)
        if e and r:
            return "ambiguous"
        return "eigenvalue" if e else "resonance" if r else "unmatched"

    for gap in report.gaps:
        gap.lo_source, gap.hi_source = source(gap.lo), source(gap.hi)
        kinds = {gap.lo_source, gap.hi_source}
        if kinds == {"eigenvalue"}:
            gap.kind = "stable"
        elif kinds == {"resonance"}:
            gap.kind = "resonance"
        elif kinds == {"eigenvalue", "resonance"}:
            gap.kind, gap.flagged = "mixed", False
        else:
            gap.kind, gap.flagged = "unclassified", True
    return report


def band_properties(potential, report: SpectralReport, grid=64.0, config=None, margin=1e-3):
    """Grid checks on every band.

    Returns ``(min_rho, monotone)`` where ``min_rho`` is the smallest ``rho``
    over grid points inside bands and ``monotone`` tells whether every branch
    value is strictly monotone on each run of grid points where
    ``|Delta_m| <= 1 - margin``.
    """
    lo, hi = report.window
    g = spectral_grid(potential, (lo, hi), grid)
    d = branch_values(potential, g, config, report.resonances)
    rho = d[2]
    min_rho, monotone, runs = np.inf, True, 0
    for b in report.bands:
        sel = (g >= b.lo) & (g <= b.hi)
        if not sel.any():
            continue
        min_rho = min(min_rho, float(rho[sel].min()))
        for m in b.branches:
            vals = d[m - 1][sel]
            with np.errstate(invalid="ignore"):
                ok = np.abs(vals) <= 1 - margin
            idx = np.flatnonzero(ok)
            if idx.size < 3:
                continue
            # split into runs of consecutive grid points
            for run in np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1):
                if run.size < 3:
                    continue
                runs += 1
                s = np.sign(np.diff(vals[run]))
                if not (np.all(s > 0) or np.all(s < 0)):
                    monotone = False
    return min_rho, monotone, runs
