"""Real and complex zeros of the spectral functions.

Real zeros come from a grid scan followed by bracketed Newton on sign changes.
Touching zeros are found through sign changes of the derivative, and their
multiplicity comes from a small local contour.  Complex zeros come from
recursive subdivision of a rectangle by argument-principle counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..monodromy import PropagatorConfig
from .contour import Circle, ContourError, DegenerateTargetError, Rect, target_function, winding

ROOT_RTOL = 1e-9
GRID_FLOOR = 4.0


class RootResolutionError(RuntimeError):
    """Zeros could not be separated at the requested resolution."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


@dataclass(frozen=True)
class Zero:
    value: complex
    multiplicity: int = 1
    resolved: bool = True   # False: a cluster reported as one multiplicity group

    @property
    def is_real(self):
        return self.value.imag == 0.0

    def to_dict(self):
        return {"re": self.value.real, "im": self.value.imag,
                "multiplicity": self.multiplicity, "resolved": self.resolved}


# --------------------------------------------------------------------------
# grids


def cluster_halfwidth(potential):
    """Half-width of the window around ``(pi n)^2`` that holds the n-th cluster."""
    v1, v2 = potential.mean_diag
    return 2.0 * max(abs(v1), abs(v2)) + potential.l1_norm + 1.0


def spectral_grid(potential, window, density=32.0, cluster_points=64):
    """Sample points for a real scan of ``window``.

    Uniform in ``t = sign(lam) sqrt|lam|`` with ``density`` points per unit of
    ``t``, plus ``cluster_points`` equispaced points around every ``(pi n)^2``
    in the window, where eigenvalues and resonances accumulate.
    """
    lo, hi = map(float, window)
    if not hi > lo:
        raise ValueError("empty window")
    if density < GRID_FLOOR:
        raise ValueError(f"grid density must be at least {GRID_FLOOR}")
    tl, th = math.copysign(math.sqrt(abs(lo)), lo), math.copysign(math.sqrt(abs(hi)), hi)
    n = max(2, int(math.ceil((th - tl) * density)) + 1)
    t = np.linspace(tl, th, n)
    parts = [np.sign(t) * t * t, [lo, hi]]
    w = cluster_halfwidth(potential)
    n0 = max(1, int(math.floor(math.sqrt(max(lo - w, 0.0)) / math.pi)))
    n1 = int(math.floor(math.sqrt(max(hi + w, 0.0)) / math.pi))
    for k in range(n0, n1 + 1):
        c = (math.pi * k) ** 2
        parts.append(np.linspace(c - w, c + w, cluster_points))
    g = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in parts]))
    return g[(g >= lo) & (g <= hi)]


# --------------------------------------------------------------------------
# bracketed solves, vectorized over brackets


def _solve_brackets(fn, lo, hi, glo, ghi, use_newton, rtol=1e-14, max_iter=200):
    """Roots of ``fn`` in the brackets ``[lo, hi]`` (``glo``, ``ghi`` the end values).

    ``fn(x) -> (g, dg)``.  Newton steps when ``use_newton`` (kept only inside
    the bracket), otherwise false position; a bisection every third iteration
    guarantees progress.
    """
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    glo, ghi = np.array(glo, dtype=float), np.array(ghi, dtype=float)
    x = 0.5 * (lo + hi)
    done = np.zeros(lo.size, dtype=bool)
    for it in range(max_iter):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        g, dg = fn(x[idx])
        same = np.sign(g) == np.sign(glo[idx])
        a, b = idx[same], idx[~same]
        lo[a], glo[a] = x[a], g[same]
        hi[b], ghi[b] = x[b], g[~same]
        tol = rtol * np.maximum(1.0, np.abs(x[idx]))
        fin = ((hi[idx] - lo[idx]) <= tol) | (g == 0)
        done[idx[fin]] = True
        if it % 3 == 2:
            nxt = 0.5 * (lo[idx] + hi[idx])
        elif use_newton:
            with np.errstate(divide="ignore", invalid="ignore"):
                nxt = x[idx] - g / dg
            conv = (np.abs(nxt - x[idx]) <= tol) & (nxt > lo[idx]) & (nxt < hi[idx])
            x[idx[conv & ~fin]] = nxt[conv & ~fin]
            done[idx[conv]] = True
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                nxt = lo[idx] - glo[idx] * (hi[idx] - lo[idx]) / (ghi[idx] - glo[idx])
        bad = ~np.isfinite(nxt) | (nxt <= lo[idx]) | (nxt >= hi[idx])
        nxt = np.where(bad, 0.5 * (lo[idx] + hi[idx]), nxt)
        upd = idx[~done[idx]]
        x[upd] = nxt[~done[idx]]
    return x


# --------------------------------------------------------------------------
# real zeros


def _local_multiplicity(func, c, neighbours, target):
    """Local winding count around a touching-zero candidate ``c``."""
    d = min([abs(c - v) for v in neighbours if v != c] + [1e300])
    r = min(0.3 * d, 1e-3 * max(1.0, abs(c)))
    for _ in range(6):
        try:
            return winding(func, Circle(complex(c), r), n0=32, target=target).count
        except ContourError:
            r = min(3 * r, 0.45 * d)
    raise RootResolutionError(f"cannot isolate the zero cluster near {c:.12g}", (c - r, c + r))


def real_zeros(func, grid, target="f", touch_tol=1e-12):
    """Real zeros of ``func`` on the sorted ``grid`` with multiplicities."""
    grid = np.asarray(grid, dtype=float)
    f, df, scale = func(grid)
    g, dg = f.real, df.real

    def real_fn(x):
        fv, dfv, _ = func(x)
        return fv.real, dfv.real

    def deriv_fn(x):
        _, dfv, _ = func(x)
        return dfv.real, None

    exact = list(grid[g == 0.0])
    s = np.sign(g)
    sc = np.flatnonzero((s[:-1] * s[1:]) < 0)
    ds = np.sign(dg)
    crit = np.flatnonzero(((s[:-1] * s[1:]) > 0) & ((ds[:-1] * ds[1:]) < 0))
    roots = []
    if sc.size:
        roots.extend(_solve_brackets(real_fn, grid[sc], grid[sc + 1], g[sc], g[sc + 1], True))
    touching = []
    if crit.size:
        c = _solve_brackets(deriv_fn, grid[crit], grid[crit + 1], dg[crit], dg[crit + 1], False)
        gc, _, scc = func(c)
        gc = gc.real
        # |g| at the critical point at rounding level: a touching (multiple) zero
        near = np.abs(gc) <= touch_tol * scc
        touching = list(c[near])
        flip = (np.sign(gc) != s[crit]) & ~near
        if flip.any():
            i = crit[flip]
            roots.extend(_solve_brackets(real_fn, grid[i], c[flip], g[i], gc[flip], True))
            roots.extend(_solve_brackets(real_fn, c[flip], grid[i + 1], gc[flip], g[i + 1], True))
    simple = sorted(float(r) for r in roots) + [float(v) for v in exact]
    everything = sorted(simple + touching)
    zeros = [Zero(complex(r + 0.0), 1) for r in simple]
    for c in touching:
        k = _local_multiplicity(func, c, everything, target)
        if k > 0:
            zeros.append(Zero(complex(c + 0.0), k))
    zeros.sort(key=lambda z: z.value.real)
    return zeros


def pair_seeds(func, grid):
    """Seeds for complex-conjugate zero pairs close to the real axis.

    At a real critical point ``c`` where ``g`` does not cross zero and
    ``g(c) g''(c) > 0``, the quadratic model ``g(c) + g''(c)(x - c)^2/2``
    vanishes at ``c +- i sqrt(2 g(c)/g''(c))``.
    """
    grid = np.asarray(grid, dtype=float)
    f, df, _ = func(grid)
    g, dg = f.real, df.real
    s, ds = np.sign(g), np.sign(dg)
    crit = np.flatnonzero(((s[:-1] * s[1:]) > 0) & ((ds[:-1] * ds[1:]) < 0))
    if crit.size == 0:
        return []

    def deriv_fn(x):
        _, dfv, _ = func(x)
        return dfv.real, None

    c = _solve_brackets(deriv_fn, grid[crit], grid[crit + 1], dg[crit], dg[crit + 1], False)
    gc = func(c)[0].real
    curv = (dg[crit + 1] - dg[crit]) / (grid[crit + 1] - grid[crit])
    ok = gc * curv > 0
    return [complex(x, math.sqrt(2 * v / k)) for x, v, k in zip(c[ok], gc[ok], curv[ok])]


def zeros_near(func, center, radius, count, grid, target="f"):
    """The ``count`` zeros of ``func`` in the disc ``|lam - center| < radius``.

    Real zeros from the grid scan, complex pairs by Newton from
    :func:`pair_seeds`; falls back to rectangle subdivision when these do not
    account for ``count``.
    """
    inside = lambda z: abs(z - center) < radius
    found = [z for z in real_zeros(func, grid, target) if inside(z.value)]
    if sum(z.multiplicity for z in found) < count:
        for seed in pair_seeds(func, grid):
            z = _newton(func, seed, region=inside)
            if z is None or abs(z.imag) <= 1e-9 * max(1.0, abs(z)):
                continue
            if any(abs(z - w.value) <= 1e-8 * max(1.0, abs(z)) for w in found):
                continue
            found += [Zero(z, 1), Zero(z.conjugate(), 1)]
    if sum(z.multiplicity for z in found) != count:
        w = radius / math.sqrt(2.0)
        zs, _ = zeros_in_rect(func, Rect(center.real - w, center.real + w, -w, w), target)
        found = [z for z in zs if inside(z.value)]
        if sum(z.multiplicity for z in found) != count:
            raise RootResolutionError(f"found {sum(z.multiplicity for z in found)} of {count} zeros near {center}")
    return _symmetrize(sorted(found, key=lambda z: (z.value.real, z.value.imag)))


def merge_zeros(*lists, rtol=1e-9):
    """Union of zero lists; coincident values add their multiplicities."""
    allz = sorted((z for lst in lists for z in lst), key=lambda z: (z.value.real, z.value.imag))
    out = []
    for z in allz:
        if out and abs(z.value - out[-1].value) <= rtol * max(1.0, abs(z.value)):
            prev = out[-1]
            out[-1] = Zero(prev.value, prev.multiplicity + z.multiplicity, prev.resolved and z.resolved)
        else:
            out.append(z)
    return out


def _scalar_route(potential):
    return potential.rotated_spec.is_diagonal()


def find_real_zeros(potential, target, window, grid=32.0, config: PropagatorConfig | None = None):
    """Real zeros of ``rho``, ``d_plus`` or ``d_minus`` in ``window``.

    Diagonal potentials are split into their two scalar problems: ``D+-``
    zeros are the union of the zeros of ``Delta_(k) -+ 1`` and zeros of
    ``rho`` are the zeros of ``(Delta_(1) - Delta_(2))/2`` counted twice.
    """
    pts = spectral_grid(potential, window, grid)
    if _scalar_route(potential):
        if target == "rho":
            if potential.rotated_spec.is_scalar():
                raise DegenerateTargetError("rho vanishes identically for a scalar-like potential")
            zs = real_zeros(target_function(potential, "split", config), pts, "split")
            return [Zero(z.value, 2 * z.multiplicity, z.resolved) for z in zs]
        sign = "+" if target == "d_plus" else "-"
        parts = [real_zeros(target_function(potential, f"scalar{k}{sign}", config), pts, f"scalar{k}{sign}")
                 for k in (1, 2)]
        return merge_zeros(*parts)
    return real_zeros(target_function(potential, target, config), pts, target)


def periodic_eigenvalues(potential, window, grid=32.0, config=None):
    """Real zeros of ``D_+`` with multiplicity."""
    return find_real_zeros(potential, "d_plus", window, grid, config)


def antiperiodic_eigenvalues(potential, window, grid=32.0, config=None):
    """Real zeros of ``D_-`` with multiplicity."""
    return find_real_zeros(potential, "d_minus", window, grid, config)


def real_resonances(potential, window, grid=32.0, config=None):
    """Real zeros of ``rho`` with multiplicity."""
    return find_real_zeros(potential, "rho", window, grid, config)


def expand(zeros):
    """Values repeated by multiplicity."""
    return [z.value.real if z.is_real else z.value for z in zeros for _ in range(z.multiplicity)]


def label_eigenvalues(zeros, periodic=True):
    """``(index, k, value)`` with the ordering convention of the periodic problem.

    Periodic: the lowest two values get index 0 and each following four get
    index ``2n``; anti-periodic: groups of four with index ``2n - 1``.  Only
    meaningful when the list starts at the bottom of the spectrum.
    """
    vals = sorted(expand(zeros))
    out = []
    if periodic:
        head, rest = vals[:2], vals[2:]
        out += [(0, k + 1, v) for k, v in enumerate(head)]
        for i, v in enumerate(rest):
            out.append((2 * (i // 4 + 1), i % 4 + 1, v))
    else:
        for i, v in enumerate(vals):
            out.append((2 * (i // 4) + 1, i % 4 + 1, v))
    return out


# --------------------------------------------------------------------------
# complex zeros


def _newton(func, z0, mult=1, tol=1e-13, max_iter=40, region=None):
    """Newton (``mult``-fold modified) from ``z0``; ``None`` if it fails or leaves ``region``."""
    z = complex(z0)
    for _ in range(max_iter):
        f, df, _ = func(np.array([z]))
        if df[0] == 0:
            return None
        step = mult * f[0] / df[0]
        z -= step
        if region is not None and not region(z):
            return None
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
    return None


_SPLITS = (0.5, 0.4367, 0.5633, 0.3791, 0.6209, 0.3, 0.7)


def _count(func, rect, target):
    return winding(func, rect, n0=32, target=target).count


def _cut(rect, frac, horiz):
    if horiz:
        m = rect.re0 + frac * (rect.re1 - rect.re0)
        return m, [Rect(rect.re0, m, rect.im0, rect.im1), Rect(m, rect.re1, rect.im0, rect.im1)]
    m = rect.im0 + frac * (rect.im1 - rect.im0)
    return m, [Rect(rect.re0, rect.re1, rect.im0, m), Rect(rect.re0, rect.re1, m, rect.im1)]


def _split(func, rect, target):
    """Split along the longer side.

    Candidate cut lines are sampled first; the one where ``|f|/scale`` stays
    farthest from zero is tried first, so cuts avoid passing next to zeros.
    """
    horiz = (rect.re1 - rect.re0) >= (rect.im1 - rect.im0)
    u = (np.arange(48) + 0.5) / 48
    lines = []
    for frac in _SPLITS:
        m, _ = _cut(rect, frac, horiz)
        if horiz:
            lines.append(m + 1j * (rect.im0 + u * (rect.im1 - rect.im0)))
        else:
            lines.append(rect.re0 + u * (rect.re1 - rect.re0) + 1j * m)
    f, df, scale = func(np.concatenate(lines))
    # distance-to-zero proxy: |f/f'| along each line, relative to the cut length
    with np.errstate(divide="ignore", invalid="ignore"):
        prox = np.abs(f / df).reshape(len(_SPLITS), -1).min(axis=1)
    prox = np.nan_to_num(prox, nan=0.0)
    # central cuts first, unless they pass much closer to a zero than the best one
    good = [k for k in range(len(_SPLITS)) if prox[k] >= 0.25 * prox.max()]
    order = good + [k for k in np.argsort(-prox) if k not in good]
    for k in order:
        _, parts = _cut(rect, _SPLITS[k], horiz)
        try:
            return [(p, _count(func, p, target)) for p in parts]
        except ContourError:
            continue
    raise RootResolutionError("no admissible subdivision line", (rect.re0, rect.re1, rect.im0, rect.im1))


def zeros_in_rect(func, rect, target="f", min_size=1e-7, max_depth=60):
    """All zeros of ``func`` inside ``rect`` by recursive subdivision."""
    total = _count(func, rect, target)
    found = []
    stack = [(rect, total, 0)]
    while stack:
        r, k, depth = stack.pop()
        if k == 0:
            continue
        grow = Rect(r.re0 - r.size, r.re1 + r.size, r.im0 - r.size, r.im1 + r.size)
        z = _newton(func, r.center, mult=k, max_iter=40 if k == 1 else 12, region=grow.contains)
        if z is not None and r.contains(z):
            if k == 1:
                found.append(Zero(z, 1))
                continue
            # a multiple zero: accept when a tiny circle holds all k
            rad = min(1e-4 * max(1.0, abs(z)), 0.25 * min(z.real - r.re0, r.re1 - z.real,
                                                          z.imag - r.im0, r.im1 - z.imag))
            try:
                if rad > 0 and winding(func, Circle(z, rad), n0=32, target=target).count == k:
                    found.append(Zero(z, k))
                    continue
            except ContourError:
                pass
        if r.size < min_size * max(1.0, abs(r.center)) or depth >= max_depth:
            found.append(Zero(r.center, k, resolved=False))
            continue
        for p, kp in _split(func, r, target):
            stack.append((p, kp, depth + 1))
    if sum(z.multiplicity for z in found) != total:
        raise RootResolutionError("zero count mismatch after subdivision")
    return sorted(found, key=lambda z: (z.value.real, z.value.imag)), total


def _symmetrize(zeros, tol=1e-9):
    """Enforce conjugate symmetry and snap near-real zeros onto the axis."""
    out, used = [], set()
    for i, z in enumerate(zeros):
        if i in used:
            continue
        v = z.value
        if abs(v.imag) <= tol * max(1.0, abs(v)):
            out.append(Zero(complex(v.real), z.multiplicity, z.resolved))
            continue
        # partner: nearest conjugate
        best, bd = None, math.inf
        for j, w in enumerate(zeros):
            if j != i and j not in used:
                d = abs(w.value - v.conjugate())
                if d < bd:
                    best, bd = j, d
        if best is not None and bd <= 1e-6 * max(1.0, abs(v)):
            used.add(best)
            m = 0.5 * (v + zeros[best].value.conjugate())
            out += [Zero(m, z.multiplicity, z.resolved), Zero(m.conjugate(), z.multiplicity, z.resolved)]
        else:
            out.append(z)
        used.add(i)
    return sorted(out, key=lambda z: (z.value.real, z.value.imag))


def complex_resonances(potential, rect: Rect, config: PropagatorConfig | None = None):
    """Zeros of ``rho`` in ``rect``; returns ``(zeros, total_count)``.

    The rectangle is inflated slightly if a zero sits on its boundary.
    """
    spec = potential.rotated_spec
    if spec.is_scalar():
        raise DegenerateTargetError("rho vanishes identically for a scalar-like potential")
    if spec.is_diagonal():
        func, target, factor = target_function(potential, "split", config), "split", 2
    else:
        func, target, factor = target_function(potential, "rho", config), "rho", 1
    pad = 0.0
    for _ in range(5):
        r = Rect(rect.re0 - pad, rect.re1 + pad, rect.im0 - pad, rect.im1 + pad)
        try:
            zs, total = zeros_in_rect(func, r, target)
            break
        except ContourError:
            pad = 1e-3 * max(1.0, r.size) if pad == 0 else 3 * pad
    else:
        raise RootResolutionError("rectangle boundary keeps hitting zeros", (rect.re0, rect.re1, rect.im0, rect.im1))
    zs = _symmetrize(zs)
    return [Zero(z.value, factor * z.multiplicity, z.resolved) for z in zs], factor * total
