"""Fundamental solution matrix of ``-y'' + V y = lambda y`` for 2x2 ``V``.

``M(x, lam) = [[theta, phi], [theta', phi']]`` with ``M(0) = I_4``.

Propagation uses frozen-potential propagators: on every cell the potential is
replaced by its midpoint value ``V_j = sum_k e_k P_k`` (spectral projectors),
and the cell propagator is exact for that constant matrix,

    [[ sum c_k P_k,        sum s_k P_k ],
     [ -sum w_k s_k P_k,   sum c_k P_k ]],   w_k = lam - e_k,

with ``c_k = cos(sqrt(w_k) h)`` and ``s_k = sin(sqrt(w_k) h)/sqrt(w_k)``.
Delta terms enter as exact jumps ``[[I, 0], [S, I]]``.  Cells where the
representation is constant (constant, piecewise-constant and outside the
bump support) are exact and never refined.  On the remaining segments the
cell count is doubled and the monodromies are Romberg-extrapolated in
``h^2`` (the midpoint scheme is time-symmetric) until successive estimates
agree to the requested relative tolerance.

The product of cell propagators is taken as a balanced tree of batched 4x4
matrix products, chunked over lambda to bound memory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entire import cos_sinc, cos_sinc_dw, csqrt
from .potential import NormalizedPotential


class PropagationError(RuntimeError):
    """Step budget exhausted before the tolerance was met."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved relative error estimate {achieved:.3e})")
        self.achieved = achieved


class SeriesError(ValueError):
    """The series oracle is only defined for potentials without delta terms."""


@dataclass(frozen=True)
class PropagatorConfig:
    base_steps: int = 64        # cells per unit length on non-constant segments
    tol: float = 1e-11          # relative acceptance of successive Romberg values
    max_steps: int = 2 ** 16
    chunk_bytes: int = 48 * 2 ** 20


DEFAULT_CONFIG = PropagatorConfig()


@dataclass
class MonodromyBatch:
    lam: np.ndarray             # (n,)
    M: np.ndarray               # (n, 4, 4)
    dM: np.ndarray | None       # (n, 4, 4) derivative in lambda, if requested
    error: np.ndarray           # (n,) relative error estimate (0 for exact)
    cells: int                  # cells on the finest level used


@dataclass(frozen=True)
class StateMatrix:
    entries: np.ndarray
    x: float
    lam: complex

    @property
    def theta(self):
        return self.entries[:2, :2]

    @property
    def phi(self):
        return self.entries[:2, 2:]

    @property
    def dtheta(self):
        return self.entries[2:, :2]

    @property
    def dphi(self):
        return self.entries[2:, 2:]


# --------------------------------------------------------------------------
# mesh


@dataclass
class _Segment:
    a: float
    b: float
    constant: bool
    m0: int  # cells at level 0


def _segments(potential: NormalizedPotential, x_end: float, base_steps: int):
    spec = potential.rotated_spec
    bps = spec.breakpoints()
    pts = []
    for k in range(int(math.ceil(x_end)) + 1):
        pts.extend(bps + k)
    pts = np.unique(np.array([p for p in pts if p < x_end] + [0.0, x_end]))
    segs = []
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0.0:
            continue
        k = math.floor(0.5 * (a + b))
        const = spec.is_constant_on(a - k, b - k)
        m0 = 1 if const else max(1, int(round(base_steps * (b - a))))
        segs.append(_Segment(float(a), float(b), const, m0))
    return segs


def _jump_positions(potential, x_end):
    out = []
    for d in potential.deltas:
        k = 0
        while True:
            p = d.x0 + k
            if p > x_end:
                break
            if p > 0.0:
                out.append((p, d.S))
            k += 1
    return out


def _program(potential, x_end, level, base_steps):
    """Ordered list of operations: ('cells', mids, widths) or ('jump', S)."""
    segs = _segments(potential, x_end, base_steps)
    jumps = _jump_positions(potential, x_end)
    mids, widths = [], []
    jumps_sorted = sorted(jumps, key=lambda t: t[0])
    ji = 0
    ops_jump = []
    for seg in segs:
        while ji < len(jumps_sorted) and jumps_sorted[ji][0] <= seg.a + 1e-15:
            ops_jump.append((len(mids), jumps_sorted[ji][1]))
            ji += 1
        m = seg.m0 if seg.constant else seg.m0 * 2 ** level
        h = (seg.b - seg.a) / m
        mids.extend(seg.a + (np.arange(m) + 0.5) * h)
        widths.extend([h] * m)
    while ji < len(jumps_sorted):
        ops_jump.append((len(mids), jumps_sorted[ji][1]))
        ji += 1
    refinable = any(not s.constant for s in segs)
    return np.array(mids), np.array(widths), ops_jump, refinable


def _spectral_split(V):
    """Eigenvalues ``e0 <= e1`` and projectors of symmetric 2x2 matrices."""
    p, q, r = V[:, 0, 0], V[:, 0, 1], V[:, 1, 1]
    mean = 0.5 * (p + r)
    d = np.hypot(0.5 * (p - r), q)
    e0, e1 = mean - d, mean + d
    P1 = np.zeros_like(V)
    nz = d > 0.0
    # projector onto the e1 eigenspace: (V - e0 I)/(e1 - e0)
    P1[nz, 0, 0] = (p[nz] - e0[nz]) / (2 * d[nz])
    P1[nz, 1, 1] = (r[nz] - e0[nz]) / (2 * d[nz])
    P1[nz, 0, 1] = q[nz] / (2 * d[nz])
    P1[nz, 1, 0] = q[nz] / (2 * d[nz])
    P0 = np.eye(2) - P1
    return e0, e1, P0, P1


def _fill(out, f0, f1, P1, r0, c0):
    """Write ``f0 I + (f1 - f0) P1`` into the 2x2 block at (r0, c0)."""
    g = f1 - f0
    out[:, :, r0, c0] = f0 + g * P1[:, None, 0, 0]
    out[:, :, r0 + 1, c0 + 1] = f0 + g * P1[:, None, 1, 1]
    off = g * P1[:, None, 0, 1]
    out[:, :, r0, c0 + 1] = off
    out[:, :, r0 + 1, c0] = off


def _cell_blocks(lam, e0, e1, P1, widths, derivative):
    """Cell propagators, shape (cells, n, 4, 4), and derivatives."""
    w0 = lam[None, :] - e0[:, None]
    w1 = lam[None, :] - e1[:, None]
    h = widths[:, None]
    if derivative:
        c0, s0, dc0, ds0 = cos_sinc_dw(w0, h)
        c1, s1, dc1, ds1 = cos_sinc_dw(w1, h)
    else:
        c0, s0 = cos_sinc(w0, h)
        c1, s1 = cos_sinc(w1, h)
    ncell, n = w0.shape
    out = np.empty((ncell, n, 4, 4), dtype=complex)
    _fill(out, c0, c1, P1, 0, 0)
    _fill(out, s0, s1, P1, 0, 2)
    _fill(out, -w0 * s0, -w1 * s1, P1, 2, 0)
    out[:, :, 2:, 2:] = out[:, :, :2, :2]
    if not derivative:
        return out, None
    dout = np.empty_like(out)
    _fill(dout, dc0, dc1, P1, 0, 0)
    _fill(dout, ds0, ds1, P1, 0, 2)
    _fill(dout, -(s0 + w0 * ds0), -(s1 + w1 * ds1), P1, 2, 0)
    dout[:, :, 2:, 2:] = dout[:, :, :2, :2]
    return out, dout


def _tree_product(A, dA=None):
    """``A[-1] @ ... @ A[0]`` (and its derivative) over the leading axis."""
    while A.shape[0] > 1:
        k = A.shape[0]
        even = k - (k % 2)
        left, right = A[1:even:2], A[0:even:2]
        prod = left @ right
        if dA is not None:
            dprod = dA[1:even:2] @ right + left @ dA[0:even:2]
        if k % 2:
            prod = np.concatenate([prod, A[-1:]], axis=0)
            if dA is not None:
                dprod = np.concatenate([dprod, dA[-1:]], axis=0)
        A = prod
        if dA is not None:
            dA = dprod
    return A[0], (None if dA is None else dA[0])


def _jump_matrix(S):
    G = np.eye(4, dtype=complex)
    G[2:, :2] = S
    return G


def _monodromy_level(potential, lam, x_end, level, config, derivative):
    mids, widths, jumps, refinable = _program(potential, x_end, level, config.base_steps)
    V = potential.evaluate_smooth(mids)
    e0, e1, _, P1 = _spectral_split(V)
    n = lam.shape[0]
    nops = len(mids) + len(jumps)
    per_lam = nops * 16 * 16 * (3 if derivative else 1.5)
    chunk = max(1, int(config.chunk_bytes // per_lam))
    M = np.empty((n, 4, 4), dtype=complex)
    dM = np.empty((n, 4, 4), dtype=complex) if derivative else None
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        blocks, dblocks = _cell_blocks(lam[sl], e0, e1, P1, widths, derivative)
        if jumps:
            nl = blocks.shape[1]
            pieces, dpieces, prev = [], [], 0
            for pos, S in jumps:
                pieces.append(blocks[prev:pos])
                pieces.append(np.broadcast_to(_jump_matrix(S), (1, nl, 4, 4)))
                if derivative:
                    dpieces.append(dblocks[prev:pos])
                    dpieces.append(np.zeros((1, nl, 4, 4), dtype=complex))
                prev = pos
            pieces.append(blocks[prev:])
            blocks = np.concatenate(pieces, axis=0)
            if derivative:
                dpieces.append(dblocks[prev:])
                dblocks = np.concatenate(dpieces, axis=0)
        P, dP = _tree_product(blocks, dblocks)
        M[sl] = P
        if derivative:
            dM[sl] = dP
    return M, dM, refinable, len(mids)


def monodromy(potential: NormalizedPotential, lam, x_end: float = 1.0,
              derivative: bool = False, config: PropagatorConfig | None = None) -> MonodromyBatch:
    """Fundamental matrix at ``x_end`` for every ``lam`` (vectorized).

    With ``derivative=True`` the lambda-derivative is propagated alongside by
    the product rule on the exact cell propagators.
    """
    config = config or DEFAULT_CONFIG
    lam = np.atleast_1d(np.asarray(lam, dtype=complex)).ravel()
    M, dM, refinable, cells = _monodromy_level(potential, lam, x_end, 0, config, derivative)
    if not refinable:
        return MonodromyBatch(lam, M, dM, np.zeros(lam.shape), cells)

    n = lam.shape[0]
    best = M.copy()
    dbest = None if dM is None else dM.copy()
    err = np.full(n, np.inf)
    active = np.arange(n)
    rows = [[(M, dM)]]  # Romberg table restricted to the active set
    level = 0
    while active.size:
        level += 1
        if cells * 2 > config.max_steps * max(1.0, x_end):
            raise PropagationError(
                f"step budget {config.max_steps} per unit length exceeded", float(np.max(err[active])))
        Mk, dMk, _, cells = _monodromy_level(potential, lam[active], x_end, level, config, derivative)
        row = [(Mk, dMk)]
        prev = rows[-1]
        for j in range(1, level + 1):
            f = 4.0 ** j - 1.0
            A, dA = row[j - 1]
            B, dB = prev[j - 1]
            R = A + (A - B) / f
            dR = None if dA is None else dA + (dA - dB) / f
            row.append((R, dR))
        new, old = row[level][0], prev[level - 1][0]
        scale = np.maximum(1.0, np.max(np.abs(new), axis=(1, 2)))
        e = np.max(np.abs(new - old), axis=(1, 2)) / scale
        err[active] = e
        best[active] = new
        if derivative:
            dbest[active] = row[level][1]
        keep = e >= config.tol
        active = active[keep]
        rows = [[(A[keep], None if dA is None else dA[keep]) for A, dA in r] for r in rows]
        rows.append([(A[keep], None if dA is None else dA[keep]) for A, dA in row])
    return MonodromyBatch(lam, best, dbest, err, cells)


def propagate(potential: NormalizedPotential, lam: complex, x_end: float = 1.0,
              config: PropagatorConfig | None = None) -> StateMatrix:
    """``M(x_end, lam)`` as a :class:`StateMatrix`."""
    if x_end <= 0:
        raise ValueError("x_end must be positive")
    res = monodromy(potential, np.array([lam]), x_end, config=config)
    return StateMatrix(res.M[0], float(x_end), complex(lam))


# --------------------------------------------------------------------------
# iteration series (oracle independent of the propagator)

@dataclass(frozen=True)
class SeriesTerm:
    n: int
    theta_n: np.ndarray
    phi_n: np.ndarray
    dtheta_n: np.ndarray
    dphi_n: np.ndarray

    def block(self):
        out = np.empty((4, 4), dtype=complex)
        out[:2, :2] = self.theta_n
        out[:2, 2:] = self.phi_n
        out[2:, :2] = self.dtheta_n
        out[2:, 2:] = self.dphi_n
        return out


class _PanelRule:
    """Composite Gauss-Legendre rule on ``[0, x]`` with cumulative weights.

    ``W[i, j]`` integrates from 0 to node ``i`` using node values ``j``: full
    Gauss weights on earlier panels and the spectral integration matrix of
    the Legendre interpolant on the panel containing node ``i``.
    """

    def __init__(self, edges, order):
        t, w = np.polynomial.legendre.leggauss(order)
        # integration matrix on [-1, 1]: int_{-1}^{t_i} l_j(s) ds
        V = np.polynomial.legendre.legvander(t, order - 1)
        Vinv = np.linalg.inv(V)
        Q = np.empty((order, order))
        for j in range(order):
            coef = Vinv[:, j]
            anti = np.polynomial.legendre.legint(coef, lbnd=-1.0)
            Q[:, j] = np.polynomial.legendre.legval(t, anti)
        P = len(edges) - 1
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        self.nodes = (mid[:, None] + half[:, None] * t).ravel()
        self.weights = (half[:, None] * w).ravel()
        G = P * order
        W = np.zeros((G, G))
        for p in range(P):
            rows = slice(p * order, (p + 1) * order)
            W[rows, : p * order] = self.weights[: p * order]
            W[rows, p * order:(p + 1) * order] = half[p] * Q
        self.W = W


def _series_rule(potential, x, lam, order=16):
    spec = potential.rotated_spec
    z = abs(csqrt(lam))
    kmax = max([f.k for f in spec.fourier], default=0)
    per_unit = max(16, int(math.ceil(1.5 * (z + 2 * math.pi * kmax) + 8)))
    bps = []
    for k in range(int(math.ceil(x)) + 1):
        bps.extend(spec.breakpoints() + k)
    bps = np.unique(np.array([b for b in bps if b < x] + [0.0, x]))
    edges = [0.0]
    for a, b in zip(bps[:-1], bps[1:]):
        dens = per_unit
        for bt in spec.bumps:
            dens = max(dens, int(math.ceil(8.0 / bt.nu)))
        m = max(1, int(math.ceil(dens * (b - a))))
        edges.extend(list(np.linspace(a, b, m + 1)[1:]))
    return _PanelRule(np.array(edges), order)


def _series_all(potential, lam, x, N):
    """All iterates ``0..N`` at the endpoint ``x``."""
    if potential.deltas:
        raise SeriesError("series oracle requires a potential without delta terms")
    lam = complex(lam)
    rule = _series_rule(potential, x, lam)
    u = rule.nodes
    V = potential.evaluate_smooth(u).astype(complex)          # (G, 2, 2)
    cf, sf = cos_sinc(lam, u)                                  # cos(z u), sin(z u)/z
    # kernel K(t_i - u_j) = sin(z (t_i - u_j))/z for t_i > u_j
    diff = u[:, None] - u[None, :]
    Kc, Ks = cos_sinc(lam, np.abs(diff))
    Ks = np.sign(diff) * Ks
    ce, se = cos_sinc(lam, x - u)
    KW = rule.W * Ks
    I = np.eye(2)
    theta = cf[:, None, None] * I
    phi = sf[:, None, None] * I
    c_end, s_end = cos_sinc(lam, x)
    out = [SeriesTerm(0, c_end * I, s_end * I, -lam * s_end * I, c_end * I)]
    wts = rule.weights
    for n in range(1, N + 1):
        g_th = V @ theta
        g_ph = V @ phi
        term = SeriesTerm(
            n,
            np.einsum("j,jab->ab", wts * se, g_th),
            np.einsum("j,jab->ab", wts * se, g_ph),
            np.einsum("j,jab->ab", wts * ce, g_th),
            np.einsum("j,jab->ab", wts * ce, g_ph),
        )
        out.append(term)
        theta = np.einsum("ij,jab->iab", KW, g_th)
        phi = np.einsum("ij,jab->iab", KW, g_ph)
    return out


def series_term(potential: NormalizedPotential, lam: complex, x: float, n: int) -> SeriesTerm:
    """``n``-th iterate ``theta_n, phi_n`` (and x-derivatives) at ``x``.

    ``theta_{n+1}(x) = int_0^x sin(z(x-t))/z V(t) theta_n(t) dt`` and likewise for
    ``phi``, computed on a composite 16-point Gauss-Legendre panel mesh with
    spectral integration on the partial panel.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _series_all(potential, lam, x, n)[n]


def series_sum(potential: NormalizedPotential, lam: complex, x: float, N: int) -> np.ndarray:
    """4x4 partial sum of the iterates ``0..N``."""
    terms = _series_all(potential, lam, x, N)
    return sum(t.block() for t in terms)


def series_bound(potential: NormalizedPotential | float, lam: complex, x: float, N: int) -> float:
    """``(x kappa)^{N+1}/(N+1)! A^x`` with ``kappa = ||V||_1/sqrt(max(1,|lam|))``.

    ``A = exp(|Im sqrt(lam)| + kappa)``.  Accepts a potential or its L1 norm.
    """
    if N < -1:
        raise ValueError("N must be >= -1")
    l1 = potential if isinstance(potential, (int, float)) else potential.l1_norm
    kappa = l1 / math.sqrt(max(1.0, abs(lam)))
    A = math.exp(abs(csqrt(lam).imag) + kappa)
    return (x * kappa) ** (N + 1) / math.factorial(N + 1) * A ** x


def series_deviation(M: np.ndarray, partial: np.ndarray, lam: complex) -> float:
    """Largest block-wise deviation in the scaling of the series bound.

    Blocks: ``theta``, ``sqrt(lam) phi``, ``theta'/sqrt(lam)``, ``phi'``, each in
    the 2x2 operator norm.
    """
    z = csqrt(lam)
    D = M - partial
    blocks = [D[:2, :2], z * D[:2, 2:], D[2:, :2] / z, D[2:, 2:]]
    return max(np.linalg.norm(b, 2) for b in blocks)


def _double_integral_I(potential, lam, m, kernel=None):
    """``I_m = int_0^m dt int_0^t cos(z(m - 2t + 2s)) Tr V(t)V(s) ds``."""
    rule = _series_rule(potential, float(m), lam)
    u = rule.nodes
    V = potential.evaluate_smooth(u)
    F = np.einsum("iab,jab->ij", V, V)      # Tr V(t) V(s) for symmetric V
    if kernel is None:
        T, S = u[:, None], u[None, :]
        K, _ = cos_sinc(lam, m - 2 * T + 2 * S)
    else:
        K = kernel(u[:, None], u[None, :])
    inner = np.sum(rule.W * K * F, axis=1)  # int_0^{t_i} ... ds
    return complex(np.sum(rule.weights * inner))


def i_m0(potential: NormalizedPotential, lam: complex, m: int = 1) -> complex:
    """The double integral entering the second-order trace expansion."""
    return _double_integral_I(potential, lam, m)


def trace_expansion(potential: NormalizedPotential, lam: complex, m: int, order: int) -> complex:
    """Truncated expansion of ``mu_m = Tr M^m / 4`` of order 0, 1 or 2.

    ``cos mz + (sin mz/(4z)) m V(1) + (I_m - (m^2 cos mz / 2) V(2))/(8 z^2)``,
    ``z = sqrt(lam)``.  ``I_2`` is obtained from ``I_1`` through
    ``I_2 = 4 I_1 cos z``.  At ``lam = 0`` the removable singularity is taken
    by its limit.
    """
    if m not in (1, 2) or order not in (0, 1, 2):
        raise ValueError("m must be 1 or 2 and order 0, 1 or 2")
    lam = complex(lam)
    cmz, smz = cos_sinc(lam, float(m))          # cos(mz), sin(mz)/z
    val = cmz
    if order >= 1:
        val = val + smz * m * potential.v1 / 4.0
    if order >= 2:
        if lam == 0:
            # limit: (1/8)(-1/2 int int (m-2t+2s)^2 F + m^4/4 V2)
            J2 = _double_integral_I(potential, 0.0, m,
                                    kernel=lambda t, s: (m - 2 * t + 2 * s) ** 2)
            val = val + (-0.5 * J2 + m ** 4 * potential.v2 / 4.0) / 8.0
        else:
            I1 = i_m0(potential, lam, 1)
            c1, _ = cos_sinc(lam, 1.0)
            Im = I1 if m == 1 else 4.0 * I1 * c1
            val = val + (Im - 0.5 * m * m * cmz * potential.v2) / (8.0 * lam)
    return complex(val)


def trace_bound(potential: NormalizedPotential, lam: complex, m: int, order: int) -> float:
    """Error bounds of the trace expansions: ``m k A^m``, ``(m k)^2/2 A^m``, ``(m k)^3/6 A^m``."""
    kappa = potential.l1_norm / math.sqrt(max(1.0, abs(lam)))
    A = math.exp(abs(csqrt(lam).imag) + kappa)
    return (m * kappa) ** (order + 1) / math.factorial(order + 1) * A ** m
