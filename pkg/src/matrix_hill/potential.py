"""Periodic symmetric 2x2 potentials: parsing, normalization, evaluation.

A potential is a smooth (or piecewise-constant) part plus a finite comb of
delta terms ``S delta(x - x0)`` per period.  The smooth part is stored as a
sum of simple pieces so every piece can be rotated by a constant orthogonal
matrix and integrated exactly or by fixed quadrature:

* a constant matrix,
* Fourier terms ``C_k cos(2 pi k x) + S_k sin(2 pi k x)``,
* bumps ``B v_nu(x - x_c)`` built from the compactly supported C-infinity bump,
* midpoint samples on a uniform grid (piecewise constant).

Normalization rotates everything so that the mean matrix is
``diag(V10, V20)`` with ``V10 <= V20``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np
from scipy import integrate

J = np.array([[1.0, 0.0], [0.0, -1.0]])
J1 = np.array([[0.0, 1.0], [1.0, 0.0]])
I2 = np.eye(2)

MAX_HARMONICS = 64
MAX_SAMPLES = 2 ** 16


class PotentialSpecError(ValueError):
    """Raised for malformed or non-symmetric potential descriptions."""


# --------------------------------------------------------------------------
# the bump w(t) = C exp(-1/(1-t^2)) on (-1, 1), normalized to unit mass

def _raw_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


BUMP_MASS = integrate.quad(lambda t: math.exp(-1.0 / (1.0 - t * t)) if abs(t) < 1.0 else 0.0,
                           -1.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
BUMP_CONST = 1.0 / BUMP_MASS


def bump(t):
    """Unit-mass bump ``w(t)`` supported on ``(-1, 1)``."""
    return BUMP_CONST * _raw_bump(t)


def bump_profile(x, center=0.5, nu=0.1):
    """``v_nu(x) = w((x - center)/nu)/nu``, periodized with period 1."""
    x = np.asarray(x, dtype=float)
    d = (x - center + 0.5) % 1.0 - 0.5
    return bump(d / nu) / nu


# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierTerm:
    k: int
    cos: np.ndarray  # 2x2 symmetric
    sin: np.ndarray


@dataclass(frozen=True)
class BumpTerm:
    center: float
    nu: float
    matrix: np.ndarray

    @property
    def support(self):
        return self.center - self.nu, self.center + self.nu


@dataclass(frozen=True)
class DeltaTerm:
    x0: float
    S: np.ndarray


@dataclass(frozen=True)
class PotentialSpec:
    """Validated potential description.

    ``samples`` (if given) has shape ``(n, 2, 2)`` and holds the value on the
    cell ``[j/n, (j+1)/n)``.
    """

    constant: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    fourier: tuple[FourierTerm, ...] = ()
    bumps: tuple[BumpTerm, ...] = ()
    samples: np.ndarray | None = None
    deltas: tuple[DeltaTerm, ...] = ()
    label: str = "custom"

    def rotated(self, U):
        """Return the PotentialSpec of ``U^T V U`` for a constant orthogonal ``U``."""
        U = np.asarray(U, dtype=float)

        def rot(A):
            return U.T @ A @ U

        samples = None
        if self.samples is not None:
            samples = np.einsum("ji,njk,kl->nil", U, self.samples, U)
        return replace(
            self,
            constant=rot(self.constant),
            fourier=tuple(FourierTerm(f.k, rot(f.cos), rot(f.sin)) for f in self.fourier),
            bumps=tuple(BumpTerm(b.center, b.nu, rot(b.matrix)) for b in self.bumps),
            samples=samples,
            deltas=tuple(DeltaTerm(d.x0, rot(d.S)) for d in self.deltas),
        )

    # ---- derived structure

    def smooth_mean(self):
        m = self.constant.copy()
        for b in self.bumps:
            m = m + b.matrix
        if self.samples is not None:
            m = m + self.samples.mean(axis=0)
        return m

    def mean_matrix(self):
        """Mean over one period, delta terms included."""
        m = self.smooth_mean()
        for d in self.deltas:
            m = m + d.S
        return m

    def evaluate_smooth(self, x):
        """Smooth part at ``x`` (periodic), shape ``x.shape + (2, 2)``."""
        x = np.asarray(x, dtype=float)
        xr = np.mod(x, 1.0)
        out = np.broadcast_to(self.constant, x.shape + (2, 2)).copy()
        for f in self.fourier:
            arg = 2.0 * np.pi * f.k * xr
            out += np.cos(arg)[..., None, None] * f.cos + np.sin(arg)[..., None, None] * f.sin
        for b in self.bumps:
            out += bump_profile(xr, b.center, b.nu)[..., None, None] * b.matrix
        if self.samples is not None:
            n = self.samples.shape[0]
            idx = np.minimum((xr * n).astype(int), n - 1)
            out += self.samples[idx]
        return out

    def breakpoints(self):
        """Sorted points in ``[0, 1]`` where the representation changes form."""
        pts = {0.0, 1.0}
        pts.update(d.x0 for d in self.deltas)
        for b in self.bumps:
            lo, hi = b.support
            pts.update((lo, hi))
        if self.samples is not None:
            n = self.samples.shape[0]
            pts.update(np.arange(n + 1) / n)
        return np.array(sorted(pts))

    def is_constant_on(self, a, b):
        """True if the smooth part is constant on ``(a, b)`` (a sub-cell)."""
        if self.fourier:
            return False
        for bt in self.bumps:
            lo, hi = bt.support
            if a < hi and b > lo:
                return False
        return True

    @property
    def has_deltas(self):
        return len(self.deltas) > 0

    def is_diagonal(self):
        """True if the off-diagonal entry vanishes identically."""
        mats = [self.constant]
        mats += [f.cos for f in self.fourier] + [f.sin for f in self.fourier]
        mats += [b.matrix for b in self.bumps] + [d.S for d in self.deltas]
        if any(abs(m[0, 1]) > 0.0 for m in mats):
            return False
        if self.samples is not None and np.any(self.samples[:, 0, 1] != 0.0):
            return False
        return True

    def is_scalar(self):
        """True if ``V = v(x) I`` (then the two sheets coincide and rho == 0)."""
        if not self.is_diagonal():
            return False
        mats = [self.constant]
        mats += [f.cos for f in self.fourier] + [f.sin for f in self.fourier]
        mats += [b.matrix for b in self.bumps] + [d.S for d in self.deltas]
        if any(m[0, 0] != m[1, 1] for m in mats):
            return False
        if self.samples is not None and np.any(self.samples[:, 0, 0] != self.samples[:, 1, 1]):
            return False
        return True

    def is_zero(self):
        return self.l1_smooth() == 0.0 and all(not np.any(d.S) for d in self.deltas)

    def l1_smooth(self, panels=512, order=8):
        """``int_0^1 (|V1| + |V2| + 2|V3|) dx`` of the smooth part.

        Exact for piecewise-constant representations, composite Gauss-Legendre
        on the breakpoint partition otherwise.
        """
        def weight(V):
            return np.abs(V[..., 0, 0]) + np.abs(V[..., 1, 1]) + 2.0 * np.abs(V[..., 0, 1])

        bps = self.breakpoints()
        if not self.fourier and not self.bumps:
            mids = 0.5 * (bps[1:] + bps[:-1])
            return float(np.sum(weight(self.evaluate_smooth(mids)) * np.diff(bps)))
        t, w = np.polynomial.legendre.leggauss(order)
        total = 0.0
        for a, b in zip(bps[:-1], bps[1:]):
            if b <= a:
                continue
            if self.is_constant_on(a, b):
                total += float(weight(self.evaluate_smooth(0.5 * (a + b)))) * (b - a)
                continue
            m = max(1, int(math.ceil(panels * (b - a))))
            edges = np.linspace(a, b, m + 1)
            half = 0.5 * np.diff(edges)
            nodes = (0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * t
            vals = weight(self.evaluate_smooth(nodes))
            total += float(np.sum(vals * (half[:, None] * w)))
        return total


def _sym(entry, name):
    A = np.asarray(entry, dtype=float)
    if A.shape != (2, 2):
        raise PotentialSpecError(f"{name}: expected a 2x2 matrix")
    if A[0, 1] != A[1, 0]:
        raise PotentialSpecError(f"{name}: matrix is not symmetric")
    if not np.all(np.isfinite(A)):
        raise PotentialSpecError(f"{name}: non-finite entry")
    return A


def _entry_matrix(v1, v2, v3):
    return np.array([[v1, v3], [v3, v2]], dtype=float)


def _parse_fourier(block):
    if not isinstance(block, Mapping):
        raise PotentialSpecError("fourier: expected a mapping with V1, V2, V3")
    unknown = set(block) - {"V1", "V2", "V3"}
    if unknown:
        raise PotentialSpecError(f"fourier: unknown keys {sorted(unknown)}")
    terms: dict[int, list[np.ndarray]] = {}
    constant = np.zeros((2, 2))
    slots = {"V1": (0, 0), "V2": (1, 1), "V3": (0, 1)}
    for key, (i, j) in slots.items():
        for row in block.get(key, []):
            if len(row) != 3:
                raise PotentialSpecError(f"fourier.{key}: rows must be [k, ck, sk]")
            k, ck, sk = row
            if int(k) != k or k < 0:
                raise PotentialSpecError(f"fourier.{key}: harmonic index must be a nonnegative integer")
            k = int(k)
            if k > MAX_HARMONICS:
                raise PotentialSpecError(f"fourier.{key}: harmonic {k} exceeds cap {MAX_HARMONICS}")
            if not (math.isfinite(ck) and math.isfinite(sk)):
                raise PotentialSpecError(f"fourier.{key}: non-finite coefficient")
            if k == 0:
                constant[i, j] += ck
                if i != j:
                    constant[j, i] += ck
                continue
            C, S = terms.setdefault(k, [np.zeros((2, 2)), np.zeros((2, 2))])
            C[i, j] += ck
            S[i, j] += sk
            if i != j:
                C[j, i] += ck
                S[j, i] += sk
    fourier = tuple(FourierTerm(k, C, S) for k, (C, S) in sorted(terms.items()))
    return constant, fourier


def _parse_samples(block):
    try:
        n = int(block["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PotentialSpecError("samples: integer 'n' required") from exc
    if n < 1 or n & (n - 1) or n > MAX_SAMPLES:
        raise PotentialSpecError("samples: n must be a power of two (at most 2^16)")
    arrs = []
    for key in ("V1", "V2", "V3"):
        v = np.asarray(block.get(key, np.zeros(n)), dtype=float)
        if v.shape != (n,):
            raise PotentialSpecError(f"samples.{key}: expected {n} values")
        if not np.all(np.isfinite(v)):
            raise PotentialSpecError(f"samples.{key}: non-finite value")
        arrs.append(v)
    v1, v2, v3 = arrs
    out = np.empty((n, 2, 2))
    out[:, 0, 0] = v1
    out[:, 1, 1] = v2
    out[:, 0, 1] = v3
    out[:, 1, 0] = v3
    return out


def _parse_smooth(block):
    if not isinstance(block, Mapping) or len(block) == 0:
        raise PotentialSpecError("smooth: expected a mapping")
    if "builtin" in block:
        name = block["builtin"]
        if name == "zero":
            return dict(label="zero")
        if name == "constant_diag":
            a = float(block["a"])
            return dict(constant=a * J, label=f"constant_diag(a={a!r})")
        if name == "smoothed_delta":
            a, g, nu = float(block["a"]), float(block["gamma"]), float(block["nu"])
            if not (0.0 < nu < 0.5):
                raise PotentialSpecError("smoothed_delta: nu must lie in (0, 1/2)")
            return dict(constant=a * J, bumps=(BumpTerm(0.5, nu, g * J1),),
                        label=f"smoothed_delta(a={a!r}, gamma={g!r}, nu={nu!r})")
        raise PotentialSpecError(f"smooth: unknown builtin {name!r}")
    if "fourier" in block:
        constant, fourier = _parse_fourier(block["fourier"])
        return dict(constant=constant, fourier=fourier, label="fourier")
    if "samples" in block:
        return dict(samples=_parse_samples(block["samples"]), label="samples")
    raise PotentialSpecError("smooth: expected one of builtin, fourier, samples")


def _parse_deltas(items):
    if not isinstance(items, (list, tuple)):
        raise PotentialSpecError("delta: expected a list")
    out = []
    for k, item in enumerate(items):
        if "x0" not in item:
            raise PotentialSpecError(f"delta[{k}]: x0 required")
        x0 = float(item["x0"])
        if not (0.0 <= x0 < 1.0):
            raise PotentialSpecError(f"delta[{k}]: x0 must lie in [0, 1)")
        if "S" in item:
            S = _sym(item["S"], f"delta[{k}].S")
        elif "gamma" in item:
            S = float(item["gamma"]) * J1
        else:
            raise PotentialSpecError(f"delta[{k}]: need gamma or S")
        out.append(DeltaTerm(x0, S))
    xs = [d.x0 for d in out]
    if len(set(xs)) != len(xs):
        raise PotentialSpecError("delta: locations must be distinct")
    return tuple(sorted(out, key=lambda d: d.x0))


def parse_potential_spec(text: str | Mapping[str, Any]) -> PotentialSpec:
    """Parse and validate a potential document (JSON text or mapping)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PotentialSpecError(f"not valid JSON: {exc}") from exc
    else:
        doc = text
    if not isinstance(doc, Mapping):
        raise PotentialSpecError("top level must be a mapping")
    unknown = set(doc) - {"smooth", "delta", "name"}
    if unknown:
        raise PotentialSpecError(f"unknown top-level keys {sorted(unknown)}")
    if "smooth" not in doc:
        raise PotentialSpecError("'smooth' is required")
    try:
        kw = _parse_smooth(doc["smooth"])
        deltas = _parse_deltas(doc.get("delta", []))
    except (KeyError, TypeError) as exc:
        raise PotentialSpecError(f"schema violation: {exc}") from exc
    spec = PotentialSpec(deltas=deltas, **kw)
    if deltas:
        spec = replace(spec, label=spec.label + f" + {len(deltas)} delta")
    if "name" in doc:
        spec = replace(spec, label=str(doc["name"]))
    return spec


def load_potential(path) -> "NormalizedPotential":
    with open(path) as fh:
        return normalize_potential(parse_potential_spec(fh.read()))


# --------------------------------------------------------------------------

def mean_rotation(m):
    """Orthogonal ``U`` with ``U^T m U = diag(e1, e2)``, ``e1 <= e2``.

    Explicit 2x2 formula; a scalar mean keeps the identity and a diagonal mean
    only permutes its entries.
    """
    p, q, r = float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1])
    if q == 0.0:
        if p <= r:
            return np.eye(2)
        return J1.copy()
    phi = 0.5 * math.atan2(2.0 * q, p - r)
    # phi diagonalizes with the larger eigenvalue first; shift by pi/2
    phi = phi - 0.5 * math.pi if phi > 0 else phi + 0.5 * math.pi
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class NormalizedPotential:
    """A potential rotated so its mean matrix is ``diag(V10, V20)``."""

    rotated_spec: PotentialSpec
    rotation: np.ndarray
    mean_diag: tuple[float, float]
    c0: float
    v1: float
    v2: float
    l1_norm: float

    def evaluate_smooth(self, x):
        return self.rotated_spec.evaluate_smooth(x)

    @property
    def deltas(self):
        return self.rotated_spec.deltas

    @property
    def label(self):
        return self.rotated_spec.label

    def metadata(self):
        return {
            "label": self.label,
            "rotation": self.rotation.tolist(),
            "mean_diag": list(self.mean_diag),
            "c0": self.c0,
            "l1_norm": self.l1_norm,
        }


def normalize_potential(spec: PotentialSpec) -> NormalizedPotential:
    """Rotate to a diagonal mean and compute ``V10, V20, c0, V(1), V(2), ||V||_1``."""
    U = mean_rotation(spec.mean_matrix())
    rot = spec.rotated(U)
    m = rot.mean_matrix()
    # the off-diagonal mean is zero up to rounding; the diagonal is exact
    e1, e2 = float(m[0, 0]), float(m[1, 1])
    c0 = 0.5 * (e2 - e1)
    l1 = rot.l1_smooth()
    for d in rot.deltas:
        l1 += abs(d.S[0, 0]) + abs(d.S[1, 1]) + 2.0 * abs(d.S[0, 1])
    return NormalizedPotential(
        rotated_spec=rot,
        rotation=U,
        mean_diag=(e1, e2),
        c0=c0,
        v1=e1 + e2,
        v2=e1 * e1 + e2 * e2,
        l1_norm=float(l1),
    )


def evaluate_smooth(potential: NormalizedPotential, x):
    """Smooth part of the normalized potential at ``x`` (delta terms excluded)."""
    return potential.evaluate_smooth(x)


# convenience constructors --------------------------------------------------

def zero_potential() -> NormalizedPotential:
    return normalize_potential(parse_potential_spec({"smooth": {"builtin": "zero"}}))


def constant_potential(a: float) -> NormalizedPotential:
    return normalize_potential(parse_potential_spec({"smooth": {"builtin": "constant_diag", "a": a}}))


def delta_comb_potential(a: float, gamma: float, x0: float = 0.5) -> NormalizedPotential:
    doc = {"smooth": {"builtin": "constant_diag", "a": a}, "delta": [{"x0": x0, "gamma": gamma}]}
    return normalize_potential(parse_potential_spec(doc))


def fourier_potential(V1=(), V2=(), V3=()) -> NormalizedPotential:
    doc = {"smooth": {"fourier": {"V1": [list(r) for r in V1],
                                  "V2": [list(r) for r in V2],
                                  "V3": [list(r) for r in V3]}}}
    return normalize_potential(parse_potential_spec(doc))
