"""Entire functions of the spectral parameter.

``cos(sqrt(w) x)`` and ``sin(sqrt(w) x)/sqrt(w)`` are even in ``sqrt(w)`` and
therefore entire in ``w``.  They are evaluated through the principal square
root away from ``w = 0`` and through a Taylor series near it, so no branch
artifacts appear along the negative real axis.
"""
from __future__ import annotations

import numpy as np

# |w x^2| below this uses the Taylor series
_SERIES_RADIUS = 1e-2
_N_TERMS = 10


def _taylor_coeffs():
    # cos: sum (-u)^k/(2k)!, sinc: sum (-u)^k/(2k+1)!, u = w x^2
    from math import factorial

    c = np.array([(-1.0) ** k / factorial(2 * k) for k in range(_N_TERMS)])
    s = np.array([(-1.0) ** k / factorial(2 * k + 1) for k in range(_N_TERMS)])
    # d/du of the sinc series
    ds = np.array([(-1.0) ** k * k / factorial(2 * k + 1) for k in range(1, _N_TERMS)])
    return c, s, ds


_C_COEF, _S_COEF, _DS_COEF = _taylor_coeffs()


def csqrt(w):
    """Principal square root with ``sqrt(1) = 1`` (cut along the negative axis)."""
    return np.sqrt(np.asarray(w, dtype=complex))


def cos_sinc(w, x=1.0):
    """Return ``(cos(sqrt(w) x), sin(sqrt(w) x)/sqrt(w))`` for complex ``w``.

    Both are entire in ``w``.  ``x`` is a real length (scalar or broadcastable).
    """
    w, x = np.broadcast_arrays(np.asarray(w, dtype=complex), np.asarray(x, dtype=float))
    shape = w.shape
    w, x = w.ravel(), x.ravel()
    u = w * x * x
    small = np.abs(u) < _SERIES_RADIUS
    z = np.sqrt(np.where(small, 1.0, w))
    # one exponential serves both; |u| >= 1e-2 keeps the difference well conditioned
    E = np.exp(1j * z * x)
    Ei = 1.0 / E
    c = 0.5 * (E + Ei)
    s = (E - Ei) / (2j * z)
    if np.any(small):
        us = u[small]
        c[small] = np.polynomial.polynomial.polyval(us, _C_COEF)
        s[small] = x[small] * np.polynomial.polynomial.polyval(us, _S_COEF)
    return c.reshape(shape), s.reshape(shape)


def cos_sinc_dw(w, x=1.0):
    """Values and ``w``-derivatives of :func:`cos_sinc`.

    Returns ``(c, s, dc, ds)`` where ``dc = -x s / 2`` and
    ``ds = (x c - s)/(2 w)``, the latter through its series near ``w = 0``.
    """
    w, x = np.broadcast_arrays(np.asarray(w, dtype=complex), np.asarray(x, dtype=float))
    shape = w.shape
    w, x = w.ravel(), x.ravel()
    c, s = cos_sinc(w, x)
    dc = -0.5 * x * s
    u = w * x * x
    small = np.abs(u) < _SERIES_RADIUS
    with np.errstate(invalid="ignore", divide="ignore"):
        ds = (x * c - s) / (2.0 * np.where(small, 1.0, w))
    if np.any(small):
        us = u[small]
        ds[small] = x[small] ** 3 * np.polynomial.polynomial.polyval(us, _DS_COEF)
    return c.reshape(shape), s.reshape(shape), dc.reshape(shape), ds.reshape(shape)
