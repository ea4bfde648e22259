"""Helmholtz fundamental solution, its gradient and the difference kernels.

Scalar ``_``-prefixed functions are numba-compiled and shared with the
assembly loops.  Gradients are expressed through radial factors ``g``
with ``grad_x = (x - y) * g(r)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

FOUR_PI = 4.0 * math.pi
SWITCH = 0.5
MAX_TERMS = 25
SERIES_TOL = 1e-16


@dataclass(frozen=True)
class Wavenumbers:
    """Exterior wavenumber ``k`` and contrast ``n``; ``k1 = k sqrt(n)``."""

    k: complex
    n: float

    def __post_init__(self):
        k = complex(self.k)
        if k.imag == 0.0 and k.real <= 0.0:
            raise ValueError(f"wavenumber {k} lies on the branch cut (-inf, 0]")
        n = float(self.n)
        if not n > 0.0 or n == 1.0:
            raise ValueError(f"contrast must be positive and different from 1, got {self.n}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", n)

    @property
    def k1(self) -> complex:
        return self.k * math.sqrt(self.n)

    @classmethod
    def unchecked(cls, k, n):
        """Build without validation, e.g. ``n = 1`` for consistency checks."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "k", complex(k))
        object.__setattr__(obj, "n", float(n))
        return obj


# ----------------------------------------------------------------------------- compiled kernels

@njit(cache=True, nogil=True)
def _cexpm1(z):
    x = z.real
    y = z.imag
    s = math.sin(0.5 * y)
    re = math.expm1(x) * math.cos(y) - 2.0 * s * s
    im = math.exp(x) * math.sin(y)
    return complex(re, im)


@njit(cache=True, nogil=True)
def _cis(k, r):
    """``exp(i k r)`` for complex ``k`` and real ``r``."""
    ar = k.real * r
    ai = k.imag * r
    if ai == 0.0:
        return complex(math.cos(ar), math.sin(ar))
    mag = math.exp(-ai)
    return complex(mag * math.cos(ar), mag * math.sin(ar))


@njit(cache=True, nogil=True)
def _phi(k, r):
    return cmath.exp(1j * k * r) / (FOUR_PI * r)


@njit(cache=True, nogil=True)
def _grad_phi_factor(k, r):
    # grad_x Phi = (x - y) * this
    return (1j * k - 1.0 / r) * cmath.exp(1j * k * r) / (FOUR_PI * r * r)


@njit(cache=True, nogil=True)
def _use_series(k, k1, r):
    return abs(k) * r < SWITCH and abs(k1) * r < SWITCH


@njit(cache=True, nogil=True)
def _diff_pair(k, k1, r):
    """``(Phi_k1 - Phi_k, g)`` with ``grad_x (Phi_k1 - Phi_k) = (x - y) g``."""
    dk = k1 - k
    if _use_series(k, k1, r):
        # t_m = i^m (k1^m - k^m) r^(m-1) / m!;  value = sum t_m,
        # g = sum (m - 1) t_m / r^2
        c = dk
        kp = 1.0 + 0j
        fac = 1j
        val = fac * c
        gsum = 0j
        for m in range(2, MAX_TERMS + 1):
            kp = kp * k
            c = k1 * c + kp * dk
            fac = fac * 1j * r / m
            t = fac * c
            val += t
            gsum += (m - 1) * t
            if abs(t) < SERIES_TOL * abs(val) and (m - 1) * abs(t) <= SERIES_TOL * abs(gsum):
                break
        if r == 0.0:
            return val / FOUR_PI, 0j
        return val / FOUR_PI, gsum / (FOUR_PI * r * r)
    e1 = _cis(k1, r)
    if abs(dk) * r < SWITCH:
        em = _cis(k, r) * _cexpm1(1j * dk * r)
    else:
        em = e1 - _cis(k, r)
    inv = 1.0 / (FOUR_PI * r)
    return em * inv, (1j * dk * e1 + 1j * k * em - em / r) * inv / r


@njit(cache=True, nogil=True)
def _phi_diff(k, k1, r):
    return _diff_pair(k, k1, r)[0]


@njit(cache=True, nogil=True)
def _grad_phi_diff_factor(k, k1, r):
    return _diff_pair(k, k1, r)[1]


# ----------------------------------------------------------------------------- public API

def phi(k, r):
    """``exp(i k r) / (4 pi r)`` for ``r > 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("phi requires r > 0")
    out = np.exp(1j * complex(k) * r) / (FOUR_PI * r)
    return out[()] if out.ndim == 0 else out


def phi_diff(w: Wavenumbers, r):
    """``Phi_{k1} - Phi_k`` evaluated stably, including ``r = 0``."""
    k, k1 = complex(w.k), complex(w.k1)
    r = np.asarray(r, dtype=float)
    flat = np.array([_phi_diff(k, k1, float(x)) for x in r.ravel()], dtype=complex)
    out = flat.reshape(r.shape)
    return out[()] if out.ndim == 0 else out


def grad_phi(k, x, y):
    """``grad_x Phi_k(x, y)``; raises for coincident points."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0):
        raise ValueError("grad_phi undefined at coincident points")
    k = complex(k)
    g = (1j * k - 1.0 / r) * np.exp(1j * k * r) / (FOUR_PI * r * r)
    return d * np.asarray(g)[..., None]


def grad_phi_diff(w: Wavenumbers, x, y):
    """``grad_x (Phi_{k1} - Phi_k)``; bounded, zero at ``x = y``."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    k, k1 = complex(w.k), complex(w.k1)
    g = np.array([_grad_phi_diff_factor(k, k1, float(v)) for v in np.ravel(r)], dtype=complex)
    return d * g.reshape(np.shape(r))[..., None]
