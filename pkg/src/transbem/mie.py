"""Separation-of-variables oracle for transmission eigenvalues of a ball.

Fields are built from Debye potentials ``u = z_l(kappa r) Y_lm``:

* TE: ``E = grad u x x``; its tangential part on ``|x| = R`` is
  proportional to ``z_l(kappa R)`` and that of ``curl E`` to
  ``psi_l'(kappa R) / R`` with the Riccati function ``psi_l(z) = z z_l(z)``.
* TM: ``E = curl(grad u x x)``; the roles swap and ``curl curl E =
  kappa^2 E`` brings in a factor ``kappa^2``.

Matching the tangential traces of the regular field with ``kappa = k1``
against the one with ``kappa = k`` gives the 2x2 determinants::

    TE(k) = j_l(k1 R) psi_l'(k R) - j_l(k R) psi_l'(k1 R)
    TM(k) = k^2 j_l(k R) psi_l'(k1 R) - k1^2 j_l(k1 R) psi_l'(k R)

with ``psi_l(z) = z j_l(z)``.  :func:`verify_root` re-derives both trace
conditions from explicit Cartesian fields (sympy) at a computed root.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect, minimize_scalar

TE, TM = "TE", "TM"
GRID_STEP = 0.01
ROOT_TOL = 1e-12


class OracleError(ValueError):
    pass


class SphericalBessel(NamedTuple):
    j: complex
    y: complex
    h1: complex
    dj: complex  # [z j_l(z)]'
    dy: complex
    dh1: complex


def _j_table(lmax: int, z: complex) -> np.ndarray:
    """``j_0..j_lmax`` at ``z``.

    Upward recurrence only for real ``z`` with ``|z| > lmax``, where it is
    stable; Miller's downward recurrence otherwise (upward loses digits
    for complex ``z`` with a large imaginary part even when ``|z| > l``).
    """
    out = np.empty(lmax + 2, dtype=complex)
    j0 = cmath.sin(z) / z
    j1 = cmath.sin(z) / (z * z) - cmath.cos(z) / z
    if z.imag == 0.0 and abs(z) >= lmax + 1:
        out[0], out[1] = j0, j1
        for l in range(1, lmax + 1):
            out[l + 1] = (2 * l + 1) / z * out[l] - out[l - 1]
        return out
    start = max(lmax, int(abs(z))) + 12 + int(math.sqrt(40.0 * (max(lmax, abs(z)) + 2)))
    fp, f = 0.0 + 0.0j, 1e-30 + 0.0j
    vals = np.zeros(start + 2, dtype=complex)
    vals[start] = f
    for l in range(start, 0, -1):
        fm = (2 * l + 1) / z * f - fp
        fp, f = f, fm
        vals[l - 1] = fm
        m = abs(fm)
        if m > 1e250:  # rescale to avoid overflow
            vals[l - 1:start + 1] /= m
            fp, f = fp / m, f / m
    # normalize with whichever of j0, j1 is better conditioned
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    out[:] = vals[:lmax + 2] * scale
    return out


def _y_table(lmax: int, z: complex, jt: np.ndarray) -> np.ndarray:
    """``y_l`` from the Hankel function that decays in the half-plane of ``z``.

    Upward recurrence is stable for ``h1`` when ``Im z >= 0`` and for
    ``h2`` otherwise; ``y = (h1 - j)/i`` or ``y = (j - h2)/i``.
    """
    s = 1.0 if z.imag >= 0 else -1.0
    e = cmath.exp(1j * s * z)
    h = np.empty(lmax + 2, dtype=complex)
    h[0] = -1j * s * e / z
    h[1] = -e / z * (1.0 + 1j * s / z)
    for l in range(1, lmax + 1):
        h[l + 1] = (2 * l + 1) / z * h[l] - h[l - 1]
    return s * (h - jt) / 1j


def spherical_bessel(l: int, z) -> SphericalBessel:
    """``j_l, y_l, h1_l`` and Riccati derivatives ``[z f_l(z)]'`` at complex ``z``."""
    z = complex(z)
    if z == 0:
        raise OracleError("spherical Bessel functions need z != 0")
    if l < 0:
        raise OracleError("order must be non-negative")
    jt = _j_table(l, z)
    yt = _y_table(l, z, jt)
    if not (np.all(np.isfinite(jt)) and np.all(np.isfinite(yt))):
        raise OracleError(f"overflow in spherical Bessel evaluation at l={l}, z={z}")
    j, y = jt[l], yt[l]
    if l == 0:
        dj, dy = cmath.cos(z), cmath.sin(z)
    else:
        dj = z * jt[l - 1] - l * j
        dy = z * yt[l - 1] - l * y
    return SphericalBessel(j, y, j + 1j * y, dj, dy, dj + 1j * dy)


# ----------------------------------------------------------------------------- determinants

@dataclass(frozen=True)
class ModeDeterminant:
    family: str
    l: int
    n: float
    R: float = 1.0

    def __post_init__(self):
        if self.family not in (TE, TM):
            raise OracleError(f"unknown family {self.family!r}")
        if self.l < 1:
            raise OracleError("order l must be at least 1")
        if not self.n > 0 or self.n == 1:
            raise OracleError("contrast must be positive and different from 1")
        if not self.R > 0:
            raise OracleError("radius must be positive")

    def __call__(self, k):
        k = complex(k)
        k1 = k * cmath.sqrt(self.n)
        a = spherical_bessel(self.l, k * self.R)
        b = spherical_bessel(self.l, k1 * self.R)
        if self.family == TE:
            val = b.j * a.dj - a.j * b.dj
        else:
            val = k * k * a.j * b.dj - k1 * k1 * b.j * a.dj
        return val.real if k.imag == 0 else val


def build_determinant(family: str, l: int, n: float, R: float = 1.0) -> ModeDeterminant:
    return ModeDeterminant(family, int(l), float(n), float(R))


@dataclass(frozen=True)
class Root:
    k: float
    grazing: bool = False
    family: str = ""
    l: int = 0

    def __float__(self):
        return self.k


def find_roots(det, interval, step: float = GRID_STEP, tol: float = ROOT_TOL) -> list:
    """Sign-change bracketing on a grid, then bisection.

    Double roots without a sign change are detected from a sign change
    of the grid derivative with a vanishing minimum of ``|det|`` and are
    reported with ``grazing=True``.
    """
    a, b = map(float, interval)
    if not (0 < a < b):
        raise OracleError("root interval must lie in (0, inf)")
    m = max(2, int(math.ceil((b - a) / step)) + 1)
    ks = np.linspace(a, b, m)
    f = lambda x: float(np.real(det(x)))
    vals = np.array([f(x) for x in ks])
    fam, l = getattr(det, "family", ""), getattr(det, "l", 0)
    roots = []
    for i in range(m - 1):
        if vals[i] == 0.0:
            left = vals[i - 1] if i > 0 else -vals[i + 1]
            roots.append(Root(float(ks[i]), bool(left * vals[i + 1] > 0), fam, l))
        elif vals[i] * vals[i + 1] < 0:
            r = bisect(f, ks[i], ks[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
            roots.append(Root(float(r), False, fam, l))
    if vals[-1] == 0.0:
        roots.append(Root(float(ks[-1]), False, fam, l))
    scale = float(np.max(np.abs(vals))) or 1.0
    d = np.diff(vals)
    for i in range(1, m - 1):
        local_min = abs(vals[i]) < abs(vals[i - 1]) and abs(vals[i]) < abs(vals[i + 1])
        if local_min and d[i - 1] * d[i] < 0 and vals[i - 1] * vals[i] > 0 and vals[i] * vals[i + 1] > 0:
            res = minimize_scalar(lambda x: abs(f(x)), bracket=(ks[i - 1], ks[i], ks[i + 1]),
                                  method="golden", options={"xtol": 1e-12})
            if abs(res.fun) <= 1e-10 * scale and ks[i - 1] < res.x < ks[i + 1]:
                roots.append(Root(float(res.x), True, fam, l))
    return sorted(roots, key=lambda r: r.k)


def oracle_roots(n: float, R: float = 1.0, interval=(0.5, 6.0), lmax: int = 6,
                 step: float = GRID_STEP) -> list:
    out = []
    for family in (TE, TM):
        for l in range(1, lmax + 1):
            out.extend(find_roots(build_determinant(family, l, n, R), interval, step))
    return sorted(out, key=lambda r: r.k)


def roots_json(n: float, R: float = 1.0, interval=(0.5, 6.0), lmax: int = 6) -> str:
    groups = []
    for family in (TE, TM):
        for l in range(1, lmax + 1):
            rs = find_roots(build_determinant(family, l, n, R), interval)
            groups.append({"family": family, "l": l, "n": n, "R": R,
                           "roots": [r.k for r in rs],
                           "grazing": [r.grazing for r in rs]})
    return json.dumps({"interval": list(interval), "modes": groups}, indent=1)


def sphere_operator_eig(l: int, k) -> complex:
    """Eigenvalue ``i k j_l(k) h1_l(k)`` of the scalar single layer on the unit sphere."""
    b = spherical_bessel(l, k)
    return 1j * complex(k) * b.j * b.h1


# ----------------------------------------------------------------------------- verification

@lru_cache(maxsize=32)
def _debye_fields(family, l):
    """Callables ``(x, y, z, kappa, amp) -> (E, curl E)`` for one mode."""
    import sympy as sp

    x, y, z, kappa, amp = sp.symbols("x y z kappa amp")
    r = sp.sqrt(x * x + y * y + z * z)
    # zonal (m = 0) angular factor; the radial trace conditions do not depend on m
    ang = sp.legendre(l, z / r)
    u = amp * sp.expand_func(sp.jn(l, kappa * r)) * ang
    pos = sp.Matrix([x, y, z])
    grad = sp.Matrix([sp.diff(u, v) for v in (x, y, z)])

    def curl(f):
        return sp.Matrix([
            sp.diff(f[2], y) - sp.diff(f[1], z),
            sp.diff(f[0], z) - sp.diff(f[2], x),
            sp.diff(f[1], x) - sp.diff(f[0], y),
        ])

    e = grad.cross(pos)
    if family == TM:
        e = curl(e)
    h = curl(e)
    args = (x, y, z, kappa, amp)
    return sp.lambdify(args, e, modules="mpmath"), sp.lambdify(args, h, modules="mpmath")


def verify_root(family: str, l: int, n: float, k: float, R: float = 1.0,
                n_points: int = 4, dps: int = 30) -> float:
    """Relative trace mismatch of explicitly built fields at a root.

    The inner field uses ``k1 = k sqrt(n)`` and the background field
    ``k``; the inner amplitude is fixed by matching tangential ``E`` at
    one boundary point, and the largest remaining mismatch of both
    tangential traces over ``n_points`` boundary points is returned.
    """
    import mpmath

    e_fn, h_fn = _debye_fields(family, int(l))
    with mpmath.workdps(dps):
        k0 = mpmath.mpf(k)
        k1 = k0 * mpmath.sqrt(mpmath.mpf(n))
        pts = []
        for i in range(n_points):
            th = mpmath.mpf(0.3) + mpmath.mpf(2.2) * i / max(n_points - 1, 1)
            ph = mpmath.mpf(0.7) + mpmath.mpf(1.3) * i
            pts.append([R * mpmath.sin(th) * mpmath.cos(ph), R * mpmath.sin(th) * mpmath.sin(ph),
                        R * mpmath.cos(th)])

        def tang(v, p):
            nu = [c / R for c in p]
            return mpmath.matrix([nu[1] * v[2] - nu[2] * v[1], nu[2] * v[0] - nu[0] * v[2],
                                  nu[0] * v[1] - nu[1] * v[0]])

        p0 = pts[0]
        t_in = tang(e_fn(*p0, k1, 1), p0)
        t_out = tang(e_fn(*p0, k0, 1), p0)
        idx = max(range(3), key=lambda i: abs(t_out[i]))
        amp = t_out[idx] / t_in[idx]
        worst = mpmath.mpf(0)
        for p in pts:
            for fn in (e_fn, h_fn):
                ti = tang(fn(*p, k1, amp), p)
                to = tang(fn(*p, k0, 1), p)
                scale = max(mpmath.norm(to), mpmath.norm(ti))
                worst = max(worst, mpmath.norm(ti - to) / scale)
    return float(worst)
