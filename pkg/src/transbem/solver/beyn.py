"""Beyn's contour-integral method for holomorphic matrix families.

With a random probe block ``V`` and trapezoid nodes ``z_j`` on a circle::

    A0 = (1/N) sum_j r e^{i t_j} L(z_j)^{-1} V
    A1 = (1/N) sum_j r e^{i t_j} z_j L(z_j)^{-1} V

The numerical rank of ``A0`` equals the number of eigenvalues inside
the circle (counted with multiplicity); with ``A0 = U S W^H`` truncated
to that rank the eigenvalues are those of ``U^H A1 W S^{-1}``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .candidate import EigenCandidate
from .families import MatrixFamily

log = logging.getLogger(__name__)


SINGULAR_RCOND = 1e-15


class BeynError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContourSpec:
    center: complex
    radius: float
    nodes: int = 32
    probes: int = 8
    rank_tol: float | None = None  # relative; None selects the largest gap
    gap: float = 10.0
    seed: int = 12345

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("contour radius must be positive")
        if self.nodes < 16:
            raise ValueError("contour needs at least 16 nodes")
        if self.probes < 1:
            raise ValueError("probe count must be positive")
        if not leaves_domain_ok(self.center, self.radius):
            raise ValueError("contour leaves analyticity domain")

    def points(self, radius=None):
        r = self.radius if radius is None else radius
        t = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        return complex(self.center) + r * np.exp(1j * t), t


def leaves_domain_ok(center, radius) -> bool:
    """True when the closed disc avoids the cut ``(-inf, 0]``."""
    c = complex(center)
    dist = abs(c) if c.real >= 0 else abs(c.imag)
    return dist > radius


def _rank(s, scale, spec: ContourSpec):
    if spec.rank_tol is not None:
        return int(np.sum(s > spec.rank_tol * s[0])) if s[0] > 0 else 0
    ext = np.concatenate([[scale], s, [scale * 1e-16]])
    ext = np.maximum(ext, np.finfo(float).tiny)
    ratios = ext[:-1] / ext[1:]
    m = int(np.argmax(ratios))
    if ratios[m] < spec.gap:
        raise BeynError(
            f"rank tolerance ambiguous: no gap of {spec.gap:g}x in the singular values of A0"
        )
    return m


def _moments(family, spec, radius, V):
    z, t = spec.points(radius)
    a0 = np.zeros(V.shape, dtype=complex)
    a1 = np.zeros(V.shape, dtype=complex)
    rconds = np.empty(spec.nodes)
    scale = 0.0
    for j in range(spec.nodes):  # fixed node order keeps the sums deterministic
        mat = family.matrix(z[j])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(mat, check_finite=True)
        anorm = np.abs(mat).sum(axis=0).max()
        rc, _ = sla.lapack.zgecon(lu, anorm, norm="1")
        rconds[j] = rc
        if not rc > SINGULAR_RCOND:
            continue  # the retry logic rejects this radius
        x = sla.lu_solve((lu, piv), V)
        scale = max(scale, np.linalg.norm(x, 2) * radius)
        w = radius * np.exp(1j * t[j]) / spec.nodes
        a0 += w * x
        a1 += (w * z[j]) * x
    return a0, a1, rconds, scale


def beyn_solve(family: MatrixFamily, spec: ContourSpec, verify_tol: float = 1e-2,
               cluster_tol: float = 1e-3, max_retries: int = 3, touch_ratio: float = 1e-3):
    """Eigenvalues of ``family.matrix`` inside the contour.

    Eigenvalues closer than ``cluster_tol`` (relative) are merged into one
    candidate carrying their multiplicity.  Each candidate is verified by
    the family's ``sigma_min`` and accepted only if it is below
    ``verify_tol``; far-field filtering is applied separately.
    """
    rng = np.random.default_rng(spec.seed)
    dim = family.dimension
    V = rng.standard_normal((dim, spec.probes)) + 1j * rng.standard_normal((dim, spec.probes))
    radius = spec.radius
    for attempt in range(max_retries + 1):
        a0, a1, rconds, scale = _moments(family, spec, radius, V)
        med = float(np.median(rconds))
        if rconds.min() > touch_ratio * med and rconds.min() > SINGULAR_RCOND:
            break
        log.info("contour at radius %.6g touches the spectrum (min rcond %.3e)", radius, rconds.min())
        if attempt == max_retries:
            raise BeynError("contour touches spectrum")
        radius = spec.radius * (1.0 + 0.02 * rng.uniform(-1.0, 1.0))
        if not leaves_domain_ok(spec.center, radius):
            raise BeynError("contour leaves analyticity domain")
    u, s, wh = np.linalg.svd(a0, full_matrices=False)
    m = _rank(s, scale, spec)
    if m == spec.probes:
        raise BeynError(f"probe count {spec.probes} too small: A0 has full numerical rank")
    if m == 0:
        return []
    um, sm, wm = u[:, :m], s[:m], wh[:m].conj().T
    b = um.conj().T @ a1 @ wm / sm[None, :]
    lam, vecs = np.linalg.eig(b)
    inside = np.abs(lam - spec.center) < radius
    lam, vecs = lam[inside], vecs[:, inside]
    order = np.lexsort((lam.imag, lam.real))
    lam, vecs = lam[order], vecs[:, order]

    clusters: list[list[int]] = []
    for i, l in enumerate(lam):
        if clusters and abs(l - lam[clusters[-1][0]]) <= cluster_tol * abs(l):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    out = []
    for idx in clusters:
        k = complex(np.mean(lam[idx]))
        try:
            sig, vec = family.kernel_vector(k)
        except Exception as exc:
            cand = EigenCandidate(k, 0.0, um @ vecs[:, idx[0]], multiplicity=len(idx),
                                  source="beyn", notes=[f"verification failed: {exc}"])
            out.append(cand)
            continue
        cand = EigenCandidate(k, sig, vec, multiplicity=len(idx), source="beyn")
        cand.accepted = sig <= verify_tol
        if not cand.accepted:
            cand.notes.append(f"sigma_min {sig:.3e} above verification threshold {verify_tol:g}")
        out.append(cand)
    return out
