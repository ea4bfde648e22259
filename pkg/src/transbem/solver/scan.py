"""Grid scan of the smallest singular value with golden-section refinement."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .candidate import EigenCandidate
from .families import MatrixFamily

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1
DEFAULT_KTOL = 1e-4
DEFAULT_EDGE_MARGIN = 0.02


class ScanError(ValueError):
    pass


@dataclass
class ScanResult:
    ks: np.ndarray
    sigmas: np.ndarray
    median: float
    threshold: float
    candidates: list
    failures: list = field(default_factory=list)  # (k, message)
    local_minima: list = field(default_factory=list)


def _memo(func):
    cache = {}

    def wrapped(k):
        k = float(k)
        if k not in cache:
            cache[k] = func(k)
        return cache[k]

    wrapped.cache = cache
    return wrapped


def golden_refine(func, a, b, c, known=None, ktol=DEFAULT_KTOL):
    """Golden-section minimization on the bracket ``a < b < c``.

    ``known`` maps already evaluated abscissae to values.  Stops once the
    bracket is narrower than ``ktol``; returns ``(k, f(k))``.
    """
    f = _memo(func)
    for x, v in (known or {}).items():
        f.cache[float(x)] = v
    res = minimize_scalar(f, bracket=(a, b, c), method="golden",
                          options={"xtol": ktol / (2.0 * abs(b))})
    return float(res.x), float(res.fun)


def _follow_edge(func, k_in, s_in, k_edge, s_edge, direction, dk, margin):
    """Step outward from a decreasing endpoint until ``func`` rises.

    Returns a golden-section bracket ``(a, b, c, known)`` or ``None`` when
    the margin is exhausted first (or only nonpositive k remain).
    """
    known = {float(k_in): s_in, float(k_edge): s_edge}
    prev, cur, s_cur = k_in, k_edge, s_edge
    limit = margin * abs(k_edge)
    while True:
        nxt = cur + direction * dk
        if abs(nxt - k_edge) > limit or nxt <= 0:
            return None
        s_nxt = func(nxt)
        known[float(nxt)] = s_nxt
        if s_nxt > s_cur:
            a, c = sorted((prev, nxt))
            return a, cur, c, known
        prev, cur, s_cur = cur, nxt, s_nxt


def sigma_scan(family: MatrixFamily, kmin: float, kmax: float, steps: int,
               threshold: float = DEFAULT_THRESHOLD, ktol: float = DEFAULT_KTOL,
               refine_below: float = 1.0, workers: int = 1,
               edge_margin: float = DEFAULT_EDGE_MARGIN) -> ScanResult:
    """Scan ``sigma_min`` on a uniform grid and refine its dips.

    Every sampled local minimum below ``refine_below`` times the median
    is refined by golden section; refined minima below ``threshold``
    times the median become candidates (not yet far-field filtered).
    A minimum on a window endpoint that still decreases outward is
    followed past the endpoint by at most ``edge_margin * k`` so that
    dips cut by the window boundary are resolved.
    """
    if not (0 < kmin < kmax) or steps < 2:
        raise ScanError("scan window must satisfy 0 < kmin < kmax and steps >= 2")
    ks = np.linspace(kmin, kmax, steps)
    failures = []

    def one(k):
        try:
            return family.sigma_min(k), None
        except Exception as exc:  # reported, the scan continues
            return np.nan, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, ks))
    else:
        out = [one(k) for k in ks]
    sig = np.array([o[0] for o in out], dtype=float)
    for k, (_, msg) in zip(ks, out):
        if msg is not None:
            log.warning("assembly failed at k=%s: %s", k, msg)
            failures.append((float(k), msg))
    ok = np.isfinite(sig)
    median = float(np.median(sig[ok])) if ok.any() else np.nan
    thr = threshold * median

    minima = []
    for i in range(steps):
        if not ok[i]:
            continue
        left = sig[i - 1] if i > 0 and ok[i - 1] else np.inf
        right = sig[i + 1] if i + 1 < steps and ok[i + 1] else np.inf
        if sig[i] < left and sig[i] <= right and sig[i] < refine_below * median:
            minima.append(i)

    cands = []
    for i in minima:
        lo = ks[max(i - 1, 0)]
        hi = ks[min(i + 1, steps - 1)]
        try:
            note = None
            if 0 < i < steps - 1:
                known = {ks[j]: sig[j] for j in (i - 1, i, i + 1)}
                kr, sr = golden_refine(family.sigma_min, lo, ks[i], hi, known, ktol)
            else:
                outward = 1.0 if i == steps - 1 else -1.0
                inner = ks[i - 1] if i == steps - 1 else ks[i + 1]
                bracket = _follow_edge(family.sigma_min, inner, sig[i - 1 if i else i + 1], ks[i],
                                       sig[i], outward, ks[1] - ks[0], edge_margin)
                if bracket is not None:
                    a, b, c, known = bracket
                    kr, sr = golden_refine(family.sigma_min, a, b, c, known, ktol)
                    if not kmin <= kr <= kmax:
                        note = f"edge dip followed outside the scan window to k = {kr:.6g}"
                else:
                    res = minimize_scalar(family.sigma_min, bounds=(lo, hi), method="bounded",
                                          options={"xatol": ktol / 2})
                    kr, sr = float(res.x), float(res.fun)
        except Exception as exc:
            failures.append((float(ks[i]), f"refinement failed: {exc}"))
            continue
        if sr < thr:
            s, v = family.kernel_vector(kr)
            cand = EigenCandidate(complex(kr), s, v, source="scan")
            if note:
                cand.notes.append(note)
            cands.append(cand)
    return ScanResult(ks, sig, median, thr, cands, failures, [float(ks[i]) for i in minima])
