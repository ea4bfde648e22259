"""Compiled triangle-pair moment loops and RWG scatter.

For a triangle pair (a, b) and a kernel ``G(x, y)`` the loops accumulate
moments in coordinates relative to the triangle centroids; every RWG
entry of the pair is an explicit combination of them.  Scalar slots hold
``[I0, Ix(3), Iy(3), Ixy]`` and gradient slots, with ``h = grad_x G``,
hold ``[x.(h x y), h x y (3), x x h (3), h (3)]``.

Slot layout (offsets into the 36 moments of a pair)::

    0  scalar Phi_ka
    8  scalar Phi_k1 - Phi_k
    16 gradient Phi_ka
    26 gradient difference
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..kernels import FOUR_PI, _cis, _diff_pair

N_MOM = 36
OFFSETS = (0, 8, 16, 26)


@njit(cache=True, nogil=True, inline="always")
def _acc_scalar(out, off, v, xr, yr):
    out[off] += v
    for c in range(3):
        out[off + 1 + c] += v * xr[c]
        out[off + 4 + c] += v * yr[c]
    out[off + 7] += v * (xr[0] * yr[0] + xr[1] * yr[1] + xr[2] * yr[2])


@njit(cache=True, nogil=True, inline="always")
def _acc_grad(out, off, h0, h1, h2, xr, yr):
    # h x yr
    c0 = h1 * yr[2] - h2 * yr[1]
    c1 = h2 * yr[0] - h0 * yr[2]
    c2 = h0 * yr[1] - h1 * yr[0]
    out[off] += xr[0] * c0 + xr[1] * c1 + xr[2] * c2
    out[off + 1] += c0
    out[off + 2] += c1
    out[off + 3] += c2
    # xr x h
    out[off + 4] += xr[1] * h2 - xr[2] * h1
    out[off + 5] += xr[2] * h0 - xr[0] * h2
    out[off + 6] += xr[0] * h1 - xr[1] * h0
    out[off + 7] += h0
    out[off + 8] += h1
    out[off + 9] += h2


@njit(cache=True, nogil=True)
def _point_loop(out, xs, ys, ws, n, ca, cb, f0, f1, f2, f3, ka, k, k1):
    """Accumulate the requested slots over paired points ``xs[q], ys[q]``."""
    xr = np.empty(3)
    yr = np.empty(3)
    sing = f0 or f2
    smooth = f1 or f3
    for q in range(n):
        d0 = xs[q, 0] - ys[q, 0]
        d1 = xs[q, 1] - ys[q, 1]
        d2 = xs[q, 2] - ys[q, 2]
        r = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        w = ws[q]
        for c in range(3):
            xr[c] = xs[q, c] - ca[c]
            yr[c] = ys[q, c] - cb[c]
        if sing:
            ea = _cis(ka, r) * (w / (FOUR_PI * r))
            if f0:
                _acc_scalar(out, 0, ea, xr, yr)
            if f2:
                g = (1j * ka - 1.0 / r) * ea / r
                _acc_grad(out, 16, d0 * g, d1 * g, d2 * g, xr, yr)
        if smooth:
            dv, dg = _diff_pair(k, k1, r)
            if f1:
                _acc_scalar(out, 8, w * dv, xr, yr)
            if f3:
                g = w * dg
                _acc_grad(out, 26, d0 * g, d1 * g, d2 * g, xr, yr)


@njit(cache=True, nogil=True)
def _tensor_points(pa, wa, pb, wb, xs, ys, ws):
    na = wa.shape[0]
    nb = wb.shape[0]
    m = 0
    for i in range(na):
        for j in range(nb):
            for c in range(3):
                xs[m, c] = pa[i, c]
                ys[m, c] = pb[j, c]
            ws[m] = wa[i] * wb[j]
            m += 1
    return m


@njit(cache=True, nogil=True)
def _ss_points(va, vb, perm_a, perm_b, xb, yb, wref, scale, xs, ys, ws):
    n = wref.shape[0]
    for q in range(n):
        for c in range(3):
            xs[q, c] = (xb[q, 0] * va[perm_a[0], c] + xb[q, 1] * va[perm_a[1], c]
                        + xb[q, 2] * va[perm_a[2], c])
            ys[q, c] = (yb[q, 0] * vb[perm_b[0], c] + yb[q, 1] * vb[perm_b[1], c]
                        + yb[q, 2] * vb[perm_b[2], c])
        ws[q] = wref[q] * scale
    return n


@njit(cache=True, nogil=True)
def _complete_perm(perm, n_shared):
    m = n_shared
    for i in range(3):
        found = False
        for s in range(n_shared):
            if perm[s] == i:
                found = True
        if not found:
            perm[m] = i
            m += 1


@njit(cache=True, nogil=True)
def pair_moments_tile(
    ta_lo, ta_hi,
    a_verts, a_idx, a_cent, a_rad, a_diam, a_area, a_pf, a_wf, a_pn, a_wn,
    b_verts, b_idx, b_cent, b_rad, b_diam, b_area, b_pf, b_wf, b_pn, b_wn,
    same_surface, flags, ka, k, k1, near_factor,
    ss_x0, ss_y0, ss_w0, ss_x1, ss_y1, ss_w1, ss_x2, ss_y2, ss_w2,
):
    """Moments of all pairs (ta, tb) with ta in [ta_lo, ta_hi).

    Touching pairs of one surface use the Sauter--Schwab tables for every
    slot; gradient slots vanish identically on a flat coincident pair.
    Other pairs use tensor Gauss rules, the near rule below the
    proximity threshold.  With ``same_surface`` only pairs ``tb >= ta``
    are filled.
    """
    nb = b_verts.shape[0]
    out = np.zeros((ta_hi - ta_lo, nb, N_MOM), dtype=np.complex128)
    perm_a = np.empty(3, dtype=np.int64)
    perm_b = np.empty(3, dtype=np.int64)
    cap = max(a_wn.shape[1] * b_wn.shape[1], ss_w0.shape[0], ss_w1.shape[0], ss_w2.shape[0])
    xs = np.empty((cap, 3))
    ys = np.empty((cap, 3))
    ws = np.empty(cap)
    f0, f1, f2, f3 = flags[0], flags[1], flags[2], flags[3]
    for ta in range(ta_lo, ta_hi):
        row = out[ta - ta_lo]
        # one surface: only tb >= ta, the scatter mirrors the pair
        tb_lo = ta if same_surface else 0
        for tb in range(tb_lo, nb):
            mom = row[tb]
            n_shared = 0
            if same_surface:
                for i in range(3):
                    for j in range(3):
                        if a_idx[ta, i] == b_idx[tb, j]:
                            perm_a[n_shared] = i
                            perm_b[n_shared] = j
                            n_shared += 1
            if n_shared > 0:
                _complete_perm(perm_a, n_shared)
                _complete_perm(perm_b, n_shared)
                scale = 4.0 * a_area[ta] * b_area[tb]
                if n_shared == 3:
                    if not (f0 or f1):
                        continue
                    n = _ss_points(a_verts[ta], b_verts[tb], perm_a, perm_b,
                                   ss_x0, ss_y0, ss_w0, scale, xs, ys, ws)
                    _point_loop(mom, xs, ys, ws, n, a_cent[ta], b_cent[tb],
                                f0, f1, False, False, ka, k, k1)
                elif n_shared == 2:
                    n = _ss_points(a_verts[ta], b_verts[tb], perm_a, perm_b,
                                   ss_x1, ss_y1, ss_w1, scale, xs, ys, ws)
                    _point_loop(mom, xs, ys, ws, n, a_cent[ta], b_cent[tb],
                                f0, f1, f2, f3, ka, k, k1)
                else:
                    n = _ss_points(a_verts[ta], b_verts[tb], perm_a, perm_b,
                                   ss_x2, ss_y2, ss_w2, scale, xs, ys, ws)
                    _point_loop(mom, xs, ys, ws, n, a_cent[ta], b_cent[tb],
                                f0, f1, f2, f3, ka, k, k1)
                continue
            dc0 = a_cent[ta, 0] - b_cent[tb, 0]
            dc1 = a_cent[ta, 1] - b_cent[tb, 1]
            dc2 = a_cent[ta, 2] - b_cent[tb, 2]
            gap = np.sqrt(dc0 * dc0 + dc1 * dc1 + dc2 * dc2) - a_rad[ta] - b_rad[tb]
            if gap < near_factor * max(a_diam[ta], b_diam[tb]):
                n = _tensor_points(a_pn[ta], a_wn[ta], b_pn[tb], b_wn[tb], xs, ys, ws)
            else:
                n = _tensor_points(a_pf[ta], a_wf[ta], b_pf[tb], b_wf[tb], xs, ys, ws)
            _point_loop(mom, xs, ys, ws, n, a_cent[ta], b_cent[tb], f0, f1, f2, f3, ka, k, k1)
    return out


@njit(cache=True, nogil=True)
def scatter_tile(
    mom, ta_lo,
    a_edges, a_coef, a_opp, a_cent,
    b_edges, b_coef, b_opp, b_cent,
    flags, mirror, v0, w0, v1, w1, k2, k3,
):
    """Add RWG entries of a tile of pair moments into the output blocks.

    Entries are accumulated in the fixed order (ta, tb, i, j).  With
    ``mirror`` the tile holds pairs ``tb >= ta`` of one surface and each
    off-diagonal pair is also added at the transposed position, which
    is exact because every weak form here is symmetric.
    """
    nta = mom.shape[0]
    nb = mom.shape[1]
    pa = np.empty(3)
    pb = np.empty(3)
    for s in range(nta):
        ta = ta_lo + s
        tb_lo = ta if mirror else 0
        for tb in range(tb_lo, nb):
            m = mom[s, tb]
            both = mirror and tb != ta
            if flags[0]:
                w0[ta, tb] += m[0]
                if both:
                    w0[tb, ta] += m[0]
            if flags[1]:
                w1[ta, tb] += m[8]
                if both:
                    w1[tb, ta] += m[8]
            for i in range(3):
                ei = a_edges[ta, i]
                ci = a_coef[ta, i]
                for c in range(3):
                    pa[c] = a_opp[ta, i, c] - a_cent[ta, c]
                for j in range(3):
                    ej = b_edges[tb, j]
                    cc = ci * b_coef[tb, j]
                    for c in range(3):
                        pb[c] = b_opp[tb, j, c] - b_cent[tb, c]
                    papb = pa[0] * pb[0] + pa[1] * pb[1] + pa[2] * pb[2]
                    if flags[0]:
                        val = m[7] + papb * m[0]
                        for c in range(3):
                            val -= pa[c] * m[4 + c] + pb[c] * m[1 + c]
                        v0[ei, ej] += cc * val
                        if both:
                            v0[ej, ei] += cc * val
                    if flags[1]:
                        val = m[15] + papb * m[8]
                        for c in range(3):
                            val -= pa[c] * m[12 + c] + pb[c] * m[9 + c]
                        v1[ei, ej] += cc * val
                        if both:
                            v1[ej, ei] += cc * val
                    if flags[2] or flags[3]:
                        # a.(h x b) = -(p_a x p_b).h
                        x0 = pa[1] * pb[2] - pa[2] * pb[1]
                        x1 = pa[2] * pb[0] - pa[0] * pb[2]
                        x2 = pa[0] * pb[1] - pa[1] * pb[0]
                        if flags[2]:
                            val = m[16] - x0 * m[23] - x1 * m[24] - x2 * m[25]
                            for c in range(3):
                                val -= pa[c] * m[17 + c] + pb[c] * m[20 + c]
                            k2[ei, ej] += cc * val
                            if both:
                                k2[ej, ei] += cc * val
                        if flags[3]:
                            val = m[26] - x0 * m[33] - x1 * m[34] - x2 * m[35]
                            for c in range(3):
                                val -= pa[c] * m[27 + c] + pb[c] * m[30 + c]
                            k3[ei, ej] += cc * val
                            if both:
                                k3[ej, ei] += cc * val
