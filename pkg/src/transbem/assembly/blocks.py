"""Galerkin operator blocks and the composite block systems.

Weak forms, for RWG test functions ``phi_i`` and trial functions ``phi_j``::

    S_k:  <S_k phi_j, phi_i>
    T_k:  k <S_k phi_j, phi_i> - (1/k) <S_k div phi_j, div phi_i>
    K_k:  int int phi_i(x) . (grad_x Phi_k(x, y) x phi_j(y))

The second term of ``T_k`` comes from moving the surface gradient onto
the test function, ``<grad_G s, v> = -<s, div v>``.  ``K_k`` on one
surface is the principal-value form; the jump terms cancel in every
difference and sum that enters the systems below.

Weighted differences reuse one singular single-layer assembly with
``Phi_k1`` plus smooth assemblies of ``Phi_k1 - Phi_k``::

    a T_k1 - b T_k = (a k1 - b k) S_k1 + b k D
                     - div' [ (a/k1 - b/k) S_k1 + (b/k) D ] div

with ``D = S_k1 - S_k``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..kernels import Wavenumbers
from ..mesh import surface_gap
from ..spaces import DivConformingSpace, LoopStarSplit, gram_matrices
from .engine import compute_blocks
from .geometry import QuadratureOrders


class AssemblyError(RuntimeError):
    pass


@dataclass
class OperatorBlock:
    matrix: np.ndarray
    kind: str
    wavenumbers: tuple
    test_surface: str = "gamma"
    trial_surface: str = "gamma"
    orders: tuple = ()
    scalar: np.ndarray | None = field(default=None, repr=False)


@dataclass
class BlockSystem:
    """Block matrix over named unknowns.

    ``layout`` is ``"two-by-two"`` (M, J), ``"three-by-three"`` (M, Q, P)
    or ``"schur"`` (M, J on the outer surface).
    """

    layout: str
    blocks: dict
    k: complex
    contrast: tuple
    shape: tuple
    info: dict = field(default_factory=dict)

    def matrix(self) -> np.ndarray:
        n = len(self.shape)
        rows = [[self.blocks[f"{i + 1}{j + 1}"] for j in range(n)] for i in range(n)]
        return np.block(rows)


def _div(space: DivConformingSpace) -> np.ndarray:
    return space.divergence_matrix.toarray()


def _check_k(k):
    k = complex(k)
    if k.imag == 0.0 and k.real <= 0.0:
        raise AssemblyError(f"wavenumber {k} lies on the branch cut (-inf, 0]")
    return k


def _same(test, trial):
    return trial is None or trial is test or trial.mesh is test.mesh


# ----------------------------------------------------------------------------- single-k blocks

def assemble_S(k, test: DivConformingSpace, trial: DivConformingSpace | None = None,
               orders: QuadratureOrders | None = None, workers=None) -> OperatorBlock:
    """Vector single layer; ``.scalar`` holds the piecewise-constant version."""
    k = _check_k(k)
    trial = test if trial is None else trial
    orders = orders or QuadratureOrders()
    raw = compute_blocks(test, trial, ka=k, single=True, orders=orders, workers=workers,
                         same_surface=_same(test, trial))
    return OperatorBlock(raw.vs, "S", (k,), orders=orders.as_tuple(), scalar=raw.ws)


def assemble_T(k, test, trial=None, orders=None, workers=None) -> OperatorBlock:
    k = _check_k(k)
    trial = test if trial is None else trial
    s = assemble_S(k, test, trial, orders, workers)
    mat = k * s.matrix - (_div(test).T @ s.scalar @ _div(trial)) / k
    return OperatorBlock(mat, "T", (k,), orders=s.orders, scalar=s.scalar)


K_TRACES = ("interior", "exterior", "principal")


def assemble_K_same(k, space, orders=None, workers=None, trace: str = "interior") -> OperatorBlock:
    """``<phi_i, gamma curl S_k phi_j>`` on one surface.

    ``trace`` selects the one-sided limit: the tangential part of
    ``curl S psi`` is the principal value plus ``(1/2) nu x psi`` from
    the interior and minus it from the exterior.  Sums and differences
    inside the transmission systems use the principal value, where the
    jump terms cancel.
    """
    k = _check_k(k)
    if trace not in K_TRACES:
        raise ValueError(f"trace must be one of {K_TRACES}")
    orders = orders or QuadratureOrders()
    raw = compute_blocks(space, space, ka=k, grad_single=True, orders=orders, workers=workers,
                         same_surface=True)
    mat = raw.ks
    if trace != "principal":
        _, rot = gram_matrices(space)
        half = 0.5 * rot.toarray()
        mat = mat + half if trace == "interior" else mat - half
    return OperatorBlock(mat, "K", (k,), orders=orders.as_tuple())


def assemble_K_cross(k, test, trial, orders=None, workers=None) -> OperatorBlock:
    """``<curl S_k^{trial -> test} u, v>`` for densities on a disjoint surface."""
    k = _check_k(k)
    if surface_gap(test.mesh, trial.mesh) <= 1e-12:
        raise AssemblyError("surfaces not disjoint")
    orders = orders or QuadratureOrders()
    raw = compute_blocks(test, trial, ka=k, grad_single=True, orders=orders, workers=workers,
                         same_surface=False)
    return OperatorBlock(raw.ks, "K", (k,), "test", "trial", orders.as_tuple())


# ----------------------------------------------------------------------------- difference blocks

@dataclass
class DiffBlocks:
    """Pieces shared by every weighted difference at one ``(k, k1)``."""

    k: complex
    k1: complex
    s1: np.ndarray  # vector S_k1
    w1: np.ndarray  # scalar S_k1
    sd: np.ndarray  # vector S_k1 - S_k
    wd: np.ndarray  # scalar S_k1 - S_k
    kd: np.ndarray  # K_k1 - K_k
    div: np.ndarray
    orders: tuple

    def s_diff(self) -> OperatorBlock:
        return OperatorBlock(self.sd, "S-diff", (self.k, self.k1), orders=self.orders, scalar=self.wd)

    def k_diff(self) -> OperatorBlock:
        return OperatorBlock(self.kd, "K-diff", (self.k, self.k1), orders=self.orders)

    def t_weighted(self, alpha, beta) -> OperatorBlock:
        """``alpha T_k1 - beta T_k``."""
        k, k1 = self.k, self.k1
        vec = (alpha * k1 - beta * k) * self.s1 + beta * k * self.sd
        sca = (alpha / k1 - beta / k) * self.w1 + (beta / k) * self.wd
        mat = vec - self.div.T @ sca @ self.div
        return OperatorBlock(mat, "T-weighted-diff", (k, k1, alpha, beta), orders=self.orders)


def diff_blocks(k, k1, space, orders=None, workers=None) -> DiffBlocks:
    orders = orders or QuadratureOrders()
    raw = compute_blocks(space, space, ka=k1, k=k, k1=k1, single=True, diff_scalar=True,
                         grad_diff=True, orders=orders, workers=workers, same_surface=True)
    return DiffBlocks(complex(k), complex(k1), raw.vs, raw.ws, raw.vd, raw.wd, raw.kd,
                      _div(space), orders.as_tuple())


def assemble_diff_blocks(w: Wavenumbers, space, orders=None, workers=None) -> DiffBlocks:
    _check_k(w.k)
    return diff_blocks(w.k, w.k1, space, orders, workers)


# ----------------------------------------------------------------------------- systems

def _two_by_two(d: DiffBlocks):
    k, k1 = d.k, d.k1
    a11 = (k1 * k1 - k * k) * d.s1 + (k * k) * d.sd - d.div.T @ d.wd @ d.div
    sca22 = (1.0 / (k1 * k1) - 1.0 / (k * k)) * d.w1 + d.wd / (k * k)
    a22 = d.sd - d.div.T @ sca22 @ d.div
    return a11, d.kd, a22


def assemble_L(w: Wavenumbers, space, orders=None, workers=None) -> BlockSystem:
    """The 2x2 system over (M, J); both off-diagonal blocks are one array."""
    d = assemble_diff_blocks(w, space, orders, workers)
    return system_from_diff(d, w.n)


def system_from_diff(d: DiffBlocks, n) -> BlockSystem:
    a11, a12, a22 = _two_by_two(d)
    e = a11.shape[0]
    return BlockSystem("two-by-two", {"11": a11, "12": a12, "21": a12, "22": a22},
                       d.k, (n,), (e, e))


def assemble_tilde_L(w: Wavenumbers, space, split: LoopStarSplit, orders=None,
                     workers=None) -> BlockSystem:
    """3x3 system over (M, Q, P) from the loop-star change of basis."""
    if split.space is not space:
        raise AssemblyError("loop-star split belongs to a different space")
    d = assemble_diff_blocks(w, space, orders, workers)
    return tilde_from_diff(d, split, w.n)


def tilde_from_diff(d: DiffBlocks, split: LoopStarSplit, n) -> BlockSystem:
    k, k1 = d.k, d.k1
    a11, kd, _ = _two_by_two(d)
    yq = split.loop_flux.toarray() / split.space.edge_lengths[:, None]
    star = split.star_edges
    # div of loop columns vanishes exactly; only star columns carry div
    dp = d.div[:, star]
    sca = (1.0 / (k1 * k1) - 1.0 / (k * k)) * d.w1 + d.wd / (k * k)
    sd = d.sd
    blocks = {
        "11": a11,
        "12": kd @ yq,
        "13": kd[:, star],
        "21": yq.T @ kd,
        "22": yq.T @ sd @ yq,
        "23": yq.T @ sd[:, star],
        "31": kd[star, :],
        "32": sd[star, :] @ yq,
        "33": sd[np.ix_(star, star)] - dp.T @ sca @ dp,
    }
    e = a11.shape[0]
    return BlockSystem("three-by-three", blocks, k, (n,), (e, split.n_loop, split.n_star))


def tilde_basis(split: LoopStarSplit) -> np.ndarray:
    """Block change of basis ``diag(I, [loop | star])`` in RWG coefficients."""
    e = split.space.dimension
    y = np.zeros((2 * e, 2 * e))
    y[:e, :e] = np.eye(e)
    y[e:, e:] = split.matrix()
    return y


# ----------------------------------------------------------------------------- two layers

@dataclass
class _SurfacePieces:
    s: np.ndarray
    w: np.ndarray
    kk: np.ndarray


def _single_pieces(k, test, trial, orders, workers, same):
    raw = compute_blocks(test, trial, ka=k, single=True, grad_single=True, orders=orders,
                         workers=workers, same_surface=same)
    return _SurfacePieces(raw.vs, raw.ws, raw.ks)


def _t(p: _SurfacePieces, k, d_test, d_trial):
    return k * p.s - (d_test.T @ p.w @ d_trial) / k


def assemble_l21(k, inner: DivConformingSpace, n1, n2, orders=None, workers=None) -> np.ndarray:
    """Transmission system on the inner surface (sum of both sides' operators).

    Row 1 tests the curl trace, row 2 the E trace; unknowns are ``(M, J)``.
    """
    k = _check_k(k)
    orders = orders or QuadratureOrders()
    k1 = k * cmath.sqrt(n1)
    k2 = k * cmath.sqrt(n2)
    d_in = _div(inner)
    p1 = _single_pieces(k1, inner, inner, orders, workers, True)
    p2 = _single_pieces(k2, inner, inner, orders, workers, True)
    t1, t2 = _t(p1, k1, d_in, d_in), _t(p2, k2, d_in, d_in)
    ksum = p1.kk + p2.kk
    return np.block([[k2 * t2 + k1 * t1, ksum], [ksum, t2 / k2 + t1 / k1]])


def assemble_schur(k, outer: DivConformingSpace, inner: DivConformingSpace, n1, n2,
                   orders=None, workers=None, cond_limit=1e12) -> BlockSystem:
    """Schur complement ``L20 - L_SG L21^{-1} L_GS`` on the outer surface.

    ``n1`` is the contrast inside the inner surface, ``n2`` in the layer
    between the surfaces.
    """
    k = _check_k(k)
    if not (n1 > 0 and n2 > 0) or n2 == 1:
        raise AssemblyError("two-layer contrasts need n1, n2 > 0 and n2 != 1")
    orders = orders or QuadratureOrders()
    k1 = k * cmath.sqrt(n1)
    k2 = k * cmath.sqrt(n2)
    d_out, d_in = _div(outer), _div(inner)

    l20 = system_from_diff(diff_blocks(k, k2, outer, orders, workers), n2).matrix()

    cross = _single_pieces(k2, outer, inner, orders, workers, False)
    t_x = _t(cross, k2, d_out, d_in)
    l_sg = np.block([[k2 * t_x, cross.kk], [cross.kk, t_x / k2]])

    l21 = assemble_l21(k, inner, n1, n2, orders, workers)

    lu, piv = sla.lu_factor(l21, check_finite=True)
    anorm = np.abs(l21).sum(axis=0).max()
    rcond, info = sla.lapack.zgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not cond < cond_limit:
        raise AssemblyError(f"L21 numerically singular (condition estimate {cond:.3e})")
    schur = l20 - l_sg @ sla.lu_solve((lu, piv), l_sg.T)
    e = outer.dimension
    blocks = {"11": schur[:e, :e], "12": schur[:e, e:], "21": schur[e:, :e], "22": schur[e:, e:]}
    return BlockSystem("schur", blocks, k, (n1, n2), (e, e),
                       info={"l21_condition": float(cond), "l21": l21, "l_sg": l_sg})
