"""Per-surface arrays consumed by the compiled assembly loops."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..quadrature import gauss_rule, singular_rule, IDENTICAL, EDGE, VERTEX
from ..spaces import DivConformingSpace


@dataclass(frozen=True)
class QuadratureOrders:
    regular: int = 5
    singular: int = 4
    near_factor: float = 0.3

    @property
    def near(self) -> int:
        return min(2 * self.regular, 20)

    def as_tuple(self):
        return (self.regular, self.singular, self.near_factor)


@dataclass(frozen=True)
class SurfaceArrays:
    verts: np.ndarray  # (F, 3, 3)
    idx: np.ndarray  # (F, 3)
    cent: np.ndarray
    rad: np.ndarray
    diam: np.ndarray
    area: np.ndarray
    pf: np.ndarray  # regular points (F, nf, 3)
    wf: np.ndarray  # weights with area folded in
    pn: np.ndarray  # near-field points
    wn: np.ndarray
    edges: np.ndarray  # (F, 3) global DOF of local edge i
    coef: np.ndarray  # (F, 3) s L / (2 A)
    opp: np.ndarray  # (F, 3, 3) opposite vertex of local edge i

    def kernel_args(self):
        return (self.verts, self.idx, self.cent, self.rad, self.diam, self.area,
                self.pf, self.wf, self.pn, self.wn)

    def rwg_args(self):
        return (self.edges, self.coef, self.opp, self.cent)


def surface_arrays(space: DivConformingSpace, orders: QuadratureOrders) -> SurfaceArrays:
    return _surface_arrays_cached(space, orders)


@lru_cache(maxsize=16)
def _surface_arrays_cached(space, orders):
    m = space.mesh
    verts = np.ascontiguousarray(m.vertices[m.triangles])
    cent = verts.mean(axis=1)
    rad = np.linalg.norm(verts - cent[:, None, :], axis=2).max(axis=1)
    diam = np.max(
        [np.linalg.norm(verts[:, i] - verts[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))],
        axis=0,
    )
    area = np.ascontiguousarray(m.areas, dtype=float)
    far, near = gauss_rule(orders.regular), gauss_rule(orders.near)
    pf = np.einsum("qi,fic->fqc", far.points, verts)
    pn = np.einsum("qi,fic->fqc", near.points, verts)
    wf = area[:, None] * far.weights[None, :]
    wn = area[:, None] * near.weights[None, :]
    edges = np.ascontiguousarray(m.triangle_edges, dtype=np.int64)
    lengths = space.edge_lengths[edges]
    coef = m.triangle_edge_signs * lengths / (2.0 * area[:, None])
    opp = verts.copy()  # local edge i is opposite local vertex i
    return SurfaceArrays(
        verts, np.ascontiguousarray(m.triangles, dtype=np.int64), cent, rad, diam, area,
        np.ascontiguousarray(pf), np.ascontiguousarray(wf),
        np.ascontiguousarray(pn), np.ascontiguousarray(wn),
        edges, np.ascontiguousarray(coef, dtype=float), opp,
    )


@lru_cache(maxsize=8)
def singular_tables(order: int):
    out = []
    for case in (IDENTICAL, EDGE, VERTEX):
        r = singular_rule(case, order)
        out.extend([np.ascontiguousarray(r.x_bary), np.ascontiguousarray(r.y_bary),
                    np.ascontiguousarray(r.weights)])
    return tuple(out)
